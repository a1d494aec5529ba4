"""Exception hierarchy shared by every layer.

Each error carries a stable ``kind`` string so the service layer and the CLI
can map failures to HTTP statuses and exit codes without string matching.
"""

from __future__ import annotations


class ThinkTankError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class ValidationError(ThinkTankError):
    """Input rejected before any side effect took place."""

    kind = "validation"

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations if violations is not None else [message]


class ConflictError(ThinkTankError):
    """Uniqueness or serialization rule violated (duplicate name, busy project)."""

    kind = "conflict"


class NotFoundError(ThinkTankError):
    """A referenced entity does not exist."""

    kind = "not_found"


class StateError(ThinkTankError):
    """Operation is valid in general but not in the entity's current state."""

    kind = "state"


class IntegrityError(ThinkTankError):
    """Stored data is corrupt, inconsistent, or from an unsupported layout version."""

    kind = "integrity"


class GatewayError(ThinkTankError):
    """LLM backend failure (transport, protocol, configuration, or script)."""

    kind = "gateway"


class GatewayTimeout(GatewayError):
    kind = "timeout"


class ProtocolError(GatewayError):
    """The backend answered with a body we cannot interpret."""

    kind = "protocol"


class ConfigurationError(GatewayError):
    """The backend rejected our configuration (unknown model, wrong dimension)."""

    kind = "configuration"


class ScriptError(GatewayError):
    """The scripted backend had no rule matching a request."""

    kind = "script"
