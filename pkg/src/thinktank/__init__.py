"""ThinkTank: a local-first multi-agent meeting engine.

Structured multi-round meetings among a coordinator, configurable domain
experts, and a critical reviewer, grounded by per-expert knowledge bases and
served over HTTP with live event streaming.
"""

from .engine import Engine
from .errors import (
    ConfigurationError,
    ConflictError,
    GatewayError,
    GatewayTimeout,
    IntegrityError,
    NotFoundError,
    ProtocolError,
    ScriptError,
    StateError,
    ThinkTankError,
    ValidationError,
)
from .gateway import ChatMessage, ChatRequest, OllamaGateway, ScriptedGateway
from .knowledge import KnowledgeStore, adaptive_filter, chunk_text, normalize_text
from .memory import MemoryStore, SessionMemory, append_turn, session_context
from .model import (
    AgentProfile,
    MeetingConfig,
    MeetingEvent,
    MeetingMinutes,
    MeetingRecord,
    ProjectRecord,
    add_expert,
    create_project,
    validate_meeting_config,
)
from .storage import Store

__version__ = "0.1.0"

__all__ = [
    "AgentProfile",
    "ChatMessage",
    "ChatRequest",
    "ConfigurationError",
    "ConflictError",
    "Engine",
    "GatewayError",
    "GatewayTimeout",
    "IntegrityError",
    "KnowledgeStore",
    "MeetingConfig",
    "MeetingEvent",
    "MeetingMinutes",
    "MeetingRecord",
    "MemoryStore",
    "NotFoundError",
    "OllamaGateway",
    "ProjectRecord",
    "ProtocolError",
    "ScriptError",
    "ScriptedGateway",
    "SessionMemory",
    "StateError",
    "Store",
    "ThinkTankError",
    "ValidationError",
    "add_expert",
    "adaptive_filter",
    "append_turn",
    "chunk_text",
    "create_project",
    "normalize_text",
    "session_context",
    "validate_meeting_config",
]
