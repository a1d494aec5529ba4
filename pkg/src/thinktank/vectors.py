"""Packed vector file helpers and exact cosine scoring.

Vectors are persisted as little-endian 32-bit floats, row-major, one row per
record. Scores are computed in float64 over the stored float32 values so a
brute-force oracle over the same values agrees to well under 1e-6.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import IntegrityError


def append_rows(path: Path, rows: list) -> None:
    """Append embedding rows (any float sequences) to a packed .vec file."""
    arr = np.asarray(rows, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("expected a list of equal-length rows")
    with open(path, "ab") as fh:
        fh.write(arr.tobytes(order="C"))
        fh.flush()


def read_matrix(path: Path, dim: int, count: int) -> np.ndarray:
    """Read the first ``count`` committed rows of a packed .vec file."""
    if count == 0:
        return np.empty((0, dim), dtype="<f4")
    expected = count * dim * 4
    data = path.read_bytes()
    if len(data) < expected:
        raise IntegrityError(f"vector file {path} holds {len(data)} bytes, manifest requires {expected}")
    arr = np.frombuffer(data[:expected], dtype="<f4")
    return arr.reshape(count, dim)


def truncate_to(path: Path, byte_count: int) -> None:
    """Drop any uncommitted tail left behind by an aborted append."""
    if path.exists() and path.stat().st_size > byte_count:
        with open(path, "r+b") as fh:
            fh.truncate(byte_count)


def cosine_scores(matrix: np.ndarray, query) -> np.ndarray:
    """Cosine similarity of every row against the query, in float64.

    Zero-norm rows or a zero-norm query score 0.0 rather than NaN.
    """
    mat = np.asarray(matrix, dtype=np.float64)
    q = np.asarray(query, dtype=np.float64)
    if mat.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    row_norms = np.linalg.norm(mat, axis=1)
    q_norm = np.linalg.norm(q)
    dots = mat @ q
    denom = row_norms * q_norm
    scores = np.zeros(mat.shape[0], dtype=np.float64)
    nonzero = denom > 0.0
    scores[nonzero] = dots[nonzero] / denom[nonzero]
    return scores
