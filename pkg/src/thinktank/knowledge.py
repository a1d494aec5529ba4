"""RAG subsystem: chunking, ingestion, exact top-k retrieval, adaptive filtering.

A knowledge base is a directory holding a manifest, a chunk table and a
document table (both JSONL), and a packed float32 vector file. Readers trust
only what the manifest has committed; ingestion appends rows first and
commits the manifest last (atomic temp+rename), so an aborted ingest never
changes what retrieval sees.
"""

from __future__ import annotations

import fcntl
import json
import logging
import math
import re
import unicodedata
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError, IntegrityError, NotFoundError, ValidationError
from .gateway import EmbeddingVector, Gateway
from .ids import Clock, IdFactory, default_clock, default_ids
from .model import DocumentRef, MEDIA_KINDS
from . import vectors

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 200
DEFAULT_K = 5

_WS_RUN = re.compile(r"\s+")


@dataclass
class ChunkRecord:
    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    char_span: tuple[int, int]
    embedding: EmbeddingVector | None = None


@dataclass
class ScoredChunk:
    chunk: ChunkRecord
    score: float


def normalize_text(raw: str) -> str:
    """Collapse whitespace runs to single spaces and drop control characters.

    Applied before chunking so char spans are stable across platforms and
    source formats.
    """
    text = _WS_RUN.sub(" ", raw)
    text = "".join(ch for ch in text if unicodedata.category(ch) != "Cc")
    return text.strip()


def chunk_text(text: str, chunk_size: int, overlap: int) -> list[tuple[tuple[int, int], str]]:
    """Split text into overlapping chunks on a fixed stride.

    Chunks start at multiples of ``stride = chunk_size - overlap`` while the
    start lies inside the text; each covers ``[start, min(start+chunk_size,
    len))``. Reassembling the chunks with overlaps removed reproduces the
    input exactly (see ``reassemble``).
    """
    if overlap < 0:
        raise ValidationError("overlap must be ≥ 0")
    if chunk_size <= overlap:
        raise ValidationError("chunk_size must exceed overlap")
    if not text:
        raise ValidationError("cannot chunk empty text")
    stride = chunk_size - overlap
    chunks = []
    for start in range(0, len(text), stride):
        end = min(start + chunk_size, len(text))
        chunks.append(((start, end), text[start:end]))
    return chunks


def reassemble(chunks: list[tuple[tuple[int, int], str]]) -> str:
    """Concatenate chunks with overlaps removed, using their spans."""
    out: list[str] = []
    covered = 0
    for (start, end), text in chunks:
        if end <= covered:
            continue
        out.append(text[covered - start :] if start < covered else text)
        covered = end
    return "".join(out)


def adaptive_filter(results: list[ScoredChunk]) -> list[ScoredChunk]:
    """Keep results scoring at or above the mean of the input scores.

    The input must already be sorted by score descending. When every score
    is equal the whole input is kept (the mean equals the score exactly in
    real arithmetic, so the float mean is bypassed). Should rounding ever
    leave the threshold above the top score, the top result alone is kept.
    """
    if not results:
        return []
    scores = [r.score for r in results]
    if max(scores) == min(scores):
        return list(results)
    mean = math.fsum(scores) / len(scores)
    kept = [r for r in results if r.score >= mean]
    if not kept:
        kept = [results[0]]
    return kept


class KnowledgeStore:
    """Per-project knowledge bases rooted at one directory."""

    def __init__(
        self,
        root: Path | str,
        gateway: Gateway,
        *,
        ids: IdFactory | None = None,
        clock: Clock | None = None,
    ):
        self.root = Path(root)
        self.gateway = gateway
        self.ids = ids or default_ids()
        self.clock = clock or default_clock()

    # -- base management -------------------------------------------------

    def create_base(
        self,
        kb_id: str | None = None,
        *,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap: int = DEFAULT_OVERLAP,
    ) -> str:
        if overlap < 0 or chunk_size <= overlap:
            raise ValidationError("chunk_size must exceed overlap ≥ 0")
        kb_id = kb_id or self.ids.new("kb")
        base = self.root / kb_id
        if base.exists():
            raise ValidationError(f"knowledge base {kb_id!r} already exists")
        base.mkdir(parents=True)
        manifest = {
            "kb_id": kb_id,
            "dim": None,
            "chunk_size": chunk_size,
            "overlap": overlap,
            "doc_count": 0,
            "chunk_count": 0,
            "chunks_bytes": 0,
            "docs_bytes": 0,
            "vectors_bytes": 0,
        }
        self._write_manifest(base, manifest)
        return kb_id

    def has_base(self, kb_id: str) -> bool:
        return (self.root / kb_id / "manifest.json").exists()

    def bases(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "manifest.json").exists())

    def _manifest(self, kb_id: str) -> dict:
        path = self.root / kb_id / "manifest.json"
        if not path.exists():
            raise NotFoundError(f"unknown knowledge base {kb_id!r}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise IntegrityError(f"corrupt knowledge base manifest {path}") from exc

    @staticmethod
    def _write_manifest(base: Path, manifest: dict) -> None:
        tmp = base / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(base / "manifest.json")

    # -- ingestion -------------------------------------------------------

    @contextmanager
    def _ingest_lock(self, kb_id: str):
        """Advisory single-writer lock per knowledge base; readers never block."""
        lock_path = self.root / kb_id / "lock"
        with open(lock_path, "a+") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    def ingest_document(
        self, kb_id: str, source_name: str, raw_text: str, media: str = "plain_text"
    ) -> tuple[DocumentRef, int]:
        """Chunk, embed, index, and commit one document atomically.

        Embedding failures and dimension mismatches abort before anything is
        committed: the manifest (and therefore retrieval) is untouched.
        """
        if not self.has_base(kb_id):
            raise NotFoundError(f"unknown knowledge base {kb_id!r}")
        with self._ingest_lock(kb_id):
            return self._ingest_locked(kb_id, source_name, raw_text, media)

    def _ingest_locked(
        self, kb_id: str, source_name: str, raw_text: str, media: str
    ) -> tuple[DocumentRef, int]:
        manifest = self._manifest(kb_id)
        if media not in MEDIA_KINDS:
            raise ValidationError(f"media must be one of {MEDIA_KINDS}")
        text = normalize_text(raw_text)
        if not text:
            raise ValidationError("document is empty after whitespace normalization")

        chunks = chunk_text(text, manifest["chunk_size"], manifest["overlap"])
        embeddings = self.gateway.embed([body for _, body in chunks])
        dims = {v.dim for v in embeddings}
        if len(dims) != 1:
            raise ConfigurationError(f"embedding dims inconsistent within document: {sorted(dims)}")
        dim = dims.pop()
        if manifest["dim"] is not None and manifest["dim"] != dim:
            raise ConfigurationError(
                f"embedding dim {dim} does not match knowledge base dim {manifest['dim']}"
            )

        base = self.root / kb_id
        chunks_path = base / "chunks.jsonl"
        docs_path = base / "docs.jsonl"
        vec_path = base / "vectors.vec"
        # Drop any uncommitted tail from a previously aborted ingest.
        _truncate_file(chunks_path, manifest["chunks_bytes"])
        _truncate_file(docs_path, manifest["docs_bytes"])
        vectors.truncate_to(vec_path, manifest["vectors_bytes"])

        doc_id = self.ids.new("doc")
        ref = DocumentRef(
            doc_id=doc_id,
            knowledge_base_id=kb_id,
            source_name=source_name,
            media=media,
            char_count=len(text),
            ingested_at=self.clock.now_iso(),
        )
        chunk_lines = []
        for ordinal, ((start, end), body) in enumerate(chunks):
            chunk_lines.append(
                json.dumps(
                    {
                        "chunk_id": self.ids.new("chunk"),
                        "doc_id": doc_id,
                        "ordinal": ordinal,
                        "start": start,
                        "end": end,
                        "text": body,
                    },
                    ensure_ascii=False,
                )
            )
        with open(chunks_path, "a", encoding="utf-8") as fh:
            for line in chunk_lines:
                fh.write(line + "\n")
        with open(docs_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(ref.to_dict(), ensure_ascii=False) + "\n")
        vectors.append_rows(vec_path, [list(v.values) for v in embeddings])

        manifest["dim"] = dim
        manifest["doc_count"] += 1
        manifest["chunk_count"] += len(chunks)
        manifest["chunks_bytes"] = chunks_path.stat().st_size
        manifest["docs_bytes"] = docs_path.stat().st_size
        manifest["vectors_bytes"] = vec_path.stat().st_size
        self._write_manifest(base, manifest)
        logger.info("ingested %s into %s: %d chunks", source_name, kb_id, len(chunks))
        return ref, len(chunks)

    # -- reads -----------------------------------------------------------

    def documents(self, kb_id: str) -> list[DocumentRef]:
        manifest = self._manifest(kb_id)
        path = self.root / kb_id / "docs.jsonl"
        refs = []
        for line in _committed_lines(path, manifest["docs_bytes"]):
            refs.append(DocumentRef.from_dict(json.loads(line)))
        return refs

    def chunk_count(self, kb_id: str) -> int:
        return int(self._manifest(kb_id)["chunk_count"])

    def chunks(self, kb_id: str, with_embeddings: bool = False) -> list[ChunkRecord]:
        """All committed chunks in insertion order."""
        manifest = self._manifest(kb_id)
        base = self.root / kb_id
        records = self._chunk_records(base, manifest)
        if with_embeddings and records:
            matrix = vectors.read_matrix(base / "vectors.vec", manifest["dim"], len(records))
            for row, record in zip(matrix, records):
                record.embedding = EmbeddingVector(tuple(float(v) for v in row), manifest["dim"])
        return records

    @staticmethod
    def _chunk_records(base: Path, manifest: dict) -> list[ChunkRecord]:
        records = []
        for line in _committed_lines(base / "chunks.jsonl", manifest["chunks_bytes"]):
            data = json.loads(line)
            records.append(
                ChunkRecord(
                    chunk_id=data["chunk_id"],
                    doc_id=data["doc_id"],
                    ordinal=data["ordinal"],
                    text=data["text"],
                    char_span=(data["start"], data["end"]),
                )
            )
        if len(records) != manifest["chunk_count"]:
            raise IntegrityError(
                f"chunk table holds {len(records)} rows, manifest committed {manifest['chunk_count']}"
            )
        return records

    def retrieve(self, kb_id: str, query: str, k: int = DEFAULT_K) -> list[ScoredChunk]:
        """Exact top-k by cosine similarity, ties broken by (doc_id, ordinal)."""
        if not query:
            raise ValidationError("query must be non-empty")
        if k < 1:
            raise ValidationError("k must be ≥ 1")
        manifest = self._manifest(kb_id)
        if manifest["chunk_count"] == 0:
            return []
        base = self.root / kb_id
        records = self._chunk_records(base, manifest)
        matrix = vectors.read_matrix(base / "vectors.vec", manifest["dim"], len(records))
        query_vec = self.gateway.embed([query])[0]
        if query_vec.dim != manifest["dim"]:
            raise ConfigurationError(
                f"query embedding dim {query_vec.dim} does not match knowledge base dim {manifest['dim']}"
            )
        scores = vectors.cosine_scores(matrix, query_vec.values)
        order = sorted(
            range(len(records)),
            key=lambda i: (-scores[i], records[i].doc_id, records[i].ordinal),
        )[:k]
        results = []
        for i in order:
            record = records[i]
            record.embedding = EmbeddingVector(tuple(float(v) for v in matrix[i]), manifest["dim"])
            results.append(ScoredChunk(chunk=record, score=float(scores[i])))
        return results


def _truncate_file(path: Path, byte_count: int) -> None:
    if path.exists() and path.stat().st_size > byte_count:
        with open(path, "r+b") as fh:
            fh.truncate(byte_count)


def _committed_lines(path: Path, byte_count: int):
    if byte_count == 0 or not path.exists():
        return
    data = path.read_bytes()[:byte_count]
    for line in data.decode("utf-8").splitlines():
        if line:
            yield line
