"""Binary embedding cache with random access by document id.

Layout (all integers little-endian):

    magic  b"DSIC"
    u16    container version (1)
    header JSON line (model_id, layer_indices, hidden_dim, document_count,
           format_version) terminated by \\n
    per document:
        u32 doc-id byte length, doc-id UTF-8 bytes
        u32 sentence count
        per sentence, per layer (header layer order):
            u32 token_count
            token_count * hidden_dim float32 values, row-major
    footer JSON: {doc_id: block byte offset}
    u64    footer byte offset

Writes are byte-deterministic for identical inputs: canonical JSON, no
timestamps.  Reads are safe from concurrent threads (each read opens the
file independently).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embedding import ProviderSpec, SentenceEmbeddings
from .errors import CacheSpecMismatch, CorruptCache, DocumentNotFound

MAGIC = b"DSIC"
VERSION = 1


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_cache(
    path: str | Path,
    docs: Iterable[tuple[str, Sequence[SentenceEmbeddings]]],
    spec: ProviderSpec,
) -> int:
    """Write documents to a cache file; returns the document count."""
    docs = list(docs)
    header = {
        "format_version": VERSION,
        "model_id": spec.model_id,
        "layer_indices": list(spec.layer_indices),
        "hidden_dim": spec.hidden_dim,
        "document_count": len(docs),
    }
    index: dict[str, int] = {}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(_canonical_json(header) + b"\n")
        for doc_id, sentences in docs:
            if doc_id in index:
                raise ValueError(f"duplicate doc_id in cache write: {doc_id}")
            index[doc_id] = fh.tell()
            id_bytes = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", len(sentences)))
            for emb in sentences:
                for layer in spec.layer_indices:
                    matrix = np.ascontiguousarray(emb.per_layer[layer], dtype="<f4")
                    if matrix.ndim != 2 or matrix.shape[1] != spec.hidden_dim:
                        raise ValueError(
                            f"doc {doc_id}: layer {layer} has shape {matrix.shape}, "
                            f"expected (*, {spec.hidden_dim})"
                        )
                    fh.write(struct.pack("<I", matrix.shape[0]))
                    fh.write(matrix.tobytes())
        footer_offset = fh.tell()
        fh.write(_canonical_json(index))
        fh.write(struct.pack("<Q", footer_offset))
    return len(docs)


class CacheReader:
    """Random-access reader; header and index are parsed once."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            with open(self.path, "rb") as fh:
                magic = fh.read(4)
                if magic != MAGIC:
                    raise CorruptCache(f"{self.path}: bad magic {magic!r}")
                (version,) = struct.unpack("<H", _read_exact(fh, 2))
                if version != VERSION:
                    raise CorruptCache(f"{self.path}: unsupported version {version}")
                header_line = fh.readline()
                if not header_line.endswith(b"\n"):
                    raise CorruptCache(f"{self.path}: truncated header")
                self.header: dict = json.loads(header_line)
                fh.seek(-8, 2)
                (footer_offset,) = struct.unpack("<Q", _read_exact(fh, 8))
                end = fh.seek(0, 2)
                if footer_offset >= end - 8:
                    raise CorruptCache(f"{self.path}: footer offset out of range")
                fh.seek(footer_offset)
                self.index: dict[str, int] = json.loads(
                    _read_exact(fh, end - 8 - footer_offset)
                )
        except (struct.error, json.JSONDecodeError, OSError) as exc:
            raise CorruptCache(f"{self.path}: {exc}") from exc
        if len(self.index) != self.header.get("document_count"):
            raise CorruptCache(
                f"{self.path}: index has {len(self.index)} entries, header claims "
                f"{self.header.get('document_count')}"
            )

    @property
    def doc_ids(self) -> list[str]:
        return list(self.index)

    def read_document(self, doc_id: str) -> list[SentenceEmbeddings]:
        if doc_id not in self.index:
            raise DocumentNotFound(f"doc_id not in cache: {doc_id}")
        layers = [int(k) for k in self.header["layer_indices"]]
        hidden_dim = int(self.header["hidden_dim"])
        try:
            with open(self.path, "rb") as fh:
                fh.seek(self.index[doc_id])
                (id_len,) = struct.unpack("<I", _read_exact(fh, 4))
                stored_id = _read_exact(fh, id_len).decode("utf-8")
                if stored_id != doc_id:
                    raise CorruptCache(
                        f"{self.path}: index points at {stored_id!r}, wanted {doc_id!r}"
                    )
                (n_sentences,) = struct.unpack("<I", _read_exact(fh, 4))
                out = []
                for i in range(n_sentences):
                    per_layer = {}
                    for layer in layers:
                        (token_count,) = struct.unpack("<I", _read_exact(fh, 4))
                        raw = _read_exact(fh, token_count * hidden_dim * 4)
                        per_layer[layer] = np.frombuffer(raw, dtype="<f4").reshape(
                            token_count, hidden_dim
                        )
                    out.append(SentenceEmbeddings(sentence_index=i, per_layer=per_layer))
                return out
        except (struct.error, OSError) as exc:
            raise CorruptCache(f"{self.path}: {exc}") from exc


def read_cache(
    path: str | Path, doc_id: str, spec: ProviderSpec | None = None
) -> list[SentenceEmbeddings]:
    """One-shot read of a single document, with optional spec verification."""
    reader = CacheReader(path)
    if spec is not None:
        header = reader.header
        if (
            header["model_id"] != spec.model_id
            or tuple(header["layer_indices"]) != spec.layer_indices
            or header["hidden_dim"] != spec.hidden_dim
        ):
            raise CacheSpecMismatch(
                f"cache header does not match requested spec for {path}"
            )
    return reader.read_document(doc_id)


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptCache("unexpected end of file")
    return data
