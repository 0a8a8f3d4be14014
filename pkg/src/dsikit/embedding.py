"""Per-sentence, per-layer token embeddings from interchangeable providers.

Three providers satisfy one contract: a deterministic synthetic source
(counter-based hashing, no model inference), a binary cache reader, and
a remote sidecar client.  All return float32 matrices of shape
``token_count x hidden_dim`` per requested layer, free of NaN/Inf, in
sentence order.  Scoring code cannot tell them apart except by values.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
import requests

from .errors import CacheSpecMismatch, IntegrityError, TransportError
from .wordpiece import TokenizedSentence

DEFAULT_LAYERS = (6, 7)

# splitmix64 constants; all arithmetic is modulo 2**64.
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STREAM2 = np.uint64(0xD6E8FEB86659FD93)


@dataclass
class ProviderSpec:
    """Declarative description of an embedding source."""

    kind: str  # synthetic | cache | sidecar
    model_id: str = "synthetic"
    layer_indices: tuple[int, ...] = DEFAULT_LAYERS
    hidden_dim: int = 32
    endpoint_or_path: str = ""
    seed: int = 0

    def __post_init__(self):
        self.layer_indices = tuple(int(i) for i in self.layer_indices)
        if self.kind not in ("synthetic", "cache", "sidecar"):
            raise ValueError(f"unknown provider kind: {self.kind!r}")
        if not self.layer_indices:
            raise ValueError("layer_indices must be non-empty")
        if any(b <= a for a, b in zip(self.layer_indices, self.layer_indices[1:])):
            raise ValueError("layer_indices must be strictly increasing")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")


@dataclass
class SentenceEmbeddings:
    """Token-embedding matrices for one sentence, keyed by layer index."""

    sentence_index: int
    per_layer: dict[int, np.ndarray] = dc_field(default_factory=dict)

    @property
    def token_count(self) -> int:
        return next(iter(self.per_layer.values())).shape[0]


def _mix(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays."""
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def _u64(value: int) -> np.uint64:
    return np.uint64(value & 0xFFFFFFFFFFFFFFFF)


def synthetic_embed(
    token_ids: Sequence[int], layer_index: int, seed: int, hidden_dim: int
) -> np.ndarray:
    """Deterministic standard-normal token embeddings.

    Entry ``(t, d)`` depends only on ``(seed, token_ids[t], t,
    layer_index, d)`` through 64-bit integer hashing plus Box-Muller, so
    results are bit-identical across platforms and runs.
    """
    if hidden_dim < 1:
        raise ValueError("hidden_dim must be >= 1")
    tokens = np.asarray(token_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(_u64(seed) + _GAMMA)
        h = _mix(h ^ (tokens + _GAMMA))
        positions = np.arange(len(tokens), dtype=np.uint64)
        h = _mix(h ^ (positions * _MIX1 + _GAMMA))
        h = _mix(h ^ (_u64(layer_index) * _MIX2 + _GAMMA))

        dims = np.arange(hidden_dim, dtype=np.uint64)
        keys = _mix(h[:, None] ^ (dims[None, :] * _GAMMA + np.uint64(1)))
        keys2 = _mix(keys ^ _STREAM2)

    # 53-bit mantissa uniforms; u1 in (0, 1] keeps the log finite.
    u1 = ((keys >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (keys2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    normal = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return normal.astype(np.float32)


def _validate_document(
    doc: Sequence[TokenizedSentence],
    results: Sequence[SentenceEmbeddings],
    layer_indices: Sequence[int],
    hidden_dim: int,
) -> None:
    if len(results) != len(doc):
        raise IntegrityError(
            f"provider returned {len(results)} sentences for {len(doc)} inputs"
        )
    for i, (sent, emb) in enumerate(zip(doc, results)):
        for layer in layer_indices:
            matrix = emb.per_layer.get(layer)
            if matrix is None:
                raise IntegrityError(f"sentence {i}: layer {layer} missing")
            expected = (len(sent.ids), hidden_dim)
            if matrix.shape != expected:
                raise IntegrityError(
                    f"sentence {i}: layer {layer} shape {matrix.shape}, "
                    f"expected {expected}"
                )
            if not np.all(np.isfinite(matrix)):
                raise IntegrityError(f"sentence {i}: layer {layer} contains NaN/Inf")


class SyntheticProvider:
    """Stateless deterministic provider; a stand-in for model inference."""

    def __init__(self, spec: ProviderSpec):
        if spec.kind != "synthetic":
            raise ValueError("spec.kind must be 'synthetic'")
        self.spec = spec
        self.model_id = spec.model_id
        self.hidden_dim = spec.hidden_dim
        self.layer_indices = spec.layer_indices

    def embed_document(
        self, doc: Sequence[TokenizedSentence], doc_id: Optional[str] = None
    ) -> list[SentenceEmbeddings]:
        if not doc:
            raise ValueError("document has no sentences")
        results = []
        for i, sent in enumerate(doc):
            per_layer = {
                layer: synthetic_embed(sent.ids, layer, self.spec.seed, self.hidden_dim)
                for layer in self.layer_indices
            }
            results.append(SentenceEmbeddings(sentence_index=i, per_layer=per_layer))
        _validate_document(doc, results, self.layer_indices, self.hidden_dim)
        return results


class CacheProvider:
    """Serves embeddings from a previously written cache file."""

    def __init__(self, spec: ProviderSpec):
        from .cache import CacheReader  # local import to avoid a cycle

        if spec.kind != "cache":
            raise ValueError("spec.kind must be 'cache'")
        self.spec = spec
        self.reader = CacheReader(spec.endpoint_or_path)
        header = self.reader.header
        if (
            header["model_id"] != spec.model_id
            or tuple(header["layer_indices"]) != spec.layer_indices
            or header["hidden_dim"] != spec.hidden_dim
        ):
            raise CacheSpecMismatch(
                f"cache header {header['model_id']}/layers "
                f"{header['layer_indices']}/dim {header['hidden_dim']} does not "
                f"match spec {spec.model_id}/layers {list(spec.layer_indices)}"
                f"/dim {spec.hidden_dim}"
            )
        self.model_id = spec.model_id
        self.hidden_dim = spec.hidden_dim
        self.layer_indices = spec.layer_indices

    def embed_document(
        self, doc: Sequence[TokenizedSentence], doc_id: Optional[str] = None
    ) -> list[SentenceEmbeddings]:
        if doc_id is None:
            raise ValueError("cache provider requires doc_id")
        results = self.reader.read_document(doc_id)
        _validate_document(doc, results, self.layer_indices, self.hidden_dim)
        return results


class SidecarProvider:
    """HTTP client for the embedding sidecar service.

    Layer indexing convention (enforced server-side and relied on here):
    index 0 is the pre-encoder embedding output and index k>0 is encoder
    block k's output.
    """

    def __init__(self, spec: ProviderSpec, timeout: float = 60.0,
                 session: Optional[requests.Session] = None):
        if spec.kind != "sidecar":
            raise ValueError("spec.kind must be 'sidecar'")
        self.spec = spec
        self.base_url = spec.endpoint_or_path.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()
        self.model_id = spec.model_id
        self.hidden_dim = spec.hidden_dim
        self.layer_indices = spec.layer_indices

    def embed_document(
        self, doc: Sequence[TokenizedSentence], doc_id: Optional[str] = None
    ) -> list[SentenceEmbeddings]:
        payload = {
            "model_id": self.spec.model_id,
            "layer_indices": list(self.spec.layer_indices),
            "sentences": [sent.ids for sent in doc],
        }
        try:
            resp = self.session.post(
                f"{self.base_url}/embed", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"sidecar unreachable: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"sidecar error {resp.status_code}: {resp.text[:200]}")
        if resp.status_code != 200:
            raise IntegrityError(
                f"sidecar rejected request ({resp.status_code}): {resp.text[:200]}"
            )
        body = resp.json()
        hidden_dim = int(body["hidden_dim"])
        if hidden_dim != self.spec.hidden_dim:
            raise IntegrityError(
                f"sidecar hidden_dim {hidden_dim} != spec {self.spec.hidden_dim}"
            )
        results = []
        for i, entry in enumerate(body["results"]):
            per_layer = {}
            for layer in self.spec.layer_indices:
                block = entry["layers"][str(layer)]
                token_count = int(block["token_count"])
                if body.get("encoding", "base64") == "base64":
                    raw = base64.b64decode(block["data"])
                    matrix = np.frombuffer(raw, dtype="<f4").reshape(
                        token_count, hidden_dim
                    )
                else:
                    matrix = np.asarray(block["data"], dtype=np.float32)
                per_layer[layer] = matrix
            results.append(SentenceEmbeddings(sentence_index=i, per_layer=per_layer))
        _validate_document(doc, results, self.spec.layer_indices, self.spec.hidden_dim)
        return results


def make_provider(spec: ProviderSpec):
    """Instantiate the provider described by a spec."""
    if spec.kind == "synthetic":
        return SyntheticProvider(spec)
    if spec.kind == "cache":
        return CacheProvider(spec)
    return SidecarProvider(spec)


def embed_document(provider, doc: Sequence[TokenizedSentence],
                   doc_id: Optional[str] = None) -> list[SentenceEmbeddings]:
    """Provider-agnostic entry point with the shared shape/NaN contract."""
    return provider.embed_document(doc, doc_id=doc_id)
