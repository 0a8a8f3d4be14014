"""Divergent semantic integration scores over sentence embeddings.

A document's score is the arithmetic mean of pairwise cosine distances
between its sentences' hidden-layer representations.  With layer set L
and n sentences, every unordered sentence pair (i < j) contributes one
distance per ordered layer combination (k1, k2) in L x L, giving
|L|^2 * n(n-1)/2 distances.  Two sentence representations are supported:

* ``pooled`` — each sentence is the mean of its token embeddings per
  layer (one vector per sentence per layer);
* ``token_pairs`` — a pair's contribution per layer combination is the
  mean cosine distance over all cross-sentence token pairs, and the
  score is the unweighted mean of those contributions.

Both a naive reference path and a blocked matrix path are provided; the
blocked path normalizes each vector once and evaluates whole Gram
matrices, with identical accumulation semantics (64-bit throughout).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Optional, Sequence

import numpy as np

from .embedding import SentenceEmbeddings
from .errors import (
    DimensionError,
    DocumentTooShort,
    ProviderFailure,
    TransportError,
    ZeroNormError,
)

MODES = ("pooled", "token_pairs")
ENGINES = ("reference", "blocked")


@dataclass
class DsiConfig:
    """Scoring parameters; accumulation is always 64-bit."""

    mode: str = "pooled"
    layer_indices: tuple[int, ...] = (6, 7)
    min_sentences: int = 3
    engine: str = "blocked"

    def __post_init__(self):
        self.layer_indices = tuple(int(i) for i in self.layer_indices)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.min_sentences < 2:
            raise ValueError("min_sentences must be >= 2")
        if self.min_sentences == 2:
            warnings.warn(
                "min_sentences=2 scores two-sentence documents; such scores "
                "rest on a single sentence pair",
                stacklevel=2,
            )
        if not self.layer_indices:
            raise ValueError("layer_indices must be non-empty")


@dataclass
class DsiScore:
    """A score plus the provenance needed to interpret it."""

    value: float
    n_sentences: int
    n_distances: int
    mode: str
    model_id: str = ""
    truncated_any: bool = False


def cosine_distance(v1: np.ndarray, v2: np.ndarray) -> float:
    """1 - cos(v1, v2) with 64-bit accumulation; range [0, 2].

    The cosine ratio is clamped to [-1, 1] before subtraction, so
    floating-point noise can never push a distance outside its range.
    """
    a = np.asarray(v1, dtype=np.float64).ravel()
    b = np.asarray(v2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"vector dimensions differ: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine distance undefined for zero-norm vector")
    cos = float(np.dot(a, b)) / (na * nb)
    cos = max(-1.0, min(1.0, cos))
    return 1.0 - cos


def pool_sentence(emb: SentenceEmbeddings, layer: int) -> np.ndarray:
    """Mean over token rows for one layer, as float64."""
    matrix = emb.per_layer[layer]
    if matrix.shape[0] < 1:
        raise ValueError("cannot pool an empty token matrix")
    return matrix.astype(np.float64).mean(axis=0)


def _pooled_matrix(doc: Sequence[SentenceEmbeddings], layer: int) -> np.ndarray:
    return np.stack([pool_sentence(emb, layer) for emb in doc])


def _normalize_rows(matrix: np.ndarray, what: str) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise ZeroNormError(f"zero-norm vector for {what} {bad.tolist()}")
    return matrix / norms[:, None]


def _pair_count(n: int, n_layers: int) -> int:
    return n_layers * n_layers * (n * (n - 1)) // 2


def _dsi_pooled_reference(doc, layers) -> float:
    pooled = {k: _pooled_matrix(doc, k) for k in layers}
    for k in layers:
        norms = np.sqrt(np.einsum("ij,ij->i", pooled[k], pooled[k]))
        bad = np.nonzero(norms == 0.0)[0]
        if bad.size:
            raise ZeroNormError(f"zero-norm pooled vector for sentence {bad.tolist()}")
    n = len(doc)
    distances = [
        cosine_distance(pooled[k1][i], pooled[k2][j])
        for i, j in combinations(range(n), 2)
        for k1, k2 in product(layers, repeat=2)
    ]
    # fsum is exactly rounded, so the result is independent of pair order.
    return math.fsum(distances) / _pair_count(n, len(layers))


def _dsi_pooled_blocked(doc, layers) -> float:
    normed = {
        k: _normalize_rows(_pooled_matrix(doc, k), "pooled sentence") for k in layers
    }
    n = len(doc)
    iu, ju = np.triu_indices(n, k=1)
    parts = []
    for k1, k2 in product(layers, repeat=2):
        gram = np.clip(normed[k1] @ normed[k2].T, -1.0, 1.0)
        parts.append(1.0 - gram[iu, ju])
    return math.fsum(np.concatenate(parts).tolist()) / _pair_count(n, len(layers))


def _dsi_token_pairs_reference(doc, layers) -> float:
    mats = {
        (i, k): emb.per_layer[k].astype(np.float64)
        for i, emb in enumerate(doc)
        for k in layers
    }
    contributions = []
    for i, j in combinations(range(len(doc)), 2):
        for k1, k2 in product(layers, repeat=2):
            a, b = mats[(i, k1)], mats[(j, k2)]
            pair = [
                cosine_distance(a[t1], b[t2])
                for t1 in range(a.shape[0])
                for t2 in range(b.shape[0])
            ]
            contributions.append(math.fsum(pair) / len(pair))
    return math.fsum(contributions) / len(contributions)


def _dsi_token_pairs_blocked(doc, layers) -> float:
    normed = {}
    for i, emb in enumerate(doc):
        for k in layers:
            normed[(i, k)] = _normalize_rows(
                emb.per_layer[k].astype(np.float64), f"sentence {i} token"
            )
    contributions = []
    for i, j in combinations(range(len(doc)), 2):
        for k1, k2 in product(layers, repeat=2):
            gram = np.clip(normed[(i, k1)] @ normed[(j, k2)].T, -1.0, 1.0)
            contributions.append(float(np.mean(1.0 - gram)))
    return math.fsum(contributions) / len(contributions)


_ENGINES: dict[tuple[str, str], Callable] = {
    ("pooled", "reference"): _dsi_pooled_reference,
    ("pooled", "blocked"): _dsi_pooled_blocked,
    ("token_pairs", "reference"): _dsi_token_pairs_reference,
    ("token_pairs", "blocked"): _dsi_token_pairs_blocked,
}


def dsi_multilayer(
    doc: Sequence[SentenceEmbeddings],
    config: DsiConfig,
    model_id: str = "",
    truncated_any: bool = False,
) -> DsiScore:
    """Score one document; n_sentences below the minimum raises."""
    n = len(doc)
    if n < config.min_sentences:
        raise DocumentTooShort(n, config.min_sentences)
    value = _ENGINES[(config.mode, config.engine)](doc, config.layer_indices)
    return DsiScore(
        value=value,
        n_sentences=n,
        n_distances=_pair_count(n, len(config.layer_indices)),
        mode=config.mode,
        model_id=model_id,
        truncated_any=truncated_any,
    )


def dsi_single_vector(
    vectors: Sequence[np.ndarray], min_sentences: int = 3, model_id: str = ""
) -> DsiScore:
    """Mean pairwise cosine distance over one vector per sentence.

    Covers providers that expose only a single output embedding per text
    (no hidden-layer access); n(n-1)/2 distances in total.
    """
    n = len(vectors)
    if n < min_sentences:
        raise DocumentTooShort(n, min_sentences)
    matrix = np.stack([np.asarray(v, dtype=np.float64).ravel() for v in vectors])
    if matrix.ndim != 2:
        raise DimensionError("sentence vectors must share one dimension")
    normed = _normalize_rows(matrix, "sentence vector")
    iu, ju = np.triu_indices(n, k=1)
    gram = np.clip(normed @ normed.T, -1.0, 1.0)
    total = float(np.sum(1.0 - gram[iu, ju]))
    count = n * (n - 1) // 2
    return DsiScore(
        value=total / count,
        n_sentences=n,
        n_distances=count,
        mode="single_vector",
        model_id=model_id,
    )


@dataclass
class BatchRow:
    """Per-document outcome of a batch run; score xor error."""

    record_id: str
    score: Optional[DsiScore] = None
    error: Optional[str] = None


def _score_one(item, provider, config) -> BatchRow:
    record_id, sentences = item
    try:
        truncated_any = any(s.truncated for s in sentences)
        attempts = 0
        while True:
            try:
                embedded = provider.embed_document(sentences, doc_id=record_id)
                break
            except TransportError:
                attempts += 1
                if attempts >= 3:
                    raise
        score = dsi_multilayer(
            embedded, config, model_id=provider.model_id, truncated_any=truncated_any
        )
        return BatchRow(record_id=record_id, score=score)
    except TransportError as exc:
        return BatchRow(record_id=record_id, error=f"transport: {exc}")
    except Exception as exc:  # per-document failures never stop the batch
        return BatchRow(record_id=record_id, error=f"{type(exc).__name__}: {exc}")


def dsi_batch(
    docs: Sequence[tuple[str, Sequence]],
    provider,
    config: DsiConfig,
    parallelism: int = 1,
    systemic_threshold: int = 5,
) -> list[BatchRow]:
    """Score many documents; output order equals input order.

    Per-document failures are recorded in their row and the batch
    continues.  A run of ``systemic_threshold`` consecutive transport
    failures aborts with ProviderFailure carrying the rows so far.
    """
    rows: list[BatchRow] = []
    consecutive_transport = 0

    def _account(row: BatchRow):
        nonlocal consecutive_transport
        rows.append(row)
        if row.error and row.error.startswith("transport:"):
            consecutive_transport += 1
            if consecutive_transport >= systemic_threshold:
                raise ProviderFailure(
                    f"{consecutive_transport} consecutive transport failures",
                    partial_rows=rows,
                )
        else:
            consecutive_transport = 0

    if parallelism <= 1:
        for item in docs:
            _account(_score_one(item, provider, config))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for row in pool.map(lambda it: _score_one(it, provider, config), docs):
                _account(row)
    return rows


def backend_equivalence(
    embedded_docs: Sequence[Sequence[SentenceEmbeddings]],
    config: DsiConfig,
    engine_a: str | Callable = "reference",
    engine_b: str | Callable = "blocked",
) -> float:
    """Max absolute score difference between two computation paths.

    Engines may be the built-in names or callables taking
    ``(doc, config)`` and returning a DsiScore, which lets tests insert
    a deliberately perturbed path.
    """

    def _run(engine, doc):
        if callable(engine):
            return engine(doc, config).value
        cfg = DsiConfig(
            mode=config.mode,
            layer_indices=config.layer_indices,
            min_sentences=config.min_sentences,
            engine=engine,
        )
        return dsi_multilayer(doc, cfg).value

    worst = 0.0
    for doc in embedded_docs:
        delta = abs(_run(engine_a, doc) - _run(engine_b, doc))
        worst = max(worst, delta)
    return worst
