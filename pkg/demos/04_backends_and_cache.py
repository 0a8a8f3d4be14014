"""Computation backends and the embedding cache.

The scoring engine has two interchangeable paths: a naive per-pair
reference and a blocked path that normalizes each vector once and runs
whole Gram-matrix products.  This script embeds a corpus into the binary
cache, scores it with both paths, and reports agreement and timing.
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from dsikit import DsiConfig, ProviderSpec, backend_equivalence, dsi_batch
from dsikit.cache import CacheReader, write_cache
from dsikit.embedding import CacheProvider, SyntheticProvider
from dsikit.wordpiece import TokenizedSentence

rng = np.random.default_rng(0)
spec = ProviderSpec(kind="synthetic", model_id="demo", hidden_dim=64, seed=3)
synth = SyntheticProvider(spec)

docs = []
for i in range(400):
    sentences = [
        TokenizedSentence(tokens=["w"] * k, ids=rng.integers(0, 30000, size=k).tolist())
        for k in rng.integers(8, 40, size=int(rng.integers(4, 12)))
    ]
    docs.append((f"doc{i:04d}", sentences))

cache_path = Path(tempfile.mkdtemp(prefix="dsikit-demo-")) / "embeddings.dsic"
write_cache(cache_path, [(d, synth.embed_document(s, doc_id=d)) for d, s in docs], spec)
reader = CacheReader(cache_path)
print(f"cache: {cache_path.stat().st_size / 1e6:.1f} MB, "
      f"{reader.header['document_count']} documents, header {reader.header}")

provider = CacheProvider(ProviderSpec(
    kind="cache", model_id="demo", hidden_dim=64, layer_indices=(6, 7),
    endpoint_or_path=str(cache_path), seed=3))

for engine in ("reference", "blocked"):
    cfg = DsiConfig(engine=engine)
    t0 = time.perf_counter()
    rows = dsi_batch(docs, provider, cfg)
    dt = time.perf_counter() - t0
    print(f"{engine:9s}: {len(docs) / dt:7.0f} docs/s  "
          f"(total {dt:.2f} s, per doc {dt / len(docs) * 1e3:.2f} ms)")

embedded = [provider.embed_document(s, doc_id=d) for d, s in docs[:100]]
delta = backend_equivalence(embedded, DsiConfig())
print(f"max |reference - blocked| over 100 docs: {delta:.2e}")
