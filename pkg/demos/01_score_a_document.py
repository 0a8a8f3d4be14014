"""Score a single document, step by step.

Walks one title+abstract through the whole chain: sentence segmentation,
word-piece tokenization, per-layer token embeddings (deterministic
synthetic provider here, so no model weights are needed), and the DSI
score itself in both sentence representations.
"""

from dsikit import (
    DsiConfig,
    ProviderSpec,
    Vocabulary,
    dsi_multilayer,
    dsi_single_vector,
    make_provider,
    pool_sentence,
    segment_document,
    tokenize,
)

from importlib import resources

import numpy as np

TITLE = ("Multi-aged forest fragments in Atlantic France that are surrounded "
         "by meadows retain a richer epiphyte lichen flora.")
ABSTRACT = (
    "This project was focused on identifying the effect of environmental "
    "factors on epiphytic lichen species by using a multiscale design applied "
    "within multi-aged forest fragments. The field investigations were "
    "performed within 20 forest fragments, of which 14 were surrounded by "
    "crops and six were surrounded by meadows. The lichen richness was "
    "significantly higher on larger trees situated in the interior of the "
    "forest fragments surrounded by meadows. Forest management practices "
    "based on selective cutting on a short rotation cycle did not exert a "
    "negative impact on epiphytic lichen."
)

with resources.as_file(
    resources.files("dsikit.data").joinpath("vocab_fixture.txt")
) as path:
    vocab = Vocabulary.load(path)

doc_text, spans = segment_document(TITLE, ABSTRACT)
print(f"document has {len(spans)} sentences; the title is sentence 1:")
for i, span in enumerate(spans, 1):
    print(f"  s{i}: {span.text[:72]}{'...' if len(span.text) > 72 else ''}")

sentences = [tokenize(span.text, vocab) for span in spans]
print("\ntokenization of the title:")
print(" ", sentences[0].tokens)
print(" ", sentences[0].ids)

provider = make_provider(ProviderSpec(kind="synthetic", hidden_dim=64, seed=7))
embedded = provider.embed_document(sentences)
print(f"\nper-sentence embeddings: layers {sorted(embedded[0].per_layer)}, "
      f"shapes {[e.per_layer[6].shape for e in embedded]}")

for mode in ("pooled", "token_pairs"):
    score = dsi_multilayer(embedded, DsiConfig(mode=mode),
                           model_id=provider.model_id)
    print(f"\n{mode} mode: DSI = {score.value:.4f} over {score.n_distances} "
          f"pair-layer distances ({score.n_sentences} sentences)")

# Single-vector variant for providers that expose one embedding per text.
vectors = [np.concatenate([pool_sentence(e, 6), pool_sentence(e, 7)])
           for e in embedded]
single = dsi_single_vector(vectors)
print(f"\nsingle-vector mode: DSI = {single.value:.4f} over "
      f"{single.n_distances} pairwise distances")
