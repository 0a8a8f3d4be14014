import numpy as np
import pytest

from dsikit.embedding import SentenceEmbeddings, synthetic_embed
from dsikit.wordpiece import Vocabulary

# Filled by the acceptance suite; echoed at the end of the run.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)

# The worked low-score exemplar document used across segmentation and
# tokenization tests (title, then abstract).
MYCOLOGY_TITLE = (
    "Multi-aged forest fragments in Atlantic France that are surrounded by "
    "meadows retain a richer epiphyte lichen flora."
)
MYCOLOGY_ABSTRACT = (
    "This project was focused on identifying the effect of environmental "
    "factors on epiphytic lichen species by using a multiscale design applied "
    "within multi-aged forest fragments. The field investigations were "
    "performed within 20 forest fragments, of which 14 were surrounded by "
    "crops and six were surrounded by meadows. Sampling units of 10 by 10 m "
    "were selected from the exterior to the interior of each forest fragment "
    "following the perimeter line; other sampling units were selected "
    "following the same perimeter line to the centre of the forests. The "
    "spatial gradient represented by the exterior and interior parts of the "
    "forest fragments, surrounding matrix and forest structure (i.e., the "
    "presence of larger trees) significantly supported patterns of lichen "
    "abundance and diversity. Lichen abundance and diversity were "
    "significantly influenced by microhabitat and macrohabitat drivers on the "
    "relatively large trees in the forest fragments surrounded by both crops "
    "and meadows. Lichen species replacement was significantly described by "
    "both larger and thinner trees situated in the interior and at the "
    "exterior of the forest fragments surrounded by meadows. The lichen "
    "richness was significantly higher on larger trees situated in the "
    "interior of the forest fragments surrounded by meadows. The mature "
    "structure of forests and the surrounding matrix significantly determined "
    "the pattern of epiphytic lichen species. Furthermore, larger and thinner "
    "trees harbour very rare lichen species within forest fragments "
    "surrounded by both crops and meadows. Forest management practices based "
    "on selective cutting on a short rotation cycle did not exert a negative "
    "impact on epiphytic lichen."
)

GOLDEN_TITLE_IDS = [
    101, 18447, 15841, 3304, 11062, 1107, 3608, 1699, 1115, 1132, 4405, 1118,
    25958, 8983, 170, 3987, 1200, 174, 8508, 22192, 1566, 181, 26312, 1179,
    16812, 102,
]
GOLDEN_TITLE_TOKENS = [
    "[CLS]", "Multi", "##aged", "forest", "fragments", "in", "Atlantic",
    "France", "that", "are", "surrounded", "by", "meadows", "retain", "a",
    "rich", "##er", "e", "##pi", "##phy", "##te", "l", "##iche", "##n",
    "flora", "[SEP]",
]


@pytest.fixture(scope="session")
def vocab() -> Vocabulary:
    from importlib import resources

    with resources.as_file(
        resources.files("dsikit.data").joinpath("vocab_fixture.txt")
    ) as path:
        return Vocabulary.load(path)


def make_embedded_doc(rng: np.random.Generator, n_sentences: int, hidden_dim: int,
                      layers=(6, 7), seed: int = 0, token_range=(3, 12)
                      ) -> list[SentenceEmbeddings]:
    """Random synthetic document for scoring tests."""
    doc = []
    for i in range(n_sentences):
        n_tok = int(rng.integers(*token_range))
        token_ids = rng.integers(0, 30000, size=n_tok).tolist()
        per_layer = {
            k: synthetic_embed(token_ids, k, seed, hidden_dim) for k in layers
        }
        doc.append(SentenceEmbeddings(sentence_index=i, per_layer=per_layer))
    return doc
