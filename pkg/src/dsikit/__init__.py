"""dsikit: divergent semantic integration scoring for document corpora.

The toolkit ingests bibliometric records, segments and tokenizes their
titles+abstracts, obtains hidden-layer token embeddings from pluggable
providers, computes DSI (the mean pairwise cosine distance between
sentence representations), and reproduces the downstream statistical
analyses (distribution tables, trends, sensitivity grids, citation
regressions with robust errors).
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    BiblioRecord,
    CorpusSummary,
    EligibilityPolicy,
    FieldMap,
    FieldOfResearch,
    count_spaces,
    drop_zero_authors,
    filter_eligible,
    map_field,
    parse_records,
    summarize,
    window_eligible,
)
from .dsi import (  # noqa: F401
    DsiConfig,
    DsiScore,
    backend_equivalence,
    cosine_distance,
    dsi_batch,
    dsi_multilayer,
    dsi_single_vector,
    pool_sentence,
)
from .embedding import (  # noqa: F401
    ProviderSpec,
    SentenceEmbeddings,
    make_provider,
    synthetic_embed,
)
from .segmenter import (  # noqa: F401
    SegmenterState,
    SentenceSpan,
    segment,
    segment_document,
    train_segmenter,
)
from .stats import (  # noqa: F401
    DesignMatrix,
    RegressionResult,
    build_design,
    effect_percent,
    grouped_correlation,
    jarque_bera,
    levene,
    log10p1,
    ols_fit,
    pearson,
    qq_points,
    spearman,
    standardize,
)
from .wordpiece import TokenizedSentence, Vocabulary, tokenize  # noqa: F401
