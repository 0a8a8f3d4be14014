"""Exception types shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; generic ValueError/RuntimeError are reserved for programming
errors.
"""


class DsikitError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(DsikitError):
    """Invalid or unknown pipeline configuration."""


class UnmappedSubject(DsikitError, KeyError):
    """A primary subject has no field-of-research mapping."""

    def __init__(self, subject: str):
        super().__init__(f"no field-of-research mapping for subject: {subject!r}")
        self.subject = subject


class EmptySentence(DsikitError):
    """Tokenization was asked to process an empty sentence."""


class EmptyCorpus(DsikitError):
    """Segmenter training received no usable text."""


class ZeroNormError(DsikitError):
    """Cosine distance is undefined for a zero-norm vector."""


class DimensionError(DsikitError):
    """Vector or matrix dimensions do not agree."""


class DocumentTooShort(DsikitError):
    """Document has fewer sentences than the configured minimum."""

    def __init__(self, n_sentences: int, min_sentences: int):
        super().__init__(
            f"document has {n_sentences} sentences, need at least {min_sentences}"
        )
        self.n_sentences = n_sentences
        self.min_sentences = min_sentences


class IntegrityError(DsikitError):
    """Embedding provider returned data violating the shape/NaN contract."""


class TransportError(DsikitError):
    """Retryable failure talking to a remote embedding provider."""


class ProviderFailure(DsikitError):
    """Systemic provider failure; carries partial batch results."""

    def __init__(self, message: str, partial_rows=None):
        super().__init__(message)
        self.partial_rows = partial_rows or []


class CacheSpecMismatch(DsikitError):
    """Embedding cache header disagrees with the requested provider spec."""


class CorruptCache(DsikitError):
    """Embedding cache file is truncated or malformed."""


class DocumentNotFound(DsikitError, KeyError):
    """Requested document id is not present in the cache."""


class ConstantSeriesError(DsikitError):
    """Statistic undefined on a zero-variance series."""


class DomainError(DsikitError):
    """Argument outside the mathematical domain of a function."""


class RankError(DsikitError):
    """Design matrix is rank deficient."""

    def __init__(self, message: str, columns=None):
        super().__init__(message)
        self.columns = list(columns or [])
