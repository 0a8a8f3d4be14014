"""Unsupervised sentence boundary detection in the Punkt tradition.

Training scans a corpus once and learns three artifacts:

* abbreviation types — period-final word types whose period attachment is
  statistically dependent (a modified Dunning log-likelihood ratio with
  length and internal-period scaling),
* collocations — word bigrams that straddle a period more often than
  chance allows,
* frequent sentence starters — types over-represented immediately after
  sentence boundaries.

Segmentation then breaks at ``. ! ?`` followed by whitespace and an
uppercase letter or digit, unless the preceding type is a learned
abbreviation (and the follower is not a frequent starter) or the
straddling bigram is a learned collocation.  An empty (untrained) state
is valid and falls back to the punctuation-only rule.

Offsets in the produced spans are code-point indices into the input
string; spans plus the gaps between them reconstruct the input exactly.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCorpus

# Decision thresholds, following the classic Punkt calibration.
ABBREV_THRESHOLD = 0.3
COLLOCATION_THRESHOLD = 7.88
SENT_STARTER_THRESHOLD = 30.0
MIN_COLLOC_FREQ = 2

_WRAPPERS = "\"'`“”‘’()[]{}<>,;:"
_TERMINATOR_RUN = re.compile(r"[.!?]+")
_TYPE_OK = re.compile(r"[^\W\d_]", re.UNICODE)  # at least one letter


@dataclass
class SentenceSpan:
    """Half-open [start, end) slice of the segmented string."""

    start: int
    end: int
    text: str


class SegmenterState:
    """Frozen training artifacts; serializable bit-identically."""

    def __init__(
        self,
        abbreviations: Iterable[str] = (),
        collocations: Iterable[tuple[str, str]] = (),
        sentence_starters: Iterable[str] = (),
        training_token_count: int = 0,
    ):
        self.abbreviations = frozenset(abbreviations)
        self.collocations = frozenset(tuple(c) for c in collocations)
        self.sentence_starters = frozenset(sentence_starters)
        self.training_token_count = training_token_count

    @classmethod
    def empty(cls) -> "SegmenterState":
        return cls()

    def to_json(self) -> str:
        payload = {
            "format_version": 1,
            "abbreviations": sorted(self.abbreviations),
            "collocations": sorted(list(pair) for pair in self.collocations),
            "sentence_starters": sorted(self.sentence_starters),
            "training_token_count": self.training_token_count,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SegmenterState":
        payload = json.loads(text)
        if payload.get("format_version") != 1:
            raise ValueError("unsupported segmenter state version")
        return cls(
            abbreviations=payload["abbreviations"],
            collocations=(tuple(p) for p in payload["collocations"]),
            sentence_starters=payload["sentence_starters"],
            training_token_count=payload["training_token_count"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SegmenterState":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def __eq__(self, other) -> bool:
        return isinstance(other, SegmenterState) and self.to_json() == other.to_json()


def _strip_wrappers(token: str) -> str:
    return token.strip(_WRAPPERS)


def _type_base(token: str) -> str:
    """Lowercased type with wrapper punctuation and trailing terminators removed."""
    return _strip_wrappers(token).rstrip(".!?").lower()


def _is_period_final(token: str) -> bool:
    return _strip_wrappers(token).endswith(".")


def _starts_sentenceish(token: str) -> bool:
    stripped = _strip_wrappers(token)
    return bool(stripped) and (stripped[0].isupper() or stripped[0].isdigit())


def _dunning_abbrev_ll(count_a: int, count_b: int, count_ab: int, n: int) -> float:
    """Modified Dunning log-likelihood of period attachment (vs p=0.99)."""
    p1 = min(count_b / n, 1.0 - 1e-9)
    p2 = 0.99
    null_hypo = count_ab * math.log(p1) + (count_a - count_ab) * math.log(1.0 - p1)
    alt_hypo = count_ab * math.log(p2) + (count_a - count_ab) * math.log(1.0 - p2)
    return -2.0 * (null_hypo - alt_hypo)


def _dunning_col_ll(count_a: int, count_b: int, count_ab: int, n: int) -> float:
    """Plain Dunning log-likelihood that b is dependent on preceding a."""
    p = count_b / n
    p1 = count_ab / count_a if count_a else 0.0
    p2 = (count_b - count_ab) / (n - count_a) if n != count_a else 1.0

    def _term(k, m, q):
        if q <= 0.0 or q >= 1.0:
            return 0.0
        return k * math.log(q) + m * math.log(1.0 - q)

    summand1 = _term(count_ab, count_a - count_ab, p)
    summand2 = _term(count_b - count_ab, n - count_a - count_b + count_ab, p)
    summand3 = 0.0 if count_a == count_ab else _term(count_ab, count_a - count_ab, p1)
    summand4 = (
        0.0
        if count_b == count_ab
        else _term(count_b - count_ab, n - count_a - count_b + count_ab, p2)
    )
    return -2.0 * (summand1 + summand2 - summand3 - summand4)


def train_segmenter(texts: Sequence[str]) -> SegmenterState:
    """Learn abbreviation, collocation, and sentence-starter statistics.

    The result depends only on corpus counts, not on text order, so
    training twice on the same material serializes identically.
    """
    with_period: Counter[str] = Counter()
    without_period: Counter[str] = Counter()
    n_tokens = 0
    n_period_tokens = 0
    token_streams: list[list[str]] = []

    for text in texts:
        tokens = text.split()
        if not tokens:
            continue
        token_streams.append(tokens)
        for tok in tokens:
            n_tokens += 1
            base = _type_base(tok)
            if not base:
                continue
            if _is_period_final(tok):
                n_period_tokens += 1
                with_period[base] += 1
            else:
                without_period[base] += 1

    if n_tokens == 0:
        raise EmptyCorpus("segmenter training corpus contains no tokens")

    abbreviations: set[str] = set()
    if n_period_tokens:
        for base, c_with in with_period.items():
            if not _TYPE_OK.search(base):
                continue
            internal = base.count(".")
            num_nonperiods = len(base) - internal
            if num_nonperiods == 0:
                continue
            c_without = without_period.get(base, 0)
            ll = _dunning_abbrev_ll(
                c_with + c_without, n_period_tokens, c_with, n_tokens
            )
            f_length = math.exp(-num_nonperiods)
            f_periods = internal + 1
            f_penalty = num_nonperiods ** (-c_without)
            if ll * f_length * f_periods * f_penalty >= ABBREV_THRESHOLD:
                abbreviations.add(base)

    # Second sweep: provisional boundaries (abbreviations applied) feed the
    # sentence-starter statistic; period-straddling bigrams feed collocations.
    starter_counts: Counter[str] = Counter()
    bigram_counts: Counter[tuple[str, str]] = Counter()
    n_breaks = 0
    type_total = with_period + without_period

    for tokens in token_streams:
        for tok, nxt in zip(tokens, tokens[1:]):
            base = _type_base(tok)
            next_base = _type_base(nxt)
            if not base or not next_base:
                continue
            stripped = _strip_wrappers(tok)
            if _is_period_final(tok):
                bigram_counts[(base, next_base)] += 1
            terminal = stripped.endswith(("!", "?")) or (
                _is_period_final(tok) and base not in abbreviations
            )
            if terminal and _starts_sentenceish(nxt):
                n_breaks += 1
                starter_counts[next_base] += 1

    sentence_starters: set[str] = set()
    if n_breaks:
        for base, c_start in starter_counts.items():
            ll = _dunning_col_ll(n_breaks, type_total[base], c_start, n_tokens)
            if ll >= SENT_STARTER_THRESHOLD and n_tokens / n_breaks > type_total[base] / c_start:
                sentence_starters.add(base)

    collocations: set[tuple[str, str]] = set()
    for (w1, w2), c_pair in bigram_counts.items():
        if c_pair < MIN_COLLOC_FREQ:
            continue
        c1, c2 = type_total[w1], type_total[w2]
        ll = _dunning_col_ll(c1, c2, c_pair, n_tokens)
        if ll >= COLLOCATION_THRESHOLD and n_tokens / c1 > c2 / c_pair:
            collocations.add((w1, w2))

    return SegmenterState(
        abbreviations=abbreviations,
        collocations=collocations,
        sentence_starters=sentence_starters,
        training_token_count=n_tokens,
    )


def _boundaries(text: str, state: SegmenterState) -> list[tuple[int, int]]:
    """(sentence_end, next_start) pairs for accepted boundaries."""
    out = []
    for m in _TERMINATOR_RUN.finditer(text):
        end = m.end()
        if end >= len(text) or not text[end].isspace():
            continue
        k = end
        while k < len(text) and text[k].isspace():
            k += 1
        if k == len(text):
            continue
        if not (text[k].isupper() or text[k].isdigit()):
            continue
        if "." in m.group() and "!" not in m.group() and "?" not in m.group():
            p = m.start()
            while p > 0 and not text[p - 1].isspace():
                p -= 1
            prev_base = _type_base(text[p:end])
            q = k
            while q < len(text) and not text[q].isspace():
                q += 1
            next_base = _type_base(text[k:q])
            if (prev_base, next_base) in state.collocations:
                continue
            if prev_base in state.abbreviations and next_base not in state.sentence_starters:
                continue
        out.append((end, k))
    return out


def segment(text: str, state: SegmenterState | None = None) -> list[SentenceSpan]:
    """Split text into sentence spans; no terminator yields a single span."""
    state = state or SegmenterState.empty()
    stripped = text.strip()
    if not stripped:
        return []
    first = text.index(stripped[0])
    last = first + len(stripped)

    spans = []
    start = first
    for end, next_start in _boundaries(text, state):
        if end <= start:
            continue
        spans.append(SentenceSpan(start, end, text[start:end]))
        start = next_start
    if start < last:
        spans.append(SentenceSpan(start, last, text[start:last]))
    return spans


def segment_document(title: str, abstract: str, state: SegmenterState | None = None
                     ) -> tuple[str, list[SentenceSpan]]:
    """Combine title and abstract into one document and segment it.

    The title is always its own first span (terminated with a period when
    it lacks terminal punctuation); the abstract is segmented by rule.
    Returns ``(document_text, spans)``; spans index into the document.
    """
    t = title.strip()
    a = abstract.strip()
    if t and t[-1] not in ".!?":
        t += "."
    if not t:
        doc = a
        return doc, segment(doc, state)
    doc = f"{t} {a}" if a else t
    spans = [SentenceSpan(0, len(t), t)]
    offset = len(t) + 1
    for span in segment(a, state):
        spans.append(SentenceSpan(span.start + offset, span.end + offset, span.text))
    return doc, spans
