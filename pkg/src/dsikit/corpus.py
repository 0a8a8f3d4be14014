"""Bibliometric record ingestion, validation, filtering, and summaries.

Records arrive as JSONL (one object per line) or RFC-4180 CSV with the
canonical keys ``id, doi, title, abstract, pub_year, author_count,
primary_subject, cit3, cit5, cit_total``.  Citation counts are nullable:
a missing window is distinct from zero citations.  Malformed lines never
abort a parse; they land in a rejects report with their line number.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import re
import statistics
import unicodedata
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Optional, Sequence

from .errors import UnmappedSubject

REQUIRED_KEYS = ("id", "title", "abstract", "pub_year", "author_count", "primary_subject")
OPTIONAL_KEYS = ("doi", "cit3", "cit5", "cit_total")
RECORD_KEYS = REQUIRED_KEYS + OPTIONAL_KEYS

CITATION_WINDOWS = ("cit3", "cit5", "cit_total")


class FieldOfResearch(enum.Enum):
    """Coarse research-field grouping of primary subjects."""

    LIFE_SCI_BIOMED = "Life Sciences & Biomedicine"
    MULTIDISCIPLINARY = "Multidisciplinary Sciences"
    PHYSICAL_SCI = "Physical Sciences"
    SOCIAL_SCI = "Social Sciences"
    TECHNOLOGY = "Technology"


_FIELD_BY_LABEL = {f.value: f for f in FieldOfResearch}


@dataclass
class BiblioRecord:
    """One paper's text plus bibliometric metadata."""

    record_id: str
    title: str
    abstract: str
    pub_year: int
    author_count: int
    primary_subject: str
    doi: Optional[str] = None
    field: Optional[FieldOfResearch] = None
    cit3: Optional[int] = None
    cit5: Optional[int] = None
    cit_total: Optional[int] = None

    def document_text(self) -> str:
        """Title and abstract combined into one document.

        The title is terminated with a period when it carries no terminal
        punctuation of its own, so downstream segmentation always sees the
        title as a complete first sentence.
        """
        title = self.title.strip()
        if title and title[-1] not in ".!?":
            title = title + "."
        return f"{title} {self.abstract.strip()}" if title else self.abstract.strip()


@dataclass
class Reject:
    """A rejected input line and the machine-readable reason."""

    line: int
    reason: str


@dataclass
class EligibilityPolicy:
    """Inclusion rules applied before any text processing.

    ``min_spaces``/``max_spaces`` bound the abstract's U+0020 count (a
    proxy for word count that keeps tokenized length under the model
    input limit).  ``min_sentences`` is carried here for configuration
    but enforced at scoring time, where sentence counts are known.
    """

    min_spaces: int = 199
    max_spaces: int = 299
    min_sentences: int = 3
    require_subject_mapped: bool = True
    snapshot_year: int = 2025

    def __post_init__(self):
        if self.min_spaces > self.max_spaces:
            raise ValueError("min_spaces must be <= max_spaces")
        if self.min_sentences < 2:
            raise ValueError("min_sentences must be >= 2")


class FieldMap:
    """Mapping of primary subject names to fields of research.

    Lookup is case-sensitive exact match after whitespace normalization
    (strip + collapse internal runs).  The shipped table covers the 80
    subjects used in the reference corpus; callers may load their own.
    """

    def __init__(self, entries: dict[str, FieldOfResearch]):
        self.entries = {_normalize_subject(k): v for k, v in entries.items()}

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, subject: str) -> FieldOfResearch:
        key = _normalize_subject(subject)
        try:
            return self.entries[key]
        except KeyError:
            raise UnmappedSubject(subject) from None

    def __contains__(self, subject: str) -> bool:
        return _normalize_subject(subject) in self.entries

    @classmethod
    def from_csv(cls, stream: Iterable[str]) -> "FieldMap":
        reader = csv.DictReader(stream)
        entries = {}
        for row in reader:
            label = row["field"].strip()
            if label not in _FIELD_BY_LABEL:
                raise ValueError(f"unknown field of research: {label!r}")
            entries[row["primary_subject"]] = _FIELD_BY_LABEL[label]
        return cls(entries)

    @classmethod
    def shipped(cls) -> "FieldMap":
        """The bundled 80-subject mapping."""
        text = resources.files("dsikit.data").joinpath("field_map.csv").read_text("utf-8")
        return cls.from_csv(io.StringIO(text))


def _normalize_subject(subject: str) -> str:
    return re.sub(r"\s+", " ", subject.strip())


def map_field(subject: str, fmap: FieldMap) -> FieldOfResearch:
    """Resolve a primary subject to its field; unmapped subjects raise."""
    return fmap.lookup(subject)


def count_spaces(text: str) -> int:
    """Number of U+0020 characters; other whitespace is not counted."""
    return text.count(" ")


# ---------------------------------------------------------------------------
# Parsing


def _coerce_record(obj: dict, line_no: int) -> BiblioRecord | Reject:
    for key in REQUIRED_KEYS:
        if key not in obj or obj[key] is None or obj[key] == "":
            return Reject(line_no, f"missing required field: {key}")
    unknown = set(obj) - set(RECORD_KEYS)
    if unknown:
        return Reject(line_no, f"unknown fields: {', '.join(sorted(unknown))}")
    try:
        pub_year = int(obj["pub_year"])
        author_count = int(obj["author_count"])
    except (TypeError, ValueError):
        return Reject(line_no, "non-integer pub_year or author_count")
    if author_count < 0:
        return Reject(line_no, "negative author_count")

    cits: dict[str, Optional[int]] = {}
    for key in CITATION_WINDOWS:
        raw = obj.get(key)
        if raw is None or raw == "":
            cits[key] = None
            continue
        try:
            value = int(raw)
        except (TypeError, ValueError):
            return Reject(line_no, f"non-integer citation count: {key}")
        if value < 0:
            return Reject(line_no, f"negative citation count: {key}")
        cits[key] = value
    c3, c5, ct = cits["cit3"], cits["cit5"], cits["cit_total"]
    if c3 is not None and c5 is not None and ct is not None and not (c3 <= c5 <= ct):
        return Reject(line_no, "citation windows not monotone: cit3 <= cit5 <= cit_total")

    doi = obj.get("doi") or None
    # Text is NFC-normalized once, at load; offsets and counts downstream
    # refer to this normalized form.
    return BiblioRecord(
        record_id=str(obj["id"]),
        doi=str(doi) if doi is not None else None,
        title=unicodedata.normalize("NFC", str(obj["title"])),
        abstract=unicodedata.normalize("NFC", str(obj["abstract"])),
        pub_year=pub_year,
        author_count=author_count,
        primary_subject=str(obj["primary_subject"]),
        cit3=c3,
        cit5=c5,
        cit_total=ct,
    )


def parse_records(
    stream: Iterable[str], format: str = "jsonl"
) -> tuple[list[BiblioRecord], list[Reject]]:
    """Parse line-delimited records, collecting per-line rejects.

    Returns ``(records, rejects)``; input order is preserved in both.
    Duplicate record ids are rejected on their later occurrences.
    """
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unsupported format: {format!r}")

    records: list[BiblioRecord] = []
    rejects: list[Reject] = []
    seen_ids: set[str] = set()

    def _admit(item: BiblioRecord | Reject):
        if isinstance(item, Reject):
            rejects.append(item)
        elif item.record_id in seen_ids:
            rejects.append(Reject(line_no, f"duplicate record id: {item.record_id}"))
        else:
            seen_ids.add(item.record_id)
            records.append(item)

    if format == "jsonl":
        for line_no, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                rejects.append(Reject(line_no, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                rejects.append(Reject(line_no, "line is not a JSON object"))
                continue
            _admit(_coerce_record(obj, line_no))
    else:
        reader = csv.DictReader(stream)
        if reader.fieldnames is None:
            return [], [Reject(1, "empty CSV input")]
        # DictReader line numbering starts after the header row.
        for obj in reader:
            line_no = reader.line_num
            if None in obj:
                rejects.append(Reject(line_no, "row has more cells than header"))
                continue
            cleaned = {k: v for k, v in obj.items() if v not in (None, "")}
            _admit(_coerce_record(cleaned, line_no))

    return records, rejects


# ---------------------------------------------------------------------------
# Filtering


def assign_fields(
    records: Sequence[BiblioRecord], fmap: FieldMap
) -> tuple[list[BiblioRecord], list[BiblioRecord]]:
    """Attach the field enum to each record; unmapped subjects go to the
    second list unchanged."""
    mapped, unmapped = [], []
    for rec in records:
        if rec.primary_subject in fmap:
            mapped.append(replace(rec, field=fmap.lookup(rec.primary_subject)))
        else:
            unmapped.append(rec)
    return mapped, unmapped


def filter_eligible(
    records: Sequence[BiblioRecord],
    policy: EligibilityPolicy,
    fmap: Optional[FieldMap] = None,
) -> tuple[list[BiblioRecord], list[tuple[BiblioRecord, str]]]:
    """Partition records into (kept, excluded-with-reason).

    Kept records satisfy the abstract space-count bounds (inclusive) and,
    when the policy requires it, a mapped primary subject.  The two lists
    always partition the input.
    """
    if policy.require_subject_mapped and fmap is None:
        fmap = FieldMap.shipped()
    kept: list[BiblioRecord] = []
    excluded: list[tuple[BiblioRecord, str]] = []
    for rec in records:
        n_spaces = count_spaces(rec.abstract)
        if not (policy.min_spaces <= n_spaces <= policy.max_spaces):
            excluded.append((rec, f"space-count {n_spaces} outside "
                                  f"[{policy.min_spaces}, {policy.max_spaces}]"))
        elif policy.require_subject_mapped and rec.primary_subject not in fmap:
            excluded.append((rec, f"unmapped subject: {rec.primary_subject}"))
        else:
            kept.append(rec)
    return kept, excluded


def window_eligible(
    records: Sequence[BiblioRecord], horizon_years: int, snapshot_year: int
) -> list[BiblioRecord]:
    """Keep records old enough to have accrued a full citation window.

    A record qualifies when ``pub_year <= snapshot_year - horizon_years - 1``,
    i.e. the window closed before the snapshot year began.
    """
    if horizon_years < 1:
        raise ValueError("horizon_years must be >= 1")
    cutoff = snapshot_year - horizon_years - 1
    return [rec for rec in records if rec.pub_year <= cutoff]


def drop_zero_authors(
    records: Sequence[BiblioRecord],
) -> tuple[list[BiblioRecord], list[BiblioRecord]]:
    """Split off records with an author count of zero (a database anomaly)."""
    kept = [rec for rec in records if rec.author_count != 0]
    dropped = [rec for rec in records if rec.author_count == 0]
    return kept, dropped


# ---------------------------------------------------------------------------
# Summaries


@dataclass
class WindowStats:
    """Citation statistics for one accumulation window within a group."""

    n: int
    mean: Optional[float]
    median: Optional[float]
    sd: Optional[float]
    zeros: int
    zero_pct: Optional[float]


@dataclass
class SummaryRow:
    """Author and citation statistics for one field (or all fields)."""

    label: str
    n: int
    author_mean: Optional[float]
    author_median: Optional[float]
    author_max: Optional[int]
    author_sd: Optional[float]
    author_zeros: int
    windows: dict[str, WindowStats] = field(default_factory=dict)


@dataclass
class CorpusSummary:
    rows: list[SummaryRow]

    def row(self, label: str) -> SummaryRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


ALL_FIELDS_LABEL = "All Fields"


def _mean_median_sd(values: Sequence[float]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    if not values:
        return None, None, None
    mean = sum(values) / len(values)
    median = statistics.median(values)  # midpoint of central pair for even n
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, float(median), sd


def _window_stats(records: Sequence[BiblioRecord], window: str) -> WindowStats:
    present = [getattr(r, window) for r in records if getattr(r, window) is not None]
    mean, median, sd = _mean_median_sd(present)
    zeros = sum(1 for v in present if v == 0)
    zero_pct = 100.0 * zeros / len(present) if present else None
    return WindowStats(n=len(present), mean=mean, median=median, sd=sd,
                       zeros=zeros, zero_pct=zero_pct)


def _summary_row(label: str, records: Sequence[BiblioRecord]) -> SummaryRow:
    authors = [r.author_count for r in records]
    mean, median, sd = _mean_median_sd(authors)
    row = SummaryRow(
        label=label,
        n=len(records),
        author_mean=mean,
        author_median=median,
        author_max=max(authors) if authors else None,
        author_sd=sd,
        author_zeros=sum(1 for a in authors if a == 0),
    )
    for window in CITATION_WINDOWS:
        row.windows[window] = _window_stats(records, window)
    return row


def summarize(records: Sequence[BiblioRecord]) -> CorpusSummary:
    """Per-field and all-fields author/citation statistics.

    Fields appear in enum declaration order; a field with no records gets
    an ``n=0`` row with null statistics.  Standard deviations are sample
    SDs (n-1 denominator); medians are conventional midpoint medians.
    Citation statistics cover only records where that window is present,
    and uncited percentages are relative to that present count.
    """
    rows = []
    for for_field in FieldOfResearch:
        group = [r for r in records if r.field == for_field]
        rows.append(_summary_row(for_field.value, group))
    rows.append(_summary_row(ALL_FIELDS_LABEL, list(records)))
    return CorpusSummary(rows=rows)


def summary_to_rows(summary: CorpusSummary) -> list[dict]:
    """Flatten a CorpusSummary into plain dicts for CSV/JSON emission."""
    out = []
    for row in summary.rows:
        flat: dict = {
            "field": row.label,
            "n": row.n,
            "auth_mean": row.author_mean,
            "auth_median": row.author_median,
            "auth_max": row.author_max,
            "auth_sd": row.author_sd,
            "auth_zeros": row.author_zeros,
        }
        for window, ws in row.windows.items():
            flat[f"{window}_n"] = ws.n
            flat[f"{window}_mean"] = ws.mean
            flat[f"{window}_median"] = ws.median
            flat[f"{window}_sd"] = ws.sd
            flat[f"{window}_zeros"] = ws.zeros
            flat[f"{window}_zero_pct"] = ws.zero_pct
        out.append(flat)
    return out
