"""Deterministic synthetic bibliometric corpora.

Every pipeline stage and analysis runs on generated data, so nothing in
the toolkit requires a licensed corpus.  Documents are built from the
bundled vocabulary's word list (plus deliberate out-of-vocabulary noise),
with exact control of the abstract's space count, skewed author counts,
monotone citation windows, and a configurable sprinkle of edge cases
(zero-author records, too-short documents, out-of-range abstracts).
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SNAPSHOT_YEAR = 2025


@lru_cache(maxsize=1)
def _word_bank() -> list[str]:
    text = resources.files("dsikit.data").joinpath("vocab_fixture.txt").read_text("utf-8")
    words = [t for t in text.splitlines()
             if t.isalpha() and not t.startswith("##") and len(t) > 1]
    # A few forms the vocabulary does not know, so UNK paths stay exercised.
    words += ["zymurgy", "quokka", "xylophone", "perihelion"]
    return words


@lru_cache(maxsize=1)
def shipped_subjects() -> list[str]:
    from .corpus import FieldMap

    return sorted(FieldMap.shipped().entries)


def _sentence(rng: np.random.Generator, words: Sequence[str], n_words: int) -> str:
    picks = [words[i] for i in rng.integers(0, len(words), size=n_words)]
    first = picks[0][:1].upper() + picks[0][1:]
    return " ".join([first] + picks[1:]) + "."


def _abstract(rng: np.random.Generator, words: Sequence[str],
              target_spaces: int, n_sentences: int) -> str:
    """Sentences joined by single spaces; total U+0020 count is exactly
    ``target_spaces`` (period attaches without a space, so spaces =
    total words - 1)."""
    total_words = target_spaces + 1
    n_sentences = max(1, min(n_sentences, total_words // 3))
    per = total_words // n_sentences
    counts = [per] * n_sentences
    counts[-1] += total_words - per * n_sentences
    return " ".join(_sentence(rng, words, c) for c in counts)


def synthetic_corpus(
    n_docs: int,
    seed: int = 0,
    subjects: Optional[Sequence[str]] = None,
    space_low: int = 199,
    space_high: int = 299,
    out_of_range_frac: float = 0.1,
    short_doc_frac: float = 0.02,
    zero_author_count: int = 3,
    no_doi_frac: float = 0.095,
    uncited_frac: float = 0.2,
    year_low: int = 1994,
    year_high: int = 2025,
    snapshot_year: int = SNAPSHOT_YEAR,
) -> list[dict]:
    """Generate record dicts in the canonical JSONL schema.

    Identical arguments produce identical output on every platform
    (numpy Generator bit streams are stable).
    """
    rng = np.random.default_rng(seed)
    words = _word_bank()
    subjects = list(subjects) if subjects is not None else shipped_subjects()

    zero_author_ids = set(
        rng.choice(n_docs, size=min(zero_author_count, n_docs), replace=False).tolist()
    )

    records = []
    for i in range(n_docs):
        pub_year = int(rng.integers(year_low, year_high + 1))
        subject = subjects[int(rng.integers(0, len(subjects)))]

        if rng.random() < out_of_range_frac:
            target = int(rng.integers(40, space_low)) if rng.random() < 0.5 else int(
                rng.integers(space_high + 1, space_high + 120)
            )
        else:
            target = int(rng.integers(space_low, space_high + 1))
        if rng.random() < short_doc_frac:
            n_sentences = 1
        else:
            n_sentences = int(rng.integers(5, 11))
        abstract = _abstract(rng, words, target, n_sentences)
        title_words = int(rng.integers(6, 13))
        title = _sentence(rng, words, title_words)[:-1]  # terminal "." added at assembly

        if i in zero_author_ids:
            author_count = 0
        else:
            author_count = 1 + int(rng.poisson(3.0))

        age = snapshot_year - pub_year
        if rng.random() < uncited_frac:
            c3 = c5 = ct = 0
        else:
            c3 = int(rng.poisson(3.0))
            c5 = c3 + int(rng.poisson(2.5))
            ct = c5 + int(rng.poisson(0.8 * max(age, 1)))
        cit3 = c3 if age >= 4 else None
        cit5 = c5 if age >= 6 else None
        cit_total = ct

        records.append(
            {
                "id": f"rec{i:06d}",
                "doi": None if rng.random() < no_doi_frac else f"10.5555/synth.{i:06d}",
                "title": title,
                "abstract": abstract,
                "pub_year": pub_year,
                "author_count": author_count,
                "primary_subject": subject,
                "cit3": cit3,
                "cit5": cit5,
                "cit_total": cit_total,
            }
        )
    return records


def write_corpus_jsonl(records: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_corpus_csv(records: Sequence[dict], path: str | Path) -> None:
    import csv

    keys = ["id", "doi", "title", "abstract", "pub_year", "author_count",
            "primary_subject", "cit3", "cit5", "cit_total"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for rec in records:
            writer.writerow(["" if rec[k] is None else rec[k] for k in keys])
