"""Plot-ready analyses over a scored corpus.

Every function takes plain records plus score-table rows (dicts in the
score CSV schema) and returns lists of flat dicts ready for CSV/JSONL
emission.  Nothing here renders figures; the outputs are the data
behind distribution tables, per-year trend lines, per-subject boxplots,
correlation sensitivity grids, citation regressions, QQ diagnostics,
and cross-model scatter comparisons.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .corpus import (
    ALL_FIELDS_LABEL,
    BiblioRecord,
    FieldOfResearch,
    drop_zero_authors,
    window_eligible,
)
from .stats import (
    CorrelationCell,
    assign_bins,
    build_design,
    effect_percent,
    grouped_correlation,
    log10p1,
    ols_fit,
    pearson,
    qq_points,
    standardize,
)

DEFAULT_AUTHOR_BINS: tuple[tuple[int, Optional[int]], ...] = (
    (1, 1), (2, 2), (3, 5), (6, 10), (11, None),
)
DEFAULT_YEAR_RANGES: tuple[tuple[int, int], ...] = (
    (1994, 1999), (2000, 2005), (2006, 2011), (2012, 2017), (2018, 2023),
    (2024, 2025),
)
CITATION_WINDOWS = ("cit3", "cit5", "cit_total")


def join_scores(
    records: Sequence[BiblioRecord], score_rows: Sequence[dict]
) -> list[tuple[BiblioRecord, float]]:
    """Pair records with their scores, skipping error rows; preserves
    score-table order."""
    by_id = {rec.record_id: rec for rec in records}
    out = []
    for row in score_rows:
        if row.get("error"):
            continue
        rec = by_id.get(row["record_id"])
        if rec is not None:
            out.append((rec, float(row["dsi"])))
    return out


def _distribution_row(label: str, model_id: str, values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return {"model_id": model_id, "field": label, "n": 0, "min": None,
                "q1": None, "median": None, "mean": None, "q3": None,
                "max": None, "range": None, "sd": None}
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return {
        "model_id": model_id,
        "field": label,
        "n": int(arr.size),
        "min": float(arr.min()),
        "q1": float(q1),
        "median": float(med),
        "mean": float(arr.mean()),
        "q3": float(q3),
        "max": float(arr.max()),
        "range": float(arr.max() - arr.min()),
        "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
    }


def summary_by_field(records, score_rows) -> list[dict]:
    """Score distribution statistics per field plus an all-fields row."""
    joined = join_scores(records, score_rows)
    model_id = score_rows[0]["model_id"] if score_rows else ""
    rows = []
    for field in FieldOfResearch:
        vals = [v for rec, v in joined if rec.field == field]
        rows.append(_distribution_row(field.value, model_id, vals))
    rows.append(_distribution_row(ALL_FIELDS_LABEL, model_id, [v for _, v in joined]))
    return rows


def trend_by_year(records, score_rows) -> list[dict]:
    """Per-(field, year) mean score with a 95% normal-approximation CI."""
    joined = join_scores(records, score_rows)
    cells: dict[tuple[str, int], list[float]] = {}
    for rec, v in joined:
        cells.setdefault((rec.field.value, rec.pub_year), []).append(v)
    rows = []
    for (field, year) in sorted(cells):
        arr = np.asarray(cells[(field, year)])
        mean = float(arr.mean())
        if arr.size > 1:
            half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(arr.size)
        else:
            half = 0.0
        rows.append({
            "field": field, "year": year, "n": int(arr.size), "mean_dsi": mean,
            "ci_low": mean - half, "ci_high": mean + half,
        })
    return rows


def boxplot_by_subject(records, score_rows) -> list[dict]:
    """Tukey boxplot data per primary subject: quartiles, 1.5*IQR
    whiskers clipped to observed values, and explicit outliers."""
    joined = join_scores(records, score_rows)
    groups: dict[tuple[str, str], list[float]] = {}
    for rec, v in joined:
        groups.setdefault((rec.field.value, rec.primary_subject), []).append(v)
    rows = []
    for (field, subject) in sorted(groups):
        arr = np.sort(np.asarray(groups[(field, subject)]))
        q1, med, q3 = np.percentile(arr, [25, 50, 75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
        whisk_lo = float(inside.min()) if inside.size else float(q1)
        whisk_hi = float(inside.max()) if inside.size else float(q3)
        outliers = arr[(arr < lo_fence) | (arr > hi_fence)]
        rows.append({
            "field": field, "subject": subject, "n": int(arr.size),
            "q1": float(q1), "median": float(med), "q3": float(q3),
            "whisker_low": whisk_lo, "whisker_high": whisk_hi,
            "outliers": [float(v) for v in outliers],
        })
    return rows


def _sensitivity_rows(joined, labels_for, windows=CITATION_WINDOWS,
                      order=None, method="spearman") -> list[dict]:
    rows = []
    for window in windows:
        triples = [
            (v, getattr(rec, window), lab)
            for (rec, v), lab in zip(joined, labels_for)
            if getattr(rec, window) is not None and lab is not None
        ]
        if not triples:
            continue
        x, y, labs = zip(*triples)
        cells: list[CorrelationCell] = grouped_correlation(
            x, y, labs, method=method, order=order
        )
        for cell in cells:
            rows.append({
                "window": window, "group": cell.group, "n": cell.n,
                "coefficient": cell.coefficient, "p_value": cell.p_value,
                "method": cell.method,
            })
    return rows


def author_sensitivity(records, score_rows,
                       bins: Sequence[tuple[int, Optional[int]]] = DEFAULT_AUTHOR_BINS
                       ) -> list[dict]:
    """Score-citation correlation within binned author counts, per window."""
    joined = join_scores(records, score_rows)
    edges = [(float(lo), None if hi is None else float(hi)) for lo, hi in bins]
    labels = [
        (f"{int(lo)}" if hi == lo else f"{int(lo)}-{int(hi)}" if hi is not None
         else f"{int(lo)}+")
        for lo, hi in bins
    ]
    lab_for = assign_bins([rec.author_count for rec, _ in joined], edges, labels)
    return _sensitivity_rows(joined, lab_for, order=labels)


def year_sensitivity(records, score_rows,
                     ranges: Sequence[tuple[int, int]] = DEFAULT_YEAR_RANGES
                     ) -> list[dict]:
    """Score-citation correlation within publication-year ranges."""
    joined = join_scores(records, score_rows)
    edges = [(float(a), float(b)) for a, b in ranges]
    labels = [f"{a}-{b}" for a, b in ranges]
    lab_for = assign_bins([rec.pub_year for rec, _ in joined], edges, labels)
    return _sensitivity_rows(joined, lab_for, order=labels)


# ---------------------------------------------------------------------------
# Citation models


def _model_records(records, score_rows, horizon_years: int, snapshot_year: int):
    joined = join_scores(records, score_rows)
    eligible_ids = {
        rec.record_id
        for rec in window_eligible([r for r, _ in joined], horizon_years, snapshot_year)
    }
    return [(rec, v) for rec, v in joined
            if rec.record_id in eligible_ids and rec.cit5 is not None]


def fit_citation_models(
    records: Sequence[BiblioRecord],
    score_rows: Sequence[dict],
    horizon_years: int = 5,
    snapshot_year: int = 2025,
    models: Sequence[str] = ("simple", "full"),
) -> dict[str, dict]:
    """Log-linear citation models on the 5-year window.

    * ``simple`` — log10(cit5 + 1) on the raw score plus field dummies,
      classic standard errors.
    * ``full`` — log10(cit5 + 1) on the standardized score, field
      dummies, standardized publication year, and standardized
      log10(author count) (zero-author records dropped first), HC3
      standard errors.  The per-SD score coefficient is also translated
      into a percent citation change.

    Returns JSON-ready report dicts keyed by model name.
    """
    usable = _model_records(records, score_rows, horizon_years, snapshot_year)
    reports: dict[str, dict] = {}
    model_id = score_rows[0]["model_id"] if score_rows else ""

    if "simple" in models:
        recs = [r for r, _ in usable]
        vals = np.array([v for _, v in usable])
        y = log10p1([r.cit5 for r in recs])
        design = build_design(
            [("dsi", vals)], [("field", [r.field.value for r in recs])]
        )
        res = ols_fit(design, y, cov_type="classic")
        reports["simple"] = {
            "model": "simple",
            "dv": "log10(cit5+1)",
            "controls": ["field"],
            "model_id": model_id,
            "dsi_standardized": False,
            "dsi_effect_percent_per_unit": effect_percent(res.coefficient("dsi")),
            **res.to_json_dict(),
        }

    if "full" in models:
        kept, _ = drop_zero_authors([r for r, _ in usable])
        kept_ids = {r.record_id for r in kept}
        pairs = [(r, v) for r, v in usable if r.record_id in kept_ids]
        recs = [r for r, _ in pairs]
        vals = np.array([v for _, v in pairs])
        y = log10p1([r.cit5 for r in recs])
        design = build_design(
            [
                ("dsi", standardize(vals)),
                ("pub_year", standardize([r.pub_year for r in recs])),
                ("log10_authors", standardize(np.log10([r.author_count for r in recs]))),
            ],
            [("field", [r.field.value for r in recs])],
        )
        res = ols_fit(design, y, cov_type="hc3")
        reports["full"] = {
            "model": "full",
            "dv": "log10(cit5+1)",
            "controls": ["field", "pub_year", "log10_authors"],
            "model_id": model_id,
            "dsi_standardized": True,
            "dsi_sd": float(np.std(vals, ddof=1)),
            "dsi_effect_percent_per_sd": effect_percent(res.coefficient("dsi")),
            **res.to_json_dict(),
        }
    return reports


def model_qq_rows(records, score_rows, model: str = "full",
                  horizon_years: int = 5, snapshot_year: int = 2025) -> list[dict]:
    """QQ diagnostic points for a citation model's residuals."""
    usable = _model_records(records, score_rows, horizon_years, snapshot_year)
    if model == "full":
        kept, _ = drop_zero_authors([r for r, _ in usable])
        kept_ids = {r.record_id for r in kept}
        usable = [(r, v) for r, v in usable if r.record_id in kept_ids]
    recs = [r for r, _ in usable]
    vals = np.array([v for _, v in usable])
    y = log10p1([r.cit5 for r in recs])
    if model == "simple":
        design = build_design([("dsi", vals)],
                              [("field", [r.field.value for r in recs])])
        res = ols_fit(design, y, cov_type="classic")
    else:
        design = build_design(
            [
                ("dsi", standardize(vals)),
                ("pub_year", standardize([r.pub_year for r in recs])),
                ("log10_authors", standardize(np.log10([r.author_count for r in recs]))),
            ],
            [("field", [r.field.value for r in recs])],
        )
        res = ols_fit(design, y, cov_type="hc3")
    pts = qq_points(res.residuals)
    return [{"theoretical": float(t), "ordered": float(o)} for t, o in pts]


def pairwise_scores(rows_a: Sequence[dict], rows_b: Sequence[dict]
                    ) -> tuple[list[dict], dict]:
    """Join two score tables on record id for cross-model comparison.

    Returns scatter points and a summary with the Pearson correlation
    and the fraction of documents where the second model scores higher.
    """
    b_by_id = {r["record_id"]: r for r in rows_b if not r.get("error")}
    points = []
    for row in rows_a:
        if row.get("error"):
            continue
        other = b_by_id.get(row["record_id"])
        if other is None:
            continue
        points.append({
            "record_id": row["record_id"],
            "dsi_a": float(row["dsi"]),
            "dsi_b": float(other["dsi"]),
        })
    if len(points) >= 3:
        a = [p["dsi_a"] for p in points]
        b = [p["dsi_b"] for p in points]
        r, p = pearson(a, b)
        frac = float(np.mean([p_["dsi_b"] > p_["dsi_a"] for p_ in points]))
    else:
        r = p = frac = None
    summary = {
        "n": len(points),
        "pearson_r": r,
        "p_value": p,
        "frac_b_greater": frac,
        "model_a": rows_a[0]["model_id"] if rows_a else "",
        "model_b": rows_b[0]["model_id"] if rows_b else "",
    }
    return points, summary
