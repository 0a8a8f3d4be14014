"""Declarative pipeline configuration.

A single JSON document drives every stage.  Validation is strict:
unknown keys anywhere are rejected up front, and the validated snapshot
is serialized into each run manifest so outputs are attributable to an
exact configuration.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .analysis import DEFAULT_AUTHOR_BINS, DEFAULT_YEAR_RANGES
from .corpus import EligibilityPolicy
from .dsi import DsiConfig
from .embedding import ProviderSpec
from .errors import ConfigError

ALL_SELECTIONS = (
    "table2", "trend", "boxplot", "sensitivity-authors", "sensitivity-years",
    "models", "qq", "pairwise",
)


@dataclass
class AnalysisConfig:
    selections: tuple[str, ...] = tuple(s for s in ALL_SELECTIONS if s != "pairwise")
    author_bins: tuple[tuple[int, Optional[int]], ...] = DEFAULT_AUTHOR_BINS
    year_ranges: tuple[tuple[int, int], ...] = DEFAULT_YEAR_RANGES
    horizon_years: int = 5
    snapshot_year: int = 2025
    models: tuple[str, ...] = ("simple", "full")
    pairwise_with: Optional[str] = None  # path to a second score table

    def __post_init__(self):
        for sel in self.selections:
            if sel not in ALL_SELECTIONS:
                raise ConfigError(f"unknown analysis selection: {sel!r}")
        for m in self.models:
            if m not in ("simple", "full"):
                raise ConfigError(f"unknown model: {m!r}")
        if "pairwise" in self.selections and not self.pairwise_with:
            raise ConfigError("pairwise selection requires analysis.pairwise_with")


@dataclass
class PipelineConfig:
    corpus_path: str
    corpus_format: str = "jsonl"
    field_map: str = "shipped"  # or a CSV path
    eligibility: EligibilityPolicy = field(default_factory=EligibilityPolicy)
    segmenter_scope: str = "per-subject"  # or "global"
    segmenter_min_docs: int = 50
    vocab_path: str = "fixture"  # bundled vocabulary, or a file path
    provider: ProviderSpec = field(
        default_factory=lambda: ProviderSpec(kind="synthetic")
    )
    dsi: DsiConfig = field(default_factory=DsiConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    out_dir: str = "out"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.corpus_format not in ("jsonl", "csv"):
            raise ConfigError(f"corpus format must be jsonl or csv, got {self.corpus_format!r}")
        if self.segmenter_scope not in ("per-subject", "global"):
            raise ConfigError(f"segmenter scope must be per-subject or global")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def snapshot(self) -> dict:
        """JSON-ready snapshot of the validated configuration."""
        return {
            "corpus": {"path": self.corpus_path, "format": self.corpus_format,
                       "field_map": self.field_map},
            "eligibility": asdict(self.eligibility),
            "segmenter": {"scope": self.segmenter_scope,
                          "min_docs_per_subject": self.segmenter_min_docs},
            "vocab": self.vocab_path,
            "provider": asdict(self.provider),
            "dsi": asdict(self.dsi),
            "analysis": {
                "selections": list(self.analysis.selections),
                "author_bins": [list(b) for b in self.analysis.author_bins],
                "year_ranges": [list(r) for r in self.analysis.year_ranges],
                "horizon_years": self.analysis.horizon_years,
                "snapshot_year": self.analysis.snapshot_year,
                "models": list(self.analysis.models),
                "pairwise_with": self.analysis.pairwise_with,
            },
            "out": self.out_dir,
            "seed": self.seed,
            "jobs": self.jobs,
        }


def _take(section: dict, where: str, allowed: dict) -> dict:
    """Pop known keys with defaults; reject anything else."""
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")
    return {k: section.get(k, default) for k, default in allowed.items()}


def _tuples(value, width: int, where: str):
    out = []
    for item in value:
        if not isinstance(item, (list, tuple)) or len(item) != width:
            raise ConfigError(f"{where} entries must be {width}-element lists")
        out.append(tuple(item))
    return tuple(out)


def load_config(path: str | Path, overrides: Optional[dict] = None) -> PipelineConfig:
    """Parse and validate a JSON config file.

    ``overrides`` may replace ``out``, ``seed``, and ``jobs`` (the values
    the CLI exposes as flags).
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    top = _take(raw, "config", {
        "corpus": None, "eligibility": {}, "segmenter": {}, "vocab": "fixture",
        "provider": {}, "dsi": {}, "analysis": {}, "out": "out", "seed": 0,
        "jobs": 1,
    })
    if not isinstance(top["corpus"], dict):
        raise ConfigError("config requires a corpus section")

    corpus = _take(top["corpus"], "corpus", {
        "path": None, "format": "jsonl", "field_map": "shipped"})
    if not corpus["path"]:
        raise ConfigError("corpus.path is required")

    elig_kwargs = _take(top["eligibility"], "eligibility", {
        "min_spaces": 199, "max_spaces": 299, "min_sentences": 3,
        "require_subject_mapped": True, "snapshot_year": 2025})
    seg = _take(top["segmenter"], "segmenter", {
        "scope": "per-subject", "min_docs_per_subject": 50})
    prov_kwargs = _take(top["provider"], "provider", {
        "kind": "synthetic", "model_id": "synthetic", "layer_indices": [6, 7],
        "hidden_dim": 32, "endpoint_or_path": "", "seed": 0})
    dsi_kwargs = _take(top["dsi"], "dsi", {
        "mode": "pooled", "layer_indices": [6, 7], "min_sentences": 3,
        "engine": "blocked"})
    ana = _take(top["analysis"], "analysis", {
        "selections": list(AnalysisConfig().selections),
        "author_bins": [list(b) for b in DEFAULT_AUTHOR_BINS],
        "year_ranges": [list(r) for r in DEFAULT_YEAR_RANGES],
        "horizon_years": 5, "snapshot_year": 2025,
        "models": ["simple", "full"], "pairwise_with": None})

    overrides = overrides or {}
    try:
        cfg = PipelineConfig(
            corpus_path=corpus["path"],
            corpus_format=corpus["format"],
            field_map=corpus["field_map"],
            eligibility=EligibilityPolicy(**elig_kwargs),
            segmenter_scope=seg["scope"],
            segmenter_min_docs=int(seg["min_docs_per_subject"]),
            vocab_path=top["vocab"],
            provider=ProviderSpec(
                kind=prov_kwargs["kind"],
                model_id=prov_kwargs["model_id"],
                layer_indices=tuple(prov_kwargs["layer_indices"]),
                hidden_dim=int(prov_kwargs["hidden_dim"]),
                endpoint_or_path=prov_kwargs["endpoint_or_path"],
                seed=int(prov_kwargs["seed"]),
            ),
            dsi=DsiConfig(
                mode=dsi_kwargs["mode"],
                layer_indices=tuple(dsi_kwargs["layer_indices"]),
                min_sentences=int(dsi_kwargs["min_sentences"]),
                engine=dsi_kwargs["engine"],
            ),
            analysis=AnalysisConfig(
                selections=tuple(ana["selections"]),
                author_bins=_tuples(ana["author_bins"], 2, "analysis.author_bins"),
                year_ranges=_tuples(ana["year_ranges"], 2, "analysis.year_ranges"),
                horizon_years=int(ana["horizon_years"]),
                snapshot_year=int(ana["snapshot_year"]),
                models=tuple(ana["models"]),
                pairwise_with=ana["pairwise_with"],
            ),
            out_dir=str(overrides.get("out", top["out"])),
            seed=int(overrides.get("seed", top["seed"])),
            jobs=int(overrides.get("jobs", top["jobs"])),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
