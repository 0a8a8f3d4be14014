"""Pipeline stages and the run manifest.

Each stage reads its inputs from the output directory (or the configured
corpus), writes deterministic data files, and records row counts, input
hashes, and output hashes in ``manifest.json``.  Re-running any stage
with identical inputs and configuration reproduces every data file
byte for byte; only the manifest's duration fields differ.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from . import analysis as ana
from .cache import write_cache
from .config import PipelineConfig
from .corpus import (
    BiblioRecord,
    FieldMap,
    FieldOfResearch,
    assign_fields,
    filter_eligible,
    parse_records,
    summarize,
    summary_to_rows,
)
from .dsi import DsiConfig, dsi_batch, dsi_multilayer
from .embedding import ProviderSpec, make_provider
from .errors import ConfigError, ProviderFailure
from .segmenter import SegmenterState, segment_document, train_segmenter
from .wordpiece import Vocabulary, tokenize

_FIELD_BY_LABEL = {f.value: f for f in FieldOfResearch}

SCORE_COLUMNS = ("record_id", "dsi", "n_sentences", "n_distances", "mode",
                 "model_id", "truncated_any", "error")


# ---------------------------------------------------------------------------
# Deterministic file helpers


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt_cell(row.get(c)) for c in columns])


def write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_json(path: Path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _subject_slug(subject: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", subject).strip("_").lower()


# ---------------------------------------------------------------------------
# Manifest and output-directory lock


class Manifest:
    """Accumulates run metadata across stages in manifest.json."""

    def __init__(self, out_dir: Path, cfg: PipelineConfig):
        self.path = out_dir / "manifest.json"
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {"tool_version": __version__, "config": cfg.snapshot(),
                         "inputs": {}, "stages": {}, "outputs": {}}
        self.data["tool_version"] = __version__
        self.data["config"] = cfg.snapshot()

    def record_input(self, path: Path) -> None:
        self.data["inputs"][str(path)] = sha256_file(path)

    def record_stage(self, name: str, counts: dict, duration_s: float,
                     outputs: Sequence[Path], out_dir: Path) -> None:
        self.data["stages"][name] = {**counts, "duration_s": duration_s}
        for p in outputs:
            self.data["outputs"][str(p.relative_to(out_dir))] = sha256_file(p)
        write_json(self.path, self.data)


@contextmanager
def output_lock(out_dir: Path):
    """Single-process ownership of the output directory."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory is locked by another run: {lock} "
            "(delete the lock file if that run is dead)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


@contextmanager
def _stage(manifest: Manifest, name: str, out_dir: Path):
    t0 = time.perf_counter()
    box: dict = {"counts": {}, "outputs": []}
    yield box
    manifest.record_stage(
        name, box["counts"], time.perf_counter() - t0, box["outputs"], out_dir
    )


# ---------------------------------------------------------------------------
# Corpus (de)serialization between stages


def _record_to_dict(rec: BiblioRecord) -> dict:
    return {
        "id": rec.record_id, "doi": rec.doi, "title": rec.title,
        "abstract": rec.abstract, "pub_year": rec.pub_year,
        "author_count": rec.author_count, "primary_subject": rec.primary_subject,
        "field": rec.field.value if rec.field else None,
        "cit3": rec.cit3, "cit5": rec.cit5, "cit_total": rec.cit_total,
    }


def _record_from_dict(obj: dict) -> BiblioRecord:
    return BiblioRecord(
        record_id=obj["id"], doi=obj.get("doi"), title=obj["title"],
        abstract=obj["abstract"], pub_year=int(obj["pub_year"]),
        author_count=int(obj["author_count"]),
        primary_subject=obj["primary_subject"],
        field=_FIELD_BY_LABEL.get(obj.get("field")),
        cit3=obj.get("cit3"), cit5=obj.get("cit5"), cit_total=obj.get("cit_total"),
    )


def load_corpus(out_dir: Path) -> list[BiblioRecord]:
    return [_record_from_dict(o) for o in read_jsonl(out_dir / "corpus.jsonl")]


def _load_vocab(cfg: PipelineConfig) -> Vocabulary:
    if cfg.vocab_path == "fixture":
        from importlib import resources

        with resources.as_file(
            resources.files("dsikit.data").joinpath("vocab_fixture.txt")
        ) as p:
            return Vocabulary.load(p)
    return Vocabulary.load(cfg.vocab_path)


def _load_field_map(cfg: PipelineConfig) -> FieldMap:
    if cfg.field_map == "shipped":
        return FieldMap.shipped()
    with open(cfg.field_map, encoding="utf-8") as fh:
        return FieldMap.from_csv(fh)


# ---------------------------------------------------------------------------
# Stages


def run_ingest(cfg: PipelineConfig) -> dict:
    """Parse, map, and filter the corpus; emit the normalized corpus,
    rejects and exclusions, and the author/citation summary table."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out, cfg)
    src = Path(cfg.corpus_path)
    manifest.record_input(src)

    with _stage(manifest, "ingest", out) as box:
        with open(src, encoding="utf-8") as fh:
            records, rejects = parse_records(fh, format=cfg.corpus_format)
        fmap = _load_field_map(cfg)
        kept, excluded = filter_eligible(records, cfg.eligibility, fmap)
        mapped, unmapped = assign_fields(kept, fmap)
        excluded += [(rec, f"unmapped subject: {rec.primary_subject}")
                     for rec in unmapped]

        corpus_path = out / "corpus.jsonl"
        write_jsonl(corpus_path, (_record_to_dict(r) for r in mapped))
        rejects_path = out / "rejects.jsonl"
        write_jsonl(rejects_path, ({"line": r.line, "reason": r.reason} for r in rejects))
        excluded_path = out / "excluded.jsonl"
        write_jsonl(excluded_path, ({"id": rec.record_id, "reason": reason}
                                    for rec, reason in excluded))
        table1_path = out / "table1.csv"
        rows = summary_to_rows(summarize(mapped))
        write_csv(table1_path, rows, list(rows[0].keys()))

        box["counts"] = {"parsed": len(records), "rejected": len(rejects),
                         "kept": len(mapped), "excluded": len(excluded)}
        box["outputs"] = [corpus_path, rejects_path, excluded_path, table1_path]
    return manifest.data["stages"]["ingest"]


def run_train_segmenter(cfg: PipelineConfig) -> dict:
    """Train boundary-detection states: one global state, plus one per
    subject that has enough documents when scope is per-subject."""
    out = Path(cfg.out_dir)
    manifest = Manifest(out, cfg)
    records = load_corpus(out)
    seg_dir = out / "segmenter"
    seg_dir.mkdir(exist_ok=True)

    with _stage(manifest, "train-segmenter", out) as box:
        texts = [r.document_text() for r in records]
        outputs = []
        global_state = train_segmenter(texts)
        global_path = seg_dir / "global.json"
        global_state.save(global_path)
        outputs.append(global_path)

        n_subject_states = 0
        if cfg.segmenter_scope == "per-subject":
            by_subject: dict[str, list[str]] = {}
            for rec in records:
                by_subject.setdefault(rec.primary_subject, []).append(
                    rec.document_text()
                )
            for subject in sorted(by_subject):
                docs = by_subject[subject]
                if len(docs) < cfg.segmenter_min_docs:
                    continue
                state = train_segmenter(docs)
                path = seg_dir / f"subject_{_subject_slug(subject)}.json"
                state.save(path)
                outputs.append(path)
                n_subject_states += 1

        box["counts"] = {"documents": len(records),
                         "subject_states": n_subject_states}
        box["outputs"] = outputs
    return manifest.data["stages"]["train-segmenter"]


def _segmenter_for(subject: str, seg_dir: Path, cache: dict) -> SegmenterState:
    slug = _subject_slug(subject)
    if slug not in cache:
        path = seg_dir / f"subject_{slug}.json"
        if not path.exists():
            path = seg_dir / "global.json"
        cache[slug] = SegmenterState.load(path) if path.exists() else SegmenterState.empty()
    return cache[slug]


def run_segment(cfg: PipelineConfig) -> dict:
    """Split each document into sentences using the trained states."""
    out = Path(cfg.out_dir)
    manifest = Manifest(out, cfg)
    records = load_corpus(out)
    seg_dir = out / "segmenter"

    with _stage(manifest, "segment", out) as box:
        cache: dict = {}
        rows = []
        n_sentences = 0
        for rec in records:
            state = _segmenter_for(rec.primary_subject, seg_dir, cache)
            _, spans = segment_document(rec.title, rec.abstract, state)
            rows.append({
                "id": rec.record_id,
                "subject": rec.primary_subject,
                "sentences": [s.text for s in spans],
            })
            n_sentences += len(spans)
        path = out / "sentences.jsonl"
        write_jsonl(path, rows)
        box["counts"] = {"documents": len(rows), "sentences": n_sentences}
        box["outputs"] = [path]
    return manifest.data["stages"]["segment"]


def _tokenized_docs(cfg: PipelineConfig, out: Path):
    vocab = _load_vocab(cfg)
    docs = []
    for row in read_jsonl(out / "sentences.jsonl"):
        sentences = [tokenize(s, vocab) for s in row["sentences"] if s.strip()]
        docs.append((row["id"], row["subject"], sentences))
    return docs


def run_embed(cfg: PipelineConfig) -> dict:
    """Materialize embeddings into the binary cache."""
    out = Path(cfg.out_dir)
    manifest = Manifest(out, cfg)
    if cfg.provider.kind == "cache":
        raise ConfigError("embed stage needs a generative provider (synthetic/sidecar)")
    provider = make_provider(cfg.provider)

    with _stage(manifest, "embed", out) as box:
        docs = _tokenized_docs(cfg, out)
        embedded = []
        for doc_id, _subject, sentences in docs:
            if not sentences:
                continue
            embedded.append((doc_id, provider.embed_document(sentences, doc_id=doc_id)))
        cache_path = out / "embeddings.dsic"
        write_cache(cache_path, embedded, cfg.provider)
        box["counts"] = {"documents": len(embedded)}
        box["outputs"] = [cache_path]
    return manifest.data["stages"]["embed"]


def _scoring_provider(cfg: PipelineConfig, out: Path):
    spec = cfg.provider
    if spec.kind == "cache" and not spec.endpoint_or_path:
        spec = ProviderSpec(
            kind="cache", model_id=spec.model_id, layer_indices=spec.layer_indices,
            hidden_dim=spec.hidden_dim,
            endpoint_or_path=str(out / "embeddings.dsic"), seed=spec.seed,
        )
    return make_provider(spec)


def score_rows_from_batch(batch_rows) -> list[dict]:
    rows = []
    for row in batch_rows:
        if row.score is not None:
            s = row.score
            rows.append({
                "record_id": row.record_id, "dsi": s.value,
                "n_sentences": s.n_sentences, "n_distances": s.n_distances,
                "mode": s.mode, "model_id": s.model_id,
                "truncated_any": s.truncated_any, "error": None,
            })
        else:
            rows.append({
                "record_id": row.record_id, "dsi": None, "n_sentences": None,
                "n_distances": None, "mode": None, "model_id": None,
                "truncated_any": None, "error": row.error,
            })
    return rows


def run_dsi(cfg: PipelineConfig) -> dict:
    """Score every document; one output row per document, input order."""
    out = Path(cfg.out_dir)
    manifest = Manifest(out, cfg)
    provider = _scoring_provider(cfg, out)

    t0 = time.perf_counter()
    docs = [(doc_id, sentences)
            for doc_id, _subject, sentences in _tokenized_docs(cfg, out)]
    try:
        batch = dsi_batch(docs, provider, cfg.dsi, parallelism=cfg.jobs)
    except ProviderFailure as exc:
        # Keep whatever was scored before the provider died.
        partial = out / "dsi_partial.csv"
        write_csv(partial, score_rows_from_batch(exc.partial_rows), SCORE_COLUMNS)
        manifest.record_stage(
            "dsi",
            {"documents": len(docs), "completed": len(exc.partial_rows),
             "aborted": True},
            time.perf_counter() - t0, [partial], out,
        )
        raise
    rows = score_rows_from_batch(batch)
    path = out / "dsi.csv"
    write_csv(path, rows, SCORE_COLUMNS)
    manifest.record_stage(
        "dsi",
        {"documents": len(rows), "errors": sum(1 for r in rows if r["error"])},
        time.perf_counter() - t0, [path], out,
    )
    return manifest.data["stages"]["dsi"]


def load_score_rows(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rows.append({
                "record_id": raw["record_id"],
                "dsi": float(raw["dsi"]) if raw["dsi"] else None,
                "n_sentences": int(raw["n_sentences"]) if raw["n_sentences"] else None,
                "n_distances": int(raw["n_distances"]) if raw["n_distances"] else None,
                "mode": raw["mode"] or None,
                "model_id": raw["model_id"] or None,
                "truncated_any": raw["truncated_any"] == "true",
                "error": raw["error"] or None,
            })
    return rows


def run_analyze(cfg: PipelineConfig) -> dict:
    """Emit the selected report bundle from the scored corpus."""
    out = Path(cfg.out_dir)
    manifest = Manifest(out, cfg)
    records = load_corpus(out)
    score_rows = load_score_rows(out / "dsi.csv")
    a = cfg.analysis
    adir = out / "analysis"
    adir.mkdir(exist_ok=True)

    with _stage(manifest, "analyze", out) as box:
        outputs = []

        def emit_csv(name, rows, columns):
            path = adir / name
            write_csv(path, rows, columns)
            outputs.append(path)

        if "table2" in a.selections:
            rows = ana.summary_by_field(records, score_rows)
            emit_csv("table2.csv", rows, list(rows[0].keys()))
        if "trend" in a.selections:
            rows = ana.trend_by_year(records, score_rows)
            emit_csv("trend.csv", rows,
                     ["field", "year", "n", "mean_dsi", "ci_low", "ci_high"])
        if "boxplot" in a.selections:
            rows = ana.boxplot_by_subject(records, score_rows)
            path = adir / "boxplot.jsonl"
            write_jsonl(path, rows)
            outputs.append(path)
        if "sensitivity-authors" in a.selections:
            rows = ana.author_sensitivity(records, score_rows, a.author_bins)
            emit_csv("sensitivity_authors.csv", rows,
                     ["window", "group", "n", "coefficient", "p_value", "method"])
        if "sensitivity-years" in a.selections:
            rows = ana.year_sensitivity(records, score_rows, a.year_ranges)
            emit_csv("sensitivity_years.csv", rows,
                     ["window", "group", "n", "coefficient", "p_value", "method"])
        if "models" in a.selections:
            reports = ana.fit_citation_models(
                records, score_rows, a.horizon_years, a.snapshot_year, a.models
            )
            for name, report in sorted(reports.items()):
                path = adir / f"model_{name}.json"
                write_json(path, report)
                outputs.append(path)
        if "qq" in a.selections:
            for model in a.models:
                rows = ana.model_qq_rows(records, score_rows, model,
                                         a.horizon_years, a.snapshot_year)
                emit_csv(f"qq_{model}.csv", rows, ["theoretical", "ordered"])
        if "pairwise" in a.selections:
            other = load_score_rows(Path(a.pairwise_with))
            points, summary = ana.pairwise_scores(score_rows, other)
            emit_csv("pairwise.csv", points, ["record_id", "dsi_a", "dsi_b"])
            path = adir / "pairwise_summary.json"
            write_json(path, summary)
            outputs.append(path)

        box["counts"] = {"records": len(records), "scored": sum(
            1 for r in score_rows if not r["error"])}
        box["outputs"] = outputs
    return manifest.data["stages"]["analyze"]


def run_compare_backends(cfg: PipelineConfig, threshold: float = 1e-5) -> dict:
    """Reference vs blocked scoring on the full corpus, with per-subject
    timing in total seconds and seconds per abstract."""
    out = Path(cfg.out_dir)
    manifest = Manifest(out, cfg)
    provider = _scoring_provider(cfg, out)

    with _stage(manifest, "compare-backends", out) as box:
        by_subject: dict[str, list] = {}
        for doc_id, subject, sentences in _tokenized_docs(cfg, out):
            if len(sentences) >= cfg.dsi.min_sentences:
                by_subject.setdefault(subject, []).append((doc_id, sentences))

        rows = []
        worst = 0.0
        per_doc_rows = []
        for subject in sorted(by_subject):
            docs = by_subject[subject]
            embedded = [
                (doc_id, provider.embed_document(sents, doc_id=doc_id))
                for doc_id, sents in docs
            ]
            timings = {}
            values = {}
            for engine in ("reference", "blocked"):
                cfg_e = DsiConfig(mode=cfg.dsi.mode, layer_indices=cfg.dsi.layer_indices,
                                  min_sentences=cfg.dsi.min_sentences, engine=engine)
                t0 = time.perf_counter()
                values[engine] = [dsi_multilayer(doc, cfg_e).value
                                  for _, doc in embedded]
                timings[engine] = time.perf_counter() - t0
            deltas = [abs(x - y) for x, y in zip(values["reference"], values["blocked"])]
            for (doc_id, _), delta in zip(docs, deltas):
                per_doc_rows.append({"record_id": doc_id, "subject": subject,
                                     "abs_delta": delta})
            worst = max(worst, max(deltas, default=0.0))
            n = len(docs)
            rows.append({
                "subject": subject, "n_docs": n,
                "reference_total_s": timings["reference"],
                "reference_per_abstract_s": timings["reference"] / n,
                "blocked_total_s": timings["blocked"],
                "blocked_per_abstract_s": timings["blocked"] / n,
                "max_abs_delta": max(deltas, default=0.0),
            })

        timing_path = out / "compare_backends.csv"
        write_csv(timing_path, rows, ["subject", "n_docs", "reference_total_s",
                                      "reference_per_abstract_s", "blocked_total_s",
                                      "blocked_per_abstract_s", "max_abs_delta"])
        diffs_path = out / "compare_backends_docs.csv"
        write_csv(diffs_path, per_doc_rows, ["record_id", "subject", "abs_delta"])
        summary_path = out / "compare_backends_summary.json"
        write_json(summary_path, {"max_abs_delta": worst, "threshold": threshold,
                                  "pass": worst < threshold})
        box["counts"] = {"documents": len(per_doc_rows)}
        box["outputs"] = [diffs_path, summary_path]

    result = dict(manifest.data["stages"]["compare-backends"])
    result["max_abs_delta"] = worst
    result["pass"] = worst < threshold
    return result
