"""Command-line entry point: stage subcommands plus a one-shot pipeline.

All stages read a TOML config (paths resolved relative to the config file)
and write under ``output_dir``; every config field can be overridden by a
flag of the same name. Exit codes: 0 ok, 2 config error, 3 data error,
4 endpoint error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import annotations as ann
from . import texparse
from .contexts import ALL_KINDS, ContextKind, build_context, load_families
from .errors import ConfigError, DataError, EndpointError, PipelineError
from .gateway import EndpointConfig, export_prompts, import_predictions, run_remote
from .jsonio import dump_json, dump_jsonl, load_json, load_jsonl
from .prompts import (
    PromptInstance,
    build_prompt_set,
    gold_from_text,
    load_templates,
)
from .report import render_full_report
from .scoring import EvalReport, EvalRow, evaluate
from .texparse import SegmentedDoc

log = logging.getLogger("sotapipe")

TEST_BUCKETS = ("test_fewshot", "test_zeroshot")


@dataclass
class PipelineConfig:
    corpus_dir: Path
    annotations_path: Path
    output_dir: Path
    negatives_path: Path | None = None
    context_kinds: tuple[ContextKind, ...] = ALL_KINDS
    sample_fraction: float = 0.5
    seed: int = 42
    test_fraction: float = 0.1
    partial_threshold: float = 0.5
    section_families: Path | None = None
    templates_path: Path | None = None
    endpoint: EndpointConfig | None = None

    def __post_init__(self):
        if not self.context_kinds:
            raise ConfigError("context_kinds must not be empty")
        if not 0 < self.sample_fraction <= 1:
            raise ConfigError(f"sample_fraction must be in (0, 1], got {self.sample_fraction}")


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    base = path.parent

    def rel(key: str, default=None):
        if key not in doc:
            return default
        return base / doc[key]

    try:
        endpoint = None
        if "endpoint" in doc:
            endpoint = EndpointConfig(**doc["endpoint"])
        kinds = tuple(ContextKind(k) for k in doc.get("context_kinds", [k.value for k in ALL_KINDS]))
        return PipelineConfig(
            corpus_dir=rel("corpus_dir"),
            annotations_path=rel("annotations_path"),
            output_dir=rel("output_dir", base / "out"),
            negatives_path=rel("negatives_path"),
            context_kinds=kinds,
            sample_fraction=doc.get("sample_fraction", 0.5),
            seed=doc.get("seed", 42),
            test_fraction=doc.get("test_fraction", 0.1),
            partial_threshold=doc.get("partial_threshold", 0.5),
            section_families=rel("section_families"),
            templates_path=rel("templates_path"),
            endpoint=endpoint,
        )
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"invalid config {path}: {e}") from e


# ---------------------------------------------------------------------------
# stage I/O layout
# ---------------------------------------------------------------------------

class Layout:
    def __init__(self, out: Path):
        self.out = out
        self.segmented = out / "segmented.jsonl"
        self.records = out / "records.json"
        self.split = out / "split.json"
        self.stats_json = out / "stats.json"
        self.stats_txt = out / "stats.txt"
        self.report_txt = out / "report.txt"

    def contexts(self, kind: ContextKind) -> Path:
        return self.out / "contexts" / f"{kind.value}.jsonl"

    def prompts(self, bucket: str, kind: ContextKind) -> Path:
        return self.out / "prompts" / f"{bucket}_{kind.value}.jsonl"

    def predictions(self, bucket: str, kind: ContextKind) -> Path:
        return self.out / "predictions" / f"{bucket}_{kind.value}.jsonl"

    def eval_json(self, bucket: str, kind: ContextKind) -> Path:
        return self.out / "eval" / f"{bucket}_{kind.value}.json"


def _load_segmented(layout: Layout) -> dict[str, SegmentedDoc]:
    if not layout.segmented.exists():
        raise DataError(f"{layout.segmented} missing; run 'ingest' first")
    return {
        row["paper_id"]: SegmentedDoc.from_dict(row) for _, row in load_jsonl(layout.segmented)
    }


def _load_records(cfg: PipelineConfig, layout: Layout) -> list[ann.PaperRecord]:
    if not layout.records.exists():
        raise DataError(f"{layout.records} missing; run 'label' first")
    docs = _load_segmented(layout)
    records = []
    for row in load_json(layout.records):
        quads = tuple(
            ann.TdmsQuadruple(q["task"], q["dataset"], q["metric"], q["score"])
            for q in row["tdms"]
        )
        rec = ann.PaperRecord(row["paper_id"], row["has_leaderboard"], quads)
        doc = docs.get(rec.paper_id)
        if doc is not None:
            rec = rec.with_source(doc)
        records.append(rec)
    return records


def _load_split(cfg: PipelineConfig, layout: Layout) -> ann.CorpusSplit:
    if not layout.split.exists():
        raise DataError(f"{layout.split} missing; run 'split' first")
    doc = load_json(layout.split)
    records = {r.paper_id: r for r in _load_records(cfg, layout)}

    def bucket(name: str) -> tuple[ann.PaperRecord, ...]:
        return tuple(records[pid] for pid in doc[name])

    return ann.CorpusSplit(bucket("train"), bucket("test_fewshot"), bucket("test_zeroshot"), doc["seed"])


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, layout: Layout) -> None:
    if cfg.corpus_dir is None or not cfg.corpus_dir.is_dir():
        raise DataError(f"corpus_dir {cfg.corpus_dir} is not a directory")
    paper_dirs = sorted(p for p in cfg.corpus_dir.iterdir() if p.is_dir())
    if not paper_dirs:
        raise DataError(f"no paper directories under {cfg.corpus_dir}")
    docs = [texparse.ingest_paper(p) for p in paper_dirs]
    layout.out.mkdir(parents=True, exist_ok=True)
    dump_jsonl((d.to_dict() for d in docs), layout.segmented)
    log.info("ingested %d papers -> %s", len(docs), layout.segmented)


def stage_contexts(cfg: PipelineConfig, layout: Layout) -> None:
    docs = _load_segmented(layout)
    families = load_families(cfg.section_families)
    (layout.out / "contexts").mkdir(parents=True, exist_ok=True)
    for kind in cfg.context_kinds:
        rows = (
            build_context(doc, kind, families).to_dict()
            for _, doc in sorted(docs.items())
        )
        n = dump_jsonl(rows, layout.contexts(kind))
        log.info("wrote %d %s contexts", n, kind.value)


def stage_label(cfg: PipelineConfig, layout: Layout) -> None:
    if cfg.annotations_path is None:
        raise ConfigError("annotations_path is not configured")
    records = ann.load_annotations(cfg.annotations_path)
    if cfg.negatives_path is not None:
        records = ann.attach_negatives(records, ann.load_negative_ids(cfg.negatives_path))
    docs = _load_segmented(layout)
    missing = [r.paper_id for r in records if r.paper_id not in docs]
    if missing:
        log.warning("%d labeled papers have no ingested source: %s", len(missing), ", ".join(missing[:5]))
    layout.out.mkdir(parents=True, exist_ok=True)
    dump_json(
        [
            {
                "paper_id": r.paper_id,
                "has_leaderboard": r.has_leaderboard,
                "tdms": [
                    {"task": q.task, "dataset": q.dataset, "metric": q.metric, "score": q.score}
                    for q in r.quadruples
                ],
            }
            for r in records
        ],
        layout.records,
    )
    log.info("labeled %d records -> %s", len(records), layout.records)


def stage_split(cfg: PipelineConfig, layout: Layout) -> None:
    records = _load_records(cfg, layout)
    split = ann.make_splits(records, cfg.test_fraction, cfg.seed)
    dump_json(split.to_dict(), layout.split)
    log.info(
        "split: %d train / %d few-shot / %d zero-shot",
        len(split.train), len(split.test_fewshot), len(split.test_zeroshot),
    )


def stage_stats(cfg: PipelineConfig, layout: Layout) -> None:
    records = _load_records(cfg, layout)
    columns: dict[str, ann.CorpusStats] = {}
    if layout.split.exists():
        split = _load_split(cfg, layout)
        columns["Train"] = ann.compute_stats(list(split.train))
        columns["Test-Few-shot"] = ann.compute_stats(list(split.test_fewshot))
        columns["Test Zero-shot"] = ann.compute_stats(list(split.test_zeroshot))
    else:
        columns["All"] = ann.compute_stats(records)
    table = ann.stats_table(columns)
    dump_json({name: st.to_dict() for name, st in columns.items()}, layout.stats_json)
    layout.stats_txt.write_text(table + "\n", encoding="utf-8")
    print(table)


def stage_prompts(cfg: PipelineConfig, layout: Layout, buckets: tuple[str, ...] | None = None) -> None:
    split = _load_split(cfg, layout)
    families = load_families(cfg.section_families)
    templates = load_templates(cfg.templates_path)
    (layout.out / "prompts").mkdir(parents=True, exist_ok=True)
    for bucket_name in buckets or ann.SPLIT_NAMES:
        bucket = [r for r in split.bucket(bucket_name) if r.source is not None]
        if not bucket:
            log.warning("bucket %s is empty; skipping", bucket_name)
            continue
        # training prompts are sampled; test prompts instantiate every paper
        fraction = cfg.sample_fraction if bucket_name == "train" else 1.0
        for kind in cfg.context_kinds:
            instances = build_prompt_set(
                bucket, kind, fraction, cfg.seed, templates=templates, families=families
            )
            export_prompts(instances, layout.prompts(bucket_name, kind))
            log.info("%s/%s: %d prompts", bucket_name, kind.value, len(instances))


def _load_prompt_rows(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError(f"{path} missing; run 'prompts' first")
    return [row for _, row in load_jsonl(path)]


def stage_infer(cfg: PipelineConfig, layout: Layout, buckets: tuple[str, ...] | None = None) -> None:
    if cfg.endpoint is None:
        raise ConfigError("no [endpoint] configured; cannot run remote inference")
    (layout.out / "predictions").mkdir(parents=True, exist_ok=True)
    for bucket_name in buckets or TEST_BUCKETS:
        for kind in cfg.context_kinds:
            rows = _load_prompt_rows(layout.prompts(bucket_name, kind))
            instances = [
                PromptInstance(
                    instance_id=row["id"],
                    paper_id=row["paper_id"],
                    template_id=row["template_id"],
                    context_kind=ContextKind(row["context_kind"]),
                    prompt=row["prompt"],
                    gold=gold_from_text(row["gold"]),
                )
                for row in rows
            ]
            run = run_remote(
                instances,
                cfg.endpoint,
                run_id=f"{bucket_name}_{kind.value}",
                state_dir=layout.out / "runs",
            )
            dump_jsonl(
                ({"id": iid, "output": out} for iid, out in sorted(run.outputs.items())),
                layout.predictions(bucket_name, kind),
            )
            n_ok = len(run.ok_ids())
            log.info("%s/%s: %d/%d ok", bucket_name, kind.value, n_ok, len(instances))


def stage_eval(
    cfg: PipelineConfig,
    layout: Layout,
    buckets: tuple[str, ...] | None = None,
    template_ids: tuple[str, ...] | None = None,
) -> list[EvalReport]:
    (layout.out / "eval").mkdir(parents=True, exist_ok=True)
    reports = []
    for bucket_name in buckets or TEST_BUCKETS:
        for kind in cfg.context_kinds:
            prompt_rows = _load_prompt_rows(layout.prompts(bucket_name, kind))
            pred_path = layout.predictions(bucket_name, kind)
            if not pred_path.exists():
                raise DataError(f"{pred_path} missing; run 'infer' first")
            known = {row["id"] for row in prompt_rows}
            outputs = {p.instance_id: p.raw_output for p in import_predictions(pred_path, known)}
            rows = [
                EvalRow(
                    instance_id=row["id"],
                    template_id=row["template_id"],
                    gold=gold_from_text(row["gold"]),
                    raw_output=outputs.get(row["id"], ""),
                )
                for row in prompt_rows
            ]
            report = evaluate(
                rows, bucket_name, kind,
                partial_threshold=cfg.partial_threshold, template_ids=template_ids,
            )
            dump_json(report.to_dict(), layout.eval_json(bucket_name, kind))
            reports.append(report)
            log.info("evaluated %s/%s (%d instances)", bucket_name, kind.value, len(rows))
    return reports


def _load_reports(layout: Layout, buckets: tuple[str, ...], kinds) -> list[EvalReport]:
    from .scoring import MetricBlock, Prf

    reports = []
    for bucket_name in buckets:
        for kind in kinds:
            path = layout.eval_json(bucket_name, kind)
            if not path.exists():
                continue
            doc = load_json(path)

            def block(d: dict) -> MetricBlock:
                return MetricBlock(
                    n=d["n"], n_positive=d["n_positive"], n_negative=d["n_negative"],
                    n_missing=d["n_missing"], rouge1=d["rouge1"], rouge2=d["rouge2"],
                    rougeL=d["rougeL"], rougeLsum=d["rougeLsum"],
                    general_accuracy=d["general_accuracy"],
                    elements={
                        mode: {f: Prf(**prf) for f, prf in fields.items()}
                        for mode, fields in d["elements"].items()
                    },
                )

            reports.append(
                EvalReport(
                    split=doc["split"],
                    context_kind=ContextKind(doc["context_kind"]),
                    per_template={t: block(b) for t, b in doc["per_template"].items()},
                    overall=block(doc["overall"]),
                )
            )
    if not reports:
        raise DataError("no evaluation reports found; run 'eval' first")
    return reports


def stage_report(cfg: PipelineConfig, layout: Layout, buckets, per_template: bool) -> None:
    reports = _load_reports(layout, buckets or TEST_BUCKETS, cfg.context_kinds)
    text = render_full_report(reports, per_template=per_template)
    layout.report_txt.write_text(text, encoding="utf-8")
    print(text, end="")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sotapipe",
        description="Corpus, prompt, and evaluation pipeline for leaderboard quadruple extraction.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML pipeline configuration")
        p.add_argument("--corpus-dir", help="override corpus_dir")
        p.add_argument("--annotations", help="override annotations_path")
        p.add_argument("--negatives", help="override negatives_path")
        p.add_argument("--kinds", help="comma list of context kinds (e.g. DocTAET,DocREC)")
        p.add_argument("--fraction", type=float, help="override sample_fraction")
        p.add_argument("--test-fraction", type=float, help="override test_fraction")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--out", help="override output_dir")
        p.add_argument("--split", help="comma list of split buckets to process")
        p.add_argument("--template", help="comma list of template ids (eval/report filter)")
        p.add_argument("--per-template", action="store_true", help="report per-template rows")
        p.add_argument("--endpoint-url", help="override endpoint base_url")
        p.add_argument("--endpoint-model", help="override endpoint model_name")
        return p

    for name, help_text in (
        ("ingest", "parse LaTeX sources into segmented documents"),
        ("contexts", "build context renderings for each paper"),
        ("label", "attach quadruple annotations and negatives"),
        ("split", "build the train/few-shot/zero-shot split"),
        ("stats", "corpus statistics table"),
        ("prompts", "instantiate instruction templates into prompt sets"),
        ("infer", "run prompts against the configured endpoint"),
        ("eval", "score predictions against gold answers"),
        ("report", "render evaluation tables"),
        ("pipeline", "run every stage in order"),
    ):
        add(name, help_text)
    return parser


def _apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    updates = {}
    if args.corpus_dir:
        updates["corpus_dir"] = Path(args.corpus_dir)
    if args.annotations:
        updates["annotations_path"] = Path(args.annotations)
    if args.negatives:
        updates["negatives_path"] = Path(args.negatives)
    if args.kinds:
        updates["context_kinds"] = tuple(ContextKind(k.strip()) for k in args.kinds.split(","))
    if args.fraction is not None:
        updates["sample_fraction"] = args.fraction
    if args.test_fraction is not None:
        updates["test_fraction"] = args.test_fraction
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out:
        updates["output_dir"] = Path(args.out)
    endpoint = cfg.endpoint
    if args.endpoint_url:
        base = endpoint or EndpointConfig(base_url=args.endpoint_url)
        endpoint = dataclasses.replace(base, base_url=args.endpoint_url)
    if args.endpoint_model and endpoint is not None:
        endpoint = dataclasses.replace(endpoint, model_name=args.endpoint_model)
    if endpoint is not cfg.endpoint:
        updates["endpoint"] = endpoint
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    layout = Layout(cfg.output_dir)
    buckets = tuple(s.strip() for s in args.split.split(",")) if args.split else None
    templates = tuple(t.strip() for t in args.template.split(",")) if args.template else None

    stage = args.command
    try:
        if stage == "ingest":
            stage_ingest(cfg, layout)
        elif stage == "contexts":
            stage_contexts(cfg, layout)
        elif stage == "label":
            stage_label(cfg, layout)
        elif stage == "split":
            stage_split(cfg, layout)
        elif stage == "stats":
            stage_stats(cfg, layout)
        elif stage == "prompts":
            stage_prompts(cfg, layout, buckets)
        elif stage == "infer":
            stage_infer(cfg, layout, buckets)
        elif stage == "eval":
            stage_eval(cfg, layout, buckets, templates)
        elif stage == "report":
            stage_report(cfg, layout, buckets, args.per_template)
        elif stage == "pipeline":
            for stage, fn in (
                ("ingest", lambda: stage_ingest(cfg, layout)),
                ("contexts", lambda: stage_contexts(cfg, layout)),
                ("label", lambda: stage_label(cfg, layout)),
                ("split", lambda: stage_split(cfg, layout)),
                ("stats", lambda: stage_stats(cfg, layout)),
                ("prompts", lambda: stage_prompts(cfg, layout, None)),
            ):
                fn()
            if cfg.endpoint is None:
                log.warning("no endpoint configured: stopping after prompt generation")
            else:
                for stage, fn in (
                    ("infer", lambda: stage_infer(cfg, layout, None)),
                    ("eval", lambda: stage_eval(cfg, layout, None, templates)),
                    ("report", lambda: stage_report(cfg, layout, None, args.per_template)),
                ):
                    fn()
    except PipelineError as e:
        _fail(stage, e)
        if isinstance(e, ConfigError):
            return 2
        if isinstance(e, EndpointError):
            return 4
        return 3
    except OSError as e:
        _fail(stage, e)
        return 3
    return 0


def _fail(stage: str, exc: Exception) -> None:
    message = str(exc).replace("\n", " ")
    print(f"error: {stage}: {type(exc).__name__}: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except ConfigError as e:
        _fail("config", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
