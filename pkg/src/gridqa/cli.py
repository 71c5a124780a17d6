"""gridqa command-line interface.

Subcommands compose the pipeline end-to-end or run any stage alone::

    gridqa adapt --format nextqa --in val.csv --videos vids/ --out m.jsonl
    gridqa preprocess --manifest m.jsonl --out run/ --n 3
    gridqa eval --manifest m.jsonl --grids run/grids --backend mock-oracle --out run/records.jsonl
    gridqa score --records run/records.jsonl --manifest m.jsonl
    gridqa run --config config.yaml
    gridqa ablate --ns 1,3,4 --manifest m.jsonl --out ablation/
    gridqa compare run_a/report.json run_b/report.json
    gridqa export-finetune --manifest m.jsonl --grids run/grids --out train.jsonl

Exit codes: 0 success, 1 partial failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, backend_kind, load_config
from .dataset import (
    AdaptReport,
    adapt_nextqa,
    adapt_star,
    export_finetune,
    load_manifest,
    save_manifest,
)
from .errors import ConfigInvalid, GridQaError
from .inference import load_records
from .pipeline import (
    ablate,
    config_fingerprint,
    evaluate,
    preprocess,
    run_all,
)
from .scoring import EvalReport, compare, render_ablation_table, score

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file; flags override its values")
    parser.add_argument("--out", help="output directory or file")
    parser.add_argument("--workers", type=int, help="decode/preprocess worker bound")
    parser.add_argument("--n", type=int, help="grid side N (default: dataset family)")
    parser.add_argument("--mode", choices=("direct", "explain"), help="prompt mode")


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", help="http | mock-fixed | mock-oracle")
    parser.add_argument("--endpoint", help="base URL for the http backend")
    parser.add_argument("--model", help="model name sent in requests")
    parser.add_argument("--max-in-flight", type=int, help="concurrent request bound")
    parser.add_argument("--timeout", type=float, help="per-request timeout (s)")
    parser.add_argument("--retries", type=int, help="retry count for transient failures")
    parser.add_argument("--fixed-response", help="reply used by the mock-fixed backend")


def _build_config(args: argparse.Namespace, *, default_out: str = "run") -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        manifest = getattr(args, "manifest", None)
        if not manifest:
            raise ConfigInvalid("--manifest (or --config) is required")
        cfg = RunConfig(manifest=Path(manifest), out=Path(args.out or default_out))

    if getattr(args, "manifest", None):
        cfg.manifest = Path(args.manifest)
    if getattr(args, "out", None):
        cfg.out = Path(args.out)
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "n", None):
        cfg.grid_side = args.n
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "side_px", None):
        cfg.side_px = args.side_px

    if getattr(args, "backend", None):
        cfg.backend.kind = backend_kind(args.backend)
    if getattr(args, "endpoint", None):
        cfg.backend.endpoint = args.endpoint
    if getattr(args, "model", None):
        cfg.backend.model_name = args.model
    if getattr(args, "max_in_flight", None):
        cfg.backend.max_in_flight = args.max_in_flight
    if getattr(args, "timeout", None):
        cfg.backend.timeout = args.timeout
    if getattr(args, "retries", None) is not None:
        cfg.backend.retries = args.retries
    if getattr(args, "fixed_response", None):
        cfg.backend.fixed_response = args.fixed_response
    return cfg


# --- subcommands -----------------------------------------------------------


def cmd_adapt(args: argparse.Namespace) -> int:
    report = AdaptReport()
    kwargs = dict(split=args.split, name=args.name, strict=not args.lenient, report=report)
    if args.format == "nextqa":
        manifest = adapt_nextqa(args.src, args.videos, **kwargs)
    else:
        manifest = adapt_star(args.src, args.videos, **kwargs)
    save_manifest(manifest, args.out)
    print(f"wrote {len(manifest)} items to {args.out} "
          f"(family={manifest.family()}, default N={manifest.default_grid_side})")
    if report.rejected:
        for row, reason in report.rejected:
            print(f"rejected row {row}: {reason}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    cfg.validate()
    manifest = load_manifest(cfg.manifest)
    result = preprocess(manifest, cfg)
    print(
        f"grids: {result.written} written, {result.skipped} up-to-date, "
        f"{len(result.failures)} failed (N={result.grid_side}, out={result.grids_dir})"
    )
    for qid, reason in result.failures:
        print(f"failed {qid}: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    if args.grids:
        grids_dir = Path(args.grids)
    else:
        grids_dir = Path(cfg.out) / "grids"
    records_path = Path(args.records_out) if args.records_out else Path(cfg.out) / "records.jsonl"
    cfg.validate()
    manifest = load_manifest(cfg.manifest)
    records = evaluate(manifest, grids_dir, cfg, records_path=records_path)
    failed = sum(1 for r in records if r.status == "transport_error")
    parse_errors = sum(1 for r in records if r.status == "parse_error")
    print(f"{len(records)} records -> {records_path} "
          f"({failed} transport errors, {parse_errors} parse errors)")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    records = load_records(args.records)
    report = score(records, manifest, config_fingerprint=args.fingerprint or "")
    print(report.render_table(), end="")
    if args.out:
        report.save(args.out)
    if args.table_out:
        Path(args.table_out).write_text(report.render_table(), encoding="utf-8")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    outcome = run_all(cfg)
    print(outcome.report.render_table(), end="")
    print(f"report: {outcome.report_path}")
    for qid, reason in outcome.preprocess_result.failures:
        print(f"failed {qid}: {reason}", file=sys.stderr)
    return outcome.exit_code


def cmd_ablate(args: argparse.Namespace) -> int:
    try:
        grid_sides = [int(part) for part in args.ns.split(",") if part.strip()]
    except ValueError:
        raise ConfigInvalid(f"--ns must be comma-separated integers, got {args.ns!r}") from None
    cfg = _build_config(args, default_out="ablation")
    results = ablate(cfg, grid_sides)
    print(render_ablation_table(results), end="")
    print(f"artifacts under {cfg.out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    reports = [EvalReport.load(path) for path in args.reports]
    labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.reports]
    print(compare(reports, labels), end="")
    return EXIT_OK


def cmd_export_finetune(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    count = export_finetune(
        manifest,
        args.grids,
        args.out,
        grid_side=args.n,
        include_suffix=not args.no_suffix,
    )
    print(f"wrote {count} finetune records to {args.out}")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridqa",
        description="Grid-image VideoQA pipeline: sample, composite, infer, score.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_adapt = sub.add_parser("adapt", help="normalize an upstream dataset into a manifest")
    p_adapt.add_argument("--format", required=True, choices=("nextqa", "star"))
    p_adapt.add_argument("--in", dest="src", required=True, help="source CSV/JSON file")
    p_adapt.add_argument("--videos", required=True, help="root directory of videos")
    p_adapt.add_argument("--out", required=True, help="manifest JSONL to write")
    p_adapt.add_argument("--split", default="val", choices=("train", "val", "test"))
    p_adapt.add_argument("--name", default=None, help="manifest name (default: file stem)")
    p_adapt.add_argument("--lenient", action="store_true",
                         help="skip and report bad rows instead of failing")
    p_adapt.set_defaults(func=cmd_adapt)

    p_pre = sub.add_parser("preprocess", help="sample frames and write grid images")
    p_pre.add_argument("--manifest", help="manifest JSONL")
    p_pre.add_argument("--side-px", type=int, dest="side_px", help="grid image side (default 336)")
    _add_common_flags(p_pre)
    p_pre.set_defaults(func=cmd_preprocess)

    p_eval = sub.add_parser("eval", help="run backend inference over a manifest")
    p_eval.add_argument("--manifest", help="manifest JSONL")
    p_eval.add_argument("--grids", help="directory holding grid images")
    p_eval.add_argument("--records-out", dest="records_out",
                        help="records JSONL (doubles as resume file)")
    _add_common_flags(p_eval)
    _add_backend_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_score = sub.add_parser("score", help="score records against a manifest")
    p_score.add_argument("--records", required=True)
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--out", help="machine-readable report JSON path")
    p_score.add_argument("--table-out", dest="table_out", help="rendered table path")
    p_score.add_argument("--fingerprint", help="config fingerprint to embed")
    p_score.set_defaults(func=cmd_score)

    p_run = sub.add_parser("run", help="preprocess + eval + score in one run directory")
    p_run.add_argument("--manifest", help="manifest JSONL")
    p_run.add_argument("--side-px", type=int, dest="side_px")
    _add_common_flags(p_run)
    _add_backend_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ablate = sub.add_parser("ablate", help="run the pipeline per grid size and compare")
    p_ablate.add_argument("--ns", required=True, help="comma-separated grid sides, e.g. 1,3,4")
    p_ablate.add_argument("--manifest", help="manifest JSONL")
    p_ablate.add_argument("--side-px", type=int, dest="side_px")
    _add_common_flags(p_ablate)
    _add_backend_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_cmp = sub.add_parser("compare", help="compare saved report JSON files")
    p_cmp.add_argument("reports", nargs="+", help="report.json paths (first is baseline)")
    p_cmp.add_argument("--labels", help="comma-separated row labels")
    p_cmp.set_defaults(func=cmd_compare)

    p_exp = sub.add_parser("export-finetune", help="emit instruction-tuning records")
    p_exp.add_argument("--manifest", required=True)
    p_exp.add_argument("--grids", required=True, help="directory holding grid images")
    p_exp.add_argument("--out", required=True, help="records JSONL to write")
    p_exp.add_argument("--n", type=int, default=None, help="grid side used in filenames")
    p_exp.add_argument("--no-suffix", action="store_true",
                       help="omit the answer-format instruction line")
    p_exp.set_defaults(func=cmd_export_finetune)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GridQaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
