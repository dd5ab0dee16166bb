"""Command line entry point: ``consilium run|report|validate-corpus|check-table1|convert-slices``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .backend import BackendError
from .core import VulnCategory
from .corpus import convert_slices, load_corpus, write_corpus
from .evalkit import (
    REPORTED_IMPROVEMENT_PCT,
    TABLE_TOLERANCE,
    improvement_deviation,
    improvement_summary,
    load_table1,
    report_from_table,
    table1_consistency,
)
from .runner import STORE_NAME, ExperimentPlan, report_store, run_experiment, write_report


def _cmd_run(args: argparse.Namespace) -> int:
    plan = ExperimentPlan.from_file(args.config)
    if args.backend:
        plan.backend = args.backend
    if args.script:
        plan.script = Path(args.script)
    if args.out:
        plan.out = Path(args.out)
    if args.parallelism is not None:
        plan.parallelism = args.parallelism
    if args.resume:
        plan.resume = True
    report = run_experiment(plan)
    sys.stdout.write(report.render_text())
    print(f"wrote {plan.out / STORE_NAME}, report.json, report.txt")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    store = Path(args.store)
    if store.is_dir():
        store = store / STORE_NAME
    if not store.exists():
        print(f"error: no transcript store at {store}", file=sys.stderr)
        return 2
    report = report_store(store)
    out = Path(args.out) if args.out else store.parent
    write_report(report, out, figures=not args.no_figures)
    sys.stdout.write(report.to_json() if args.json else report.render_text())
    return 0


def _cmd_validate_corpus(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.path)
    print(f"{args.path}: {len(corpus)} segments")
    for category, tally in corpus.summary().items():
        print(f"  {category}: {tally['vulnerable']} vulnerable, {tally['non_vulnerable']} non-vulnerable")
    return 0


def _cmd_convert_slices(args: argparse.Namespace) -> int:
    segments = convert_slices(args.src, VulnCategory.parse(args.category))
    write_corpus(segments, args.dest)
    print(f"wrote {len(segments)} segments to {args.dest}")
    return 0


def _cmd_check_table1(args: argparse.Namespace) -> int:
    rows = load_table1(args.fixture)
    violations = table1_consistency(rows, args.tolerance)
    print(f"Table 1: {len(rows)} precision/recall/F1 triples, tolerance {args.tolerance}")
    for row in violations:
        k = row.key
        print(f"  VIOLATION {k.group} {k.category} {k.approach} {k.prompt_style}: "
              f"P={row.precision} R={row.recall} F1={row.f1}")
    print(f"violations: {len(violations)}")

    report = report_from_table(rows)
    summary = improvement_summary(report.select("multi_role"), report.select("single_role"))
    deviation = improvement_deviation(summary)
    print("mean relative increase, uniform over (group, category, prompt style) cells:")
    for metric, value in summary.increase_pct.items():
        print(f"  {metric:9s} computed {value:6.2f}%  reported {REPORTED_IMPROVEMENT_PCT[metric]:6.2f}%  "
              f"deviation {deviation[metric]:+.2f} pp  ({summary.cells_used[metric]} cells)")
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consilium", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment plan")
    p.add_argument("--config", required=True, help="plan JSON file")
    p.add_argument("--backend", choices=["live", "scripted"])
    p.add_argument("--script", help="script JSON for the scripted backend")
    p.add_argument("--out", help="output directory")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--resume", action="store_true", help="skip discussions already in the store")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="recompute metrics from a transcript store")
    p.add_argument("store", help="transcripts.jsonl or the directory holding it")
    p.add_argument("--out", help="where to write report.json/report.txt/figures (default: next to the store)")
    p.add_argument("--json", action="store_true", help="print JSON instead of the text table")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("validate-corpus", help="check a corpus JSONL file and print counts")
    p.add_argument("path")
    p.set_defaults(func=_cmd_validate_corpus)

    p = sub.add_parser("check-table1", help="consistency checks over the Table 1 transcription")
    p.add_argument("--fixture", help="CSV transcription (default: bundled)")
    p.add_argument("--tolerance", type=float, default=TABLE_TOLERANCE)
    p.set_defaults(func=_cmd_check_table1)

    p = sub.add_parser("convert-slices", help="convert a slice text file into corpus JSONL")
    p.add_argument("src")
    p.add_argument("dest")
    p.add_argument("--category", required=True, choices=[c.value for c in VulnCategory])
    p.set_defaults(func=_cmd_convert_slices)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, BackendError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
