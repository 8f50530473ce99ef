"""Command line entry point: plan, run, resume, merge, report, verify."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import orchestrate as orch
from .report import FIGURES, MissingScenarios, write_figure
from .verify import run_all

log = logging.getLogger("medpower")


def _manifest(args) -> orch.Manifest:
    return orch.build_grid(orch.load_config(args.config))


def cmd_plan(args) -> int:
    m = _manifest(args)
    out = Path(args.out)
    m.write(out / orch.MANIFEST_NAME)
    print(f"planned {len(m)} scenarios -> {out / orch.MANIFEST_NAME}")
    return 0


def _summarise(report: orch.ExecutionReport) -> int:
    print(
        f"targeted {len(report.targeted)}, completed {len(report.completed)}, "
        f"failed {len(report.failed)}, deferred by cap {len(report.skipped_by_cap)}"
    )
    return 0 if report.ok else 1


def cmd_run(args) -> int:
    m = _manifest(args)
    out = Path(args.out)
    manifest_path = out / orch.MANIFEST_NAME
    m.write(manifest_path)
    report = orch.execute(
        m, out, orch.parse_shard(args.shard), args.workers, args.cap, manifest_path=manifest_path
    )
    return _summarise(report)


def cmd_resume(args) -> int:
    m = _manifest(args)
    out = Path(args.out)
    report = orch.resume(
        out, m, orch.parse_shard(args.shard), args.workers, args.cap,
        manifest_path=out / orch.MANIFEST_NAME,
    )
    return _summarise(report)


def cmd_merge(args) -> int:
    m = _manifest(args) if args.config else None
    count = orch.merge_results(args.results, args.out, m)
    print(f"merged {count} scenario records -> {args.out}")
    return 0


def cmd_report(args) -> int:
    rows = orch.load_results(args.results)
    m = _manifest(args) if args.config else None
    try:
        written = write_figure(rows, args.figure, args.out, manifest=m)
    except MissingScenarios as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def cmd_verify(args) -> int:
    return 0 if run_all() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medpower", description=__doc__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="write the scenario manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    for name, func, help_text in (
        ("run", cmd_run, "run every scenario of a shard"),
        ("resume", cmd_resume, "run only scenarios without a valid record"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--shard", default="0/1", help="k/K: run ids congruent to k mod K")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--cap", type=int, default=None, help="max scenarios started this call")
        p.set_defaults(func=func)

    p = sub.add_parser("merge", help="concatenate result records into one table")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="check records against this grid")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("report", help="figure tables and charts")
    p.add_argument("--results", required=True, help="results directory or merged CSV")
    p.add_argument("--figure", type=int, required=True, choices=FIGURES)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="grid config, used to name missing scenario ids")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify", help="run the oracle self-checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (orch.ConfigInvalid, orch.ConfigMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
