"""Command-line entry point: ``run``, ``sweep``, ``eki`` and ``table``.

Exit status is 0 on success, 1 when a filter diverges (or, for ``sweep``,
when every inflation value diverges) and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import harness
from .config import OUTPUT_ENV, load_config
from .errors import NumericalError

EXIT_DIVERGED = 1
EXIT_USAGE = 2


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlbayes", description="Ensemble data assimilation experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat YAML experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", help=f"overrides the config and ${OUTPUT_ENV}")
        p.add_argument("--jobs", type=int, dest="n_jobs", help="worker processes")

    run = sub.add_parser("run", help="one twin experiment")
    common(run)
    run.add_argument("--method", choices=("eakf", "nlbu"))
    run.add_argument("--ss", type=_on_off, dest="subsampling", metavar="on|off")
    run.add_argument("--cl", type=_on_off, dest="clustering", metavar="on|off")
    run.add_argument("--inflation", type=float)

    sweep = sub.add_parser("sweep", help="twin experiment over an inflation grid")
    common(sweep)
    sweep.add_argument("--inflation", required=True, help="start:stop:step, e.g. 1.0:1.5:0.05")
    sweep.add_argument("--method", choices=("eakf", "nlbu"))
    sweep.add_argument("--ss", type=_on_off, dest="subsampling", metavar="on|off")
    sweep.add_argument("--cl", type=_on_off, dest="clustering", metavar="on|off")

    eki = sub.add_parser("eki", help="Darcy ensemble Kalman inversion")
    common(eki)
    eki.add_argument("--methods", help="comma list such as eakf,nlbu+ss,nlbu")

    table = sub.add_parser("table", help="summarize *_summary.csv files in a directory")
    table.add_argument("directory")
    return ap


def _config(args, **extra):
    keys = ("seed", "output_dir", "n_jobs", "method", "subsampling", "clustering", "inflation")
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides.update(extra)
    return load_config(args.config, **overrides)


def _cmd_run(args) -> int:
    cfg = _config(args)
    record = harness.run_twin_experiment(cfg)
    cycles, summary = harness.save_run(cfg, record)
    row = record.summary_row()
    print(f"{row['method']}: prior {row['prior']:.4e}  post {row['post']:.4e}  "
          f"fallback {100 * row['fallback_fraction']:.1f}%")
    print(f"wrote {cycles} and {summary}")
    if record.diverged:
        print(f"diverged at cycle {record.diverged_at + 1}", file=sys.stderr)
        return EXIT_DIVERGED
    return 0


def _cmd_sweep(args) -> int:
    values = harness.parse_range(args.inflation)
    cfg = _config(args, inflation=None)
    rows, records = harness.sweep_inflation(cfg, values)
    os.makedirs(cfg.output_dir, exist_ok=True)
    base = harness.run_tag(cfg.replace(inflation=values[0])).replace(f"_infl{values[0]:g}", "")
    path = os.path.join(cfg.output_dir, f"{base}_sweep.csv")
    harness.write_sweep_csv(rows, path)
    for r in rows:
        mark = "  <- best" if r.best else ""
        print(f"inflation {r.inflation:.2f}: prior {r.prior:.4e}  post {r.post:.4e}{mark}")
    best = next(i for i, r in enumerate(rows) if r.best)
    harness.save_run(cfg.replace(inflation=values[best]), records[best])
    print(f"wrote {path}")
    return EXIT_DIVERGED if records[best].diverged else 0


def _cmd_eki(args) -> int:
    cfg = _config(args)
    if cfg.experiment != "darcy":
        raise ValueError("eki needs a config with experiment: darcy")
    methods = args.methods.split(",") if args.methods else None
    try:
        traces = harness.run_eki_experiment(cfg, methods)
    except NumericalError as exc:
        print(f"inversion failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for label, tr in traces.items():
        fb = sum(tr.fallback)
        print(f"{label}: {tr.iterations} iterations, final error {tr.error[-1]:.4e}, "
              f"misfit {tr.misfit[-1]:.4e}, {fb} fallback(s)")
    print(f"wrote CSVs to {cfg.output_dir}")
    return 0


def _cmd_table(args) -> int:
    rows = harness.read_summaries(args.directory)
    if not rows:
        print(f"no *_summary.csv files in {args.directory}", file=sys.stderr)
        return EXIT_USAGE
    print(harness.format_table(rows))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "eki": _cmd_eki, "table": _cmd_table}
    try:
        return handler[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
