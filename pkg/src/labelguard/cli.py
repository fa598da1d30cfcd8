"""Command-line entry point: ``labelguard verify|compare|make-fixture``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench, synthetic
from .network import DimensionError, NetworkFormatError, load_dataset, load_network, save_dataset, save_network
from .orchestrator import BACKENDS, VerifyConfig

log = logging.getLogger("labelguard")

# rough split throughput on desk-sized networks, used to turn --time-limit into a budget
SPLITS_PER_SECOND = 100


def _eps_values(args) -> list[float]:
    eps = list(args.eps or [])
    eps += [p / 255.0 for p in (args.eps_pixel or [])]
    return eps


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--net", required=True, type=Path, help="weight file")
    p.add_argument("--data", required=True, type=Path, help="CSV dataset: label, values...")
    p.add_argument("--eps", type=float, nargs="+", help="radii in normalized [0,1] units")
    p.add_argument("--eps-pixel", type=float, nargs="+", help="radii in 8-bit pixel steps (divided by 255)")
    p.add_argument("--backend", choices=BACKENDS, default="complete")
    p.add_argument("--relaxation", choices=["parallel", "area"], default="parallel")
    p.add_argument("--budget", type=int, default=None, help="split budget per label (default: unlimited)")
    p.add_argument("--time-limit", type=float, default=None,
                   help="seconds per label; converted to a split budget estimate when --budget is absent")
    p.add_argument("--no-clip", action="store_true", help="do not clip perturbed inputs to [0, 1]")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, type=Path, help="JSON report path")
    p.add_argument("--csv", type=Path, default=None, help="also write the per-eps summary table here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labelguard", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify every dataset row at every eps")
    _common(v)
    v.add_argument("--ranking", choices=["symbolic", "naive", "fixed"], default="symbolic")
    v.add_argument("--spot-check", type=int, default=0, metavar="N",
                   help="sample N points around each robust verdict as a sanity check (seeded by LG_SEED)")

    c = sub.add_parser("compare", help="baseline vs label-guided runs with time reduction rates")
    _common(c)

    f = sub.add_parser("make-fixture", help="write the synthetic speedup suite (network + dataset)")
    f.add_argument("--out-dir", required=True, type=Path)
    f.add_argument("--inputs", type=int, default=50)
    f.add_argument("--seed", type=int, default=3)
    return parser


def _budget(args) -> int | None:
    if args.budget is not None:
        return args.budget
    if args.time_limit is not None:
        return max(0, int(args.time_limit * SPLITS_PER_SECOND))
    return None


def _write(report: dict, args) -> None:
    bench.validate_report(report)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if args.csv is not None:
        args.csv.write_text(bench.comparison_table(report), encoding="utf-8")


def _make_fixture(args) -> int:
    suite = synthetic.speedup_suite(n_inputs=args.inputs, seed=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_network(suite.net, args.out_dir / "net.txt")
    save_dataset(suite.inputs, args.out_dir / "data.csv")
    print(f"wrote {args.out_dir / 'net.txt'} and {args.out_dir / 'data.csv'} (suggested eps {suite.eps})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "make-fixture":
        return _make_fixture(args)

    eps = _eps_values(args)
    if not eps:
        parser.error("give at least one radius with --eps or --eps-pixel")
    if any(e < 0 for e in eps):
        parser.error("radii must be non-negative")
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        net = load_network(args.net)
        inputs = load_dataset(args.data, net.input_dim)
        for x in inputs:
            x.check_against(net)
        cfg = VerifyConfig(
            backend=args.backend,
            ranking=getattr(args, "ranking", "symbolic"),
            split_budget=_budget(args),
            clip_inputs=not args.no_clip,
            relaxation=args.relaxation,
        )
    except (OSError, NetworkFormatError, DimensionError, ValueError) as exc:
        print(f"labelguard: error: {exc}", file=sys.stderr)
        return 2

    if args.command == "verify":
        seed = os.environ.get("LG_SEED")
        report = bench.run_verify(
            net, inputs, eps, cfg, args.workers, args.spot_check, None if seed is None else int(seed)
        )
        _write(report, args)
        for run in report["runs"]:
            s = run["summary"]
            print(f"eps={run['eps']:g}  valid={s['valid_count']}/{s['n']}  RST={s['rst']}  "
                  f"non-robust={s['non_robust_count']}  unknown={s['unknown_count']}  "
                  f"time={s['total_time']:.3f}s")
        return 0

    try:
        report = bench.run_compare(net, inputs, eps, cfg, args.workers)
        status = 0
    except bench.VerdictMismatch as exc:
        print(f"labelguard: error: {exc}", file=sys.stderr)
        report, status = exc.report, 3
    _write(report, args)
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    for row in report["rows"]:
        acc = "n/a" if row["ACC"] is None else f"{100 * row['ACC']:.2f}%"
        print(f"eps={row['eps']:g}  t_sort={row['t_sort_total']:.3f}s  T={row['T_baseline']:.3f}s  "
              f"T*={row['T_guided']:.3f}s  ACC={acc}  RST={row['RST_baseline']}  RST*={row['RST_guided']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
