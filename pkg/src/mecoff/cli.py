"""Command-line front end: sweeps, single runs, oracle checks, reports."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time

import numpy as np

from .baselines import SCHEME_IDS, run_scheme
from .harness import (
    ResultRow,
    SweepSpec,
    child_seed,
    read_csv,
    run_sweep,
    write_csv,
)
from .oracle import TooLarge, brute_force_optimal
from .pipeline import run_dm_mmco
from .scenario import InvalidConfig, ScenarioConfig, generate_scenario, load_config

log = logging.getLogger(__name__)

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the CLI reserves 2 for partial
    sweep failures, so usage problems exit 1 instead."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _setup_logging() -> None:
    name = os.environ.get("MECOFF_LOG", "warn").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if name and name not in _LOG_LEVELS:
        log.warning("MECOFF_LOG=%r not in %s; using warn", name, sorted(_LOG_LEVELS))


def _load_base_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _parse_schemes(text: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    unknown = [s for s in names if s not in SCHEME_IDS]
    if unknown:
        raise ValueError(f"unknown schemes {unknown}; available: {', '.join(SCHEME_IDS)}")
    if not names:
        raise ValueError("empty scheme list")
    return names


def _parse_values(text: str, param: str):
    items = [v.strip() for v in text.split(",") if v.strip()]
    if not items:
        raise ValueError("empty --values list")
    if param == "num_devices":
        return tuple(int(v) for v in items)
    return tuple(float(v) for v in items)


def _add_common(sub) -> None:
    sub.add_argument("--config", help="key=value scenario config file")
    sub.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    sub.add_argument(
        "--schemes",
        default=",".join(SCHEME_IDS),
        help=f"comma list from: {', '.join(SCHEME_IDS)}",
    )


def _cmd_sweep(args) -> int:
    base = _load_base_config(args)
    spec = SweepSpec(
        param=args.sweep,
        values=_parse_values(args.values, args.sweep),
        trials=args.trials,
        schemes=_parse_schemes(args.schemes),
        base_config=base,
        master_seed=args.seed if args.seed is not None else base.seed,
        workers=args.workers,
    )
    rows = run_sweep(spec)
    write_csv(rows, args.out)
    failures = [r for r in rows if r.error]
    print(f"wrote {len(rows)} rows to {args.out}")
    if failures:
        print(f"{len(failures)} rows failed; see log for details", file=sys.stderr)
        return 2
    return 0


def _cmd_single(args) -> int:
    base = _load_base_config(args)
    scenario = generate_scenario(base)
    schemes = _parse_schemes(args.schemes)
    rows = []
    print(f"scenario: K={base.num_devices} seed={base.seed}")
    print(f"{'scheme':<12} {'cost':>12} {'energy_j':>12} {'max_delay_s':>12} "
          f"{'offload':>8} {'feasible':>9}")
    failed = False
    for scheme in schemes:
        start = time.perf_counter()
        try:
            result = run_scheme(scheme, scenario)
        except Exception as exc:
            failed = True
            print(f"{scheme:<12} failed: {exc}", file=sys.stderr)
            continue
        wall = (time.perf_counter() - start) * 1e3
        cost = result.cost
        rows.append(
            ResultRow(
                sweep_param="num_devices",
                sweep_value=float(base.num_devices),
                scheme=scheme,
                trial=0,
                seed=base.seed,
                energy_j=cost.total_energy,
                max_delay_s=cost.max_delay,
                mean_delay_s=cost.mean_delay,
                weighted_cost=cost.weighted_cost,
                offloaders=int(cost.offload_mask.sum()),
                feasible=cost.feasible,
                walltime_ms=wall,
                iterations=result.iterations,
            )
        )
        print(f"{scheme:<12} {cost.weighted_cost:>12.6g} {cost.total_energy:>12.6g} "
              f"{cost.max_delay:>12.6g} {int(cost.offload_mask.sum()):>8d} "
              f"{str(cost.feasible):>9}")
    if args.out:
        write_csv(rows, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
    return 2 if failed else 0


def _cmd_oracle_check(args) -> int:
    base = _load_base_config(args)
    if base.num_devices > 12:
        raise TooLarge("oracle-check supports at most 12 devices")
    ratios = []
    for trial in range(args.trials):
        seed = child_seed(base.seed, "oracle-check", trial)
        scenario = generate_scenario(dataclasses.replace(base, seed=seed))
        pipeline = run_dm_mmco(scenario)
        _, _, oracle_cost = brute_force_optimal(scenario)
        ratio = pipeline.cost.weighted_cost / oracle_cost.weighted_cost
        ratios.append(ratio)
        print(
            f"trial {trial}: pipeline={pipeline.cost.weighted_cost:.9g} "
            f"oracle={oracle_cost.weighted_cost:.9g} ratio={ratio:.6f}"
        )
    arr = np.array(ratios)
    print(
        f"summary: {len(arr)} trials, mean ratio {arr.mean():.6f}, "
        f"worst {arr.max():.6f}, within 10% of oracle: {int((arr <= 1.1).sum())}/{len(arr)}"
    )
    return 0


def _cmd_report(args) -> int:
    from .report import render_report

    rows = read_csv(args.csv)
    written = render_report(rows, args.out)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mecoff",
        description="Joint task-offloading and uplink beamforming simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="Monte-Carlo parameter sweep to CSV")
    _add_common(sweep)
    sweep.add_argument("--sweep", required=True, choices=("num_devices", "tau_max"))
    sweep.add_argument("--values", required=True, help="comma-separated sweep values")
    sweep.add_argument("--trials", type=int, default=100)
    sweep.add_argument("--out", default="results.csv")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.set_defaults(func=_cmd_sweep)

    single = sub.add_parser("single", help="run all schemes on one scenario")
    _add_common(single)
    single.add_argument("--out", default=None, help="optional CSV output path")
    single.set_defaults(func=_cmd_single)

    oracle = sub.add_parser("oracle-check", help="pipeline vs exhaustive reference")
    oracle.add_argument("--config", help="key=value scenario config file")
    oracle.add_argument("--seed", type=int, default=None)
    oracle.add_argument("--trials", type=int, default=1)
    oracle.set_defaults(func=_cmd_oracle_check)

    report = sub.add_parser("report", help="aggregate table and figures from a CSV")
    report.add_argument("csv", help="CSV produced by the sweep subcommand")
    report.add_argument("--out", default="report", help="output directory")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfig, TooLarge, ValueError, OSError) as exc:
        print(f"mecoff: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
