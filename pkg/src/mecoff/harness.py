"""Monte-Carlo sweep runner with deterministic seeding and CSV output."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import logging
import time

import numpy as np

from .baselines import SCHEME_IDS, run_scheme
from .scenario import ScenarioConfig, generate_scenario

log = logging.getLogger(__name__)

CSV_HEADER = (
    "sweep_param,sweep_value,scheme,trial,seed,energy_j,max_delay_s,"
    "mean_delay_s,weighted_cost,offloaders,feasible,walltime_ms,iterations"
)

SWEEPABLE = ("num_devices", "tau_max")


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    trials: int
    schemes: tuple[str, ...]
    base_config: ScenarioConfig
    master_seed: int
    record_walltime: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.param not in SWEEPABLE:
            raise ValueError(f"sweep parameter must be one of {SWEEPABLE}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = [s for s in self.schemes if s not in SCHEME_IDS]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; expected subset of {SCHEME_IDS}")
        if not self.schemes:
            raise ValueError("at least one scheme is required")


@dataclasses.dataclass(frozen=True)
class ResultRow:
    sweep_param: str
    sweep_value: float
    scheme: str
    trial: int
    seed: int
    energy_j: float
    max_delay_s: float
    mean_delay_s: float
    weighted_cost: float
    offloaders: int
    feasible: bool
    walltime_ms: float
    iterations: int
    error: str = ""  # not serialized; signals a scheme failure on this cell


def child_seed(master_seed: int, value, trial: int) -> int:
    """Deterministic per-cell seed from the master seed, value and trial."""
    text = f"{master_seed}|{value!r}|{trial}".encode()
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _cell_config(base: ScenarioConfig, param: str, value, seed: int) -> ScenarioConfig:
    if param == "num_devices":
        return dataclasses.replace(base, num_devices=int(value), seed=seed)
    return dataclasses.replace(base, tau_max=float(value), seed=seed)


def _run_cell(spec: SweepSpec, value, trial: int) -> list[ResultRow]:
    seed = child_seed(spec.master_seed, value, trial)
    cfg = _cell_config(spec.base_config, spec.param, value, seed)
    scenario = generate_scenario(cfg)
    rows = []
    for scheme in spec.schemes:
        start = time.perf_counter()
        try:
            result = run_scheme(scheme, scenario)
            walltime = (time.perf_counter() - start) * 1e3
            rows.append(
                ResultRow(
                    sweep_param=spec.param,
                    sweep_value=float(value),
                    scheme=scheme,
                    trial=trial,
                    seed=seed,
                    energy_j=result.cost.total_energy,
                    max_delay_s=result.cost.max_delay,
                    mean_delay_s=result.cost.mean_delay,
                    weighted_cost=result.cost.weighted_cost,
                    offloaders=int(result.cost.offload_mask.sum()),
                    feasible=result.cost.feasible,
                    walltime_ms=walltime if spec.record_walltime else 0.0,
                    iterations=result.iterations,
                )
            )
        except Exception as exc:  # keep sweeping; the row records the failure
            log.error("scheme %s failed on %s=%r trial %d: %s", scheme, spec.param, value, trial, exc)
            rows.append(
                ResultRow(
                    sweep_param=spec.param,
                    sweep_value=float(value),
                    scheme=scheme,
                    trial=trial,
                    seed=seed,
                    energy_j=0.0,
                    max_delay_s=0.0,
                    mean_delay_s=0.0,
                    weighted_cost=0.0,
                    offloaders=0,
                    feasible=False,
                    walltime_ms=0.0,
                    iterations=0,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return rows


def run_sweep(spec: SweepSpec) -> list[ResultRow]:
    """All (value, trial) cells; every scheme sees the same scenario per cell."""
    cells = [(value, trial) for value in spec.values for trial in range(spec.trials)]
    rows: list[ResultRow] = []
    if spec.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_cell, spec, value, trial) for value, trial in cells]
            for future in futures:
                rows.extend(future.result())
    else:
        for value, trial in cells:
            rows.extend(_run_cell(spec, value, trial))
    rows.sort(key=lambda r: (r.sweep_value, r.scheme, r.trial))
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Fixed-header CSV, 9 significant digits, '\\n' newlines, no locale."""
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fields = (
                r.sweep_param,
                _fmt(r.sweep_value),
                r.scheme,
                str(r.trial),
                str(r.seed),
                _fmt(r.energy_j),
                _fmt(r.max_delay_s),
                _fmt(r.mean_delay_s),
                _fmt(r.weighted_cost),
                str(r.offloaders),
                str(int(r.feasible)),
                _fmt(r.walltime_ms),
                str(r.iterations),
            )
            fh.write(",".join(fields) + "\n")


def read_csv(path: str) -> list[ResultRow]:
    """Parse a sweep CSV back into rows (walltime and errors as stored)."""
    rows = []
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 13:
                raise ValueError(f"malformed CSV line: {line!r}")
            rows.append(
                ResultRow(
                    sweep_param=parts[0],
                    sweep_value=float(parts[1]),
                    scheme=parts[2],
                    trial=int(parts[3]),
                    seed=int(parts[4]),
                    energy_j=float(parts[5]),
                    max_delay_s=float(parts[6]),
                    mean_delay_s=float(parts[7]),
                    weighted_cost=float(parts[8]),
                    offloaders=int(parts[9]),
                    feasible=parts[10] == "1",
                    walltime_ms=float(parts[11]),
                    iterations=int(parts[12]),
                )
            )
    return rows


def summarize(rows: list[ResultRow]):
    """Aggregate means and normal 95% intervals per (param, value, scheme).

    Returns a list of dicts sorted by (param, value, scheme); separate from
    the sweep so plots and tables always derive from raw rows.
    """
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.sweep_param, r.sweep_value, r.scheme), []).append(r)
    out = []
    for key in sorted(groups):
        members = groups[key]
        energies = np.array([m.energy_j for m in members])
        delays = np.array([m.max_delay_s for m in members])
        costs = np.array([m.weighted_cost for m in members])
        n = len(members)
        half = 1.96 * energies.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        out.append(
            {
                "sweep_param": key[0],
                "sweep_value": key[1],
                "scheme": key[2],
                "trials": n,
                "mean_energy_j": float(energies.mean()),
                "energy_ci95": float(half),
                "mean_max_delay_s": float(delays.mean()),
                "mean_weighted_cost": float(costs.mean()),
                "feasible_fraction": float(np.mean([m.feasible for m in members])),
            }
        )
    return out
