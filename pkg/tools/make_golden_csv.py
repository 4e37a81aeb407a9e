"""Freeze a small sweep CSV so cross-session byte drift is caught in tests.

Restricted to the closed-form schemes; the solver-based schemes are covered
by in-session run-twice determinism checks instead, so solver tuning does
not invalidate the frozen bytes.
"""

from __future__ import annotations

from pathlib import Path

from mecoff.harness import SweepSpec, run_sweep, write_csv
from mecoff.scenario import ScenarioConfig

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden_sweep.csv"


def main() -> None:
    spec = SweepSpec(
        param="num_devices",
        values=(2, 3),
        trials=2,
        schemes=("local_only", "fdma", "tdma"),
        base_config=ScenarioConfig(),
        master_seed=97531,
        record_walltime=False,
    )
    rows = run_sweep(spec)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    write_csv(rows, str(OUT))
    print(f"wrote {OUT} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
