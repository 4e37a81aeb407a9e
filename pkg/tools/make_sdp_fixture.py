"""One-time cross-solver reference for the lifted decision SDP.

Builds the lifted relaxation for a seeded two-device cell, solves it with an
off-the-shelf conic solver through cvxpy, and freezes the optimal objective
(in the solver's scaled coordinates and unscaled back) as a JSON fixture.
cvxpy is a development-time tool only; the package itself never imports it.
"""

from __future__ import annotations

import json
from pathlib import Path

import cvxpy as cp
import numpy as np

from mecoff.decision import build_qcqp, lift_to_sdp
from mecoff.scenario import ScenarioConfig, generate_scenario
from mecoff.system_model import rate_upper_bound

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "sdp_reference.json"
SEED = 20240811
NUM_DEVICES = 2


def main() -> None:
    config = ScenarioConfig(num_devices=NUM_DEVICES, seed=SEED)
    scenario = generate_scenario(config)
    bounds = np.array(
        [
            rate_upper_bound(
                scenario.channels[k],
                config.p_max,
                config.streams,
                config.bandwidth,
                scenario.noise_power,
            )
            for k in range(NUM_DEVICES)
        ]
    )
    qcqp = build_qcqp(scenario, bounds)
    lifted = lift_to_sdp(qcqp)
    prob = lifted.problem

    dim = prob.c_matrix.shape[0]
    g = cp.Variable((dim, dim), symmetric=True)
    constraints = [g >> 0]
    for mat, rhs in zip(prob.eq_mats, prob.eq_rhs):
        constraints.append(cp.trace(mat @ g) == rhs)
    for mat, rhs in zip(prob.ineq_mats, prob.ineq_rhs):
        constraints.append(cp.trace(mat @ g) <= rhs)
    objective = cp.Minimize(cp.trace(prob.c_matrix @ g))
    problem = cp.Problem(objective, constraints)
    value = problem.solve(solver=cp.CLARABEL)

    payload = {
        "scenario_seed": SEED,
        "num_devices": NUM_DEVICES,
        "solver": "CLARABEL via cvxpy",
        "cvxpy_version": cp.__version__,
        "status": problem.status,
        "scaled_objective": float(value),
        "objective_scale": float(lifted.objective_scale),
        "unscaled_objective": float(value * lifted.objective_scale),
        "note": "scaled_objective is tr(C G*) of the row-normalized problem "
        "as handed to the interior-point solver; compare solve_lifted's "
        "objective_value against unscaled_objective",
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, indent=2) + "\n")
    print(json.dumps(payload, indent=2))


if __name__ == "__main__":
    main()
