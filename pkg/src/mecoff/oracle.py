"""Exhaustive references for tests; never imported by the production paths."""

from __future__ import annotations

import numpy as np

from .beamforming import BeamformingSolution, InnerInfeasible, solve_beamforming
from .decision import OffloadDecision, QcqpInstance, build_qcqp
from .scenario import Scenario
from .system_model import CostBreakdown, cost_from_rates, rate_upper_bound

MAX_ENUM_DEVICES = 12


class TooLarge(ValueError):
    """Raised when the device count makes 2^K enumeration unreasonable."""


def _masks(n_devices: int):
    for code in range(2**n_devices):
        yield np.array([(code >> k) & 1 == 1 for k in range(n_devices)])


def _evaluate(scenario: Scenario, mask: np.ndarray):
    if not mask.any():
        zeros = np.zeros(scenario.num_devices)
        return None, cost_from_rates(scenario, mask, zeros, zeros)
    solution = solve_beamforming(scenario, tuple(int(k) for k in np.flatnonzero(mask)))
    cost = cost_from_rates(
        scenario, mask, solution.rates, solution.tx_powers, solution.transmission_delay
    )
    return solution, cost


def brute_force_optimal(
    scenario: Scenario,
) -> tuple[OffloadDecision, BeamformingSolution | None, CostBreakdown]:
    """Best decision vector over all 2^K assignments, shared transmit solver.

    Assignments whose transmission stage is infeasible are skipped (no
    repair), so the result isolates decision quality.  When no assignment is
    feasible the cheapest infeasible one is returned; its breakdown carries
    the violation flags.
    """
    kk = scenario.num_devices
    if kk > MAX_ENUM_DEVICES:
        raise TooLarge(f"{kk} devices means {2**kk} assignments; refusing above 2^12")

    best_feasible = None
    best_any = None
    for mask in _masks(kk):
        try:
            solution, cost = _evaluate(scenario, mask)
        except InnerInfeasible:
            continue
        entry = (cost.weighted_cost, mask, solution, cost)
        if best_any is None or entry[0] < best_any[0]:
            best_any = entry
        if cost.feasible and (best_feasible is None or entry[0] < best_feasible[0]):
            best_feasible = entry
    chosen = best_feasible if best_feasible is not None else best_any
    assert chosen is not None  # the all-local mask always evaluates
    _, mask, solution, cost = chosen
    decision = OffloadDecision(
        offload_mask=mask,
        scores=mask.astype(float),
        solver_status="exhaustive",
    )
    return decision, solution, cost


def qcqp_binary_optimal(
    scenario: Scenario, qcqp: QcqpInstance | None = None
) -> tuple[np.ndarray | None, float]:
    """Optimal value of the decision program over binary assignments.

    For a fixed assignment the continuous completions collapse: transmit
    power (hence upload energy) drops to zero, rates sit at their caps, and
    the shared upload phase at the largest bits-over-cap ratio among
    offloaders.  Deadline rows as modeled: offloaders need the upload phase
    within their deadline, local devices their local delay.  Returns
    (None, inf) when no assignment is feasible.  The value excludes the
    all-local constant, like the relaxation objective.
    """
    if qcqp is None:
        cfg = scenario.config
        bounds = np.array(
            [
                rate_upper_bound(
                    scenario.channels[k],
                    cfg.p_max,
                    cfg.streams,
                    cfg.bandwidth,
                    scenario.noise_power,
                )
                for k in range(scenario.num_devices)
            ]
        )
        qcqp = build_qcqp(scenario, bounds)
    kk = len(qcqp.task_bits)
    if kk > MAX_ENUM_DEVICES:
        raise TooLarge(f"{kk} devices means {2**kk} assignments; refusing above 2^12")

    lambda_t = scenario.config.lambda_t
    best_mask, best_value = None, np.inf
    for mask in _masks(kk):
        local = ~mask
        if np.any(qcqp.t_loc[local] > qcqp.tau_max[local]):
            continue
        if mask.any():
            t_star = float(np.max(qcqp.task_bits[mask] / qcqp.rate_bounds[mask]))
            if t_star > np.min(qcqp.tau_max[mask]):
                continue
        else:
            t_star = 0.0
        value = float(np.sum(qcqp.delta[mask]) + lambda_t * mask.sum() * t_star)
        if value < best_value:
            best_mask, best_value = mask, value
    return best_mask, best_value
