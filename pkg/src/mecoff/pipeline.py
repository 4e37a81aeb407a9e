"""End-to-end decision + transmission pipeline for one scenario."""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .beamforming import BeamformingSolution, feasibility_repair
from .decision import OffloadDecision, dm_mmco_decide
from .scenario import Scenario
from .system_model import CostBreakdown, cost_from_rates

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PipelineResult:
    decision: OffloadDecision  # as returned by the relaxation stage
    offload_mask: np.ndarray  # final assignment after repair / fallback
    solution: BeamformingSolution | None
    cost: CostBreakdown
    repaired: tuple[int, ...]  # devices moved back to local by repair

    @property
    def iterations(self) -> int:
        return self.solution.iterations if self.solution is not None else 0


def _all_local_cost(scenario: Scenario) -> CostBreakdown:
    zeros = np.zeros(scenario.num_devices)
    return cost_from_rates(scenario, zeros.astype(bool), zeros, zeros)


def run_dm_mmco(scenario: Scenario) -> PipelineResult:
    """Relaxation-based decisions, repaired beamforming, cost accounting.

    Falls back to the all-local assignment when it is feasible and cheaper
    than the offloading solution (or when the offload set empties out).
    """
    decision = dm_mmco_decide(scenario)
    mask = decision.offload_mask.copy()
    solution = None
    repaired: tuple[int, ...] = ()
    if mask.any():
        mask, solution, repaired = feasibility_repair(scenario, mask)
    if solution is None:
        return PipelineResult(decision, mask, None, _all_local_cost(scenario), repaired)

    cost = cost_from_rates(
        scenario, mask, solution.rates, solution.tx_powers, solution.transmission_delay
    )
    local = _all_local_cost(scenario)
    if local.feasible and (not cost.feasible or local.weighted_cost < cost.weighted_cost):
        log.info("all-local assignment dominates the offload solution; using it")
        return PipelineResult(
            decision, np.zeros(scenario.num_devices, dtype=bool), None, local, repaired
        )
    return PipelineResult(decision, mask, solution, cost, repaired)
