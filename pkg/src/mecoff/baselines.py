"""Comparison schemes sharing the cost accounting of the main pipeline.

All schemes restrict the devices to a single transmit antenna except the
local-only reference, which never transmits.  Offload sets for the
orthogonal schemes come from a greedy cost/deadline rule (the published
descriptions leave the decision rule open; the choice is recorded in each
result's note field).
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .pipeline import run_dm_mmco
from .scenario import Scenario
from .system_model import (
    CostBreakdown,
    cost_from_rates,
    edge_delay,
    local_delay,
    local_energy,
)

log = logging.getLogger(__name__)

GREEDY_NOTE = "offload set by greedy cost/deadline rule"

SCHEME_IDS = ("dm_mmco", "local_only", "op_mmse", "fdma", "tdma")


@dataclasses.dataclass(frozen=True)
class SchemeResult:
    scheme: str
    cost: CostBreakdown
    iterations: int = 0
    note: str = ""

    @property
    def offload_mask(self) -> np.ndarray:
        return self.cost.offload_mask


def single_antenna_scenario(scenario: Scenario) -> Scenario:
    """The same cell with every device reduced to its first transmit antenna."""
    cfg = dataclasses.replace(scenario.config, md_antennas=1, streams=1)
    return Scenario(
        config=cfg,
        devices=scenario.devices,
        channels=scenario.channels[:, :, :1].copy(),
        gains=scenario.gains,
    )


def run_local_only(scenario: Scenario) -> SchemeResult:
    zeros = np.zeros(scenario.num_devices)
    cost = cost_from_rates(scenario, zeros.astype(bool), zeros, zeros)
    return SchemeResult(scheme="local_only", cost=cost)


def run_op_mmse(scenario: Scenario) -> SchemeResult:
    """Single-antenna devices, MMSE receive filters, FP power control.

    Runs the full decision + transmission pipeline on the reduced channel;
    with one stream per device the receive update is exactly the MMSE filter
    and the transmit update reduces to scalar power control.
    """
    result = run_dm_mmco(single_antenna_scenario(scenario))
    return SchemeResult(scheme="op_mmse", cost=result.cost, iterations=result.iterations)


def _matched_filter_gains(scenario: Scenario) -> np.ndarray:
    return np.sum(np.abs(scenario.channels[:, :, 0]) ** 2, axis=1)


def _local_weighted(scenario: Scenario) -> np.ndarray:
    cfg = scenario.config
    return np.array(
        [
            cfg.lambda_e * local_energy(dev, cfg.alpha, cfg.kappa)
            + cfg.lambda_t * local_delay(dev, cfg.alpha)
            for dev in scenario.devices
        ]
    )


def _solo_feasible(scenario: Scenario, solo_rates: np.ndarray) -> np.ndarray:
    """Devices able to meet their deadline with the whole band to themselves."""
    cfg = scenario.config
    ok = np.zeros(scenario.num_devices, dtype=bool)
    for k, dev in enumerate(scenario.devices):
        if solo_rates[k] <= 0.0:
            continue
        ok[k] = dev.task_bits / solo_rates[k] + edge_delay(dev, cfg.alpha) <= dev.tau_max
    return ok


def run_fdma(scenario: Scenario) -> SchemeResult:
    """Equal orthogonal sub-bands at full power, matched-filter reception.

    Sub-band noise scales with the share (per-Hz density times bandwidth),
    so each of n offloaders sees rate (B/n) log2(1 + n P |h|^2 / sigma^2).
    Bands are orthogonal, so each task arrives when its own upload ends and
    edge compute starts per device.  Starting from every solo-feasible
    device: while any deadline is violated the worst violator moves back to
    local (removal also widens everyone else's band); afterwards devices
    losing against their local cost move back one at a time until the set
    is stable.
    """
    cfg = scenario.config
    gains = _matched_filter_gains(scenario)
    noise = scenario.noise_power
    snr_full = cfg.p_max * gains / noise
    solo_rates = cfg.bandwidth * np.log2(1.0 + snr_full)
    mask = _solo_feasible(scenario, solo_rates)
    local_cost = _local_weighted(scenario)
    bits = np.array([d.task_bits for d in scenario.devices])

    breakdown = None
    for _ in range(scenario.num_devices + 1):
        if not mask.any():
            breakdown = None
            break
        n_off = int(mask.sum())
        rates = np.zeros(scenario.num_devices)
        rates[mask] = (cfg.bandwidth / n_off) * np.log2(1.0 + n_off * snr_full[mask])
        powers = np.where(mask, cfg.p_max, 0.0)
        uploads = np.where(mask, bits / np.where(mask, rates, 1.0), 0.0)
        breakdown = cost_from_rates(
            scenario, mask, rates, powers, transmission_delay=uploads
        )
        off_cost = cfg.lambda_e * breakdown.energies + cfg.lambda_t * breakdown.delays
        excess_delay = breakdown.delays - np.array([d.tau_max for d in scenario.devices])
        violators = [int(k) for k in np.flatnonzero(mask) if excess_delay[k] > 1e-9]
        if violators:
            drop = max(violators, key=lambda k: excess_delay[k])
        else:
            losers = [
                int(k) for k in np.flatnonzero(mask) if off_cost[k] > local_cost[k] + 1e-12
            ]
            if not losers:
                break
            drop = max(losers, key=lambda k: off_cost[k] - local_cost[k])
        mask = mask.copy()
        mask[drop] = False

    if breakdown is None or not mask.any():
        return dataclasses.replace(run_local_only(scenario), scheme="fdma", note=GREEDY_NOTE)
    return SchemeResult(scheme="fdma", cost=breakdown, note=GREEDY_NOTE)


def run_tdma(scenario: Scenario) -> SchemeResult:
    """Sequential full-band uploads at full power, matched-filter reception.

    Every offloader waits for the whole upload sequence, so each offload
    delay is the sum of upload times plus its own edge compute time.  While
    any deadline is violated the device with the longest upload time (the
    last in shortest-first order) moves back to local; afterwards devices
    losing against their local cost move back one at a time until stable.
    """
    cfg = scenario.config
    gains = _matched_filter_gains(scenario)
    rates_full = cfg.bandwidth * np.log2(1.0 + cfg.p_max * gains / scenario.noise_power)
    mask = _solo_feasible(scenario, rates_full)
    bits = np.array([dev.task_bits for dev in scenario.devices])
    local_cost = _local_weighted(scenario)

    breakdown = None
    for _ in range(scenario.num_devices + 1):
        if not mask.any():
            breakdown = None
            break
        uploads = np.where(mask, bits / rates_full, 0.0)
        total_upload = float(uploads.sum())
        rates = np.where(mask, rates_full, 0.0)
        powers = np.where(mask, cfg.p_max, 0.0)
        breakdown = cost_from_rates(
            scenario, mask, rates, powers, transmission_delay=total_upload
        )
        violated = [k for k in np.flatnonzero(mask) if k in breakdown.delay_violations]
        if violated:
            drop = int(max(np.flatnonzero(mask), key=lambda k: uploads[k]))
        else:
            off_cost = cfg.lambda_e * breakdown.energies + cfg.lambda_t * breakdown.delays
            losers = [
                int(k) for k in np.flatnonzero(mask) if off_cost[k] > local_cost[k] + 1e-12
            ]
            if not losers:
                break
            drop = max(losers, key=lambda k: off_cost[k] - local_cost[k])
        mask = mask.copy()
        mask[drop] = False
        breakdown = None

    if breakdown is None or not mask.any():
        return dataclasses.replace(run_local_only(scenario), scheme="tdma", note=GREEDY_NOTE)
    return SchemeResult(scheme="tdma", cost=breakdown, note=GREEDY_NOTE)


def _dm_mmco_result(scenario: Scenario) -> SchemeResult:
    result = run_dm_mmco(scenario)
    return SchemeResult(scheme="dm_mmco", cost=result.cost, iterations=result.iterations)


_RUNNERS = {
    "dm_mmco": _dm_mmco_result,
    "local_only": run_local_only,
    "op_mmse": run_op_mmse,
    "fdma": run_fdma,
    "tdma": run_tdma,
}


def run_scheme(name: str, scenario: Scenario) -> SchemeResult:
    try:
        runner = _RUNNERS[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; expected one of {SCHEME_IDS}") from None
    return runner(scenario)
