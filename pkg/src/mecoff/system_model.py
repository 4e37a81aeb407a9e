"""Uplink rate model and task-cost accounting.

Rates follow the per-stream SINR of a MU-MIMO uplink with linear receive
beamforming: the interference seen by stream (k, l) sums the powers of every
other offloading device's streams after the receive filter, plus thermal
noise.  Streams of the same device are interference-free by default
(``intra_stream_interference`` enables them).

Costs: a local task costs kappa*C*f_loc^2 joules over C/f_loc seconds.  An
offloaded task is uploaded at rate R_k (energy p_tx * B_k/R_k), waits for the
synchronous upload phase to finish, then runs on the edge CPU (C/f_c seconds,
during which the device idles at p_idle).  All schemes funnel their
accounting through :func:`cost_from_rates` so their rows are comparable.
"""

from __future__ import annotations

import dataclasses
from typing import Mapping

import numpy as np

from .scenario import MobileDevice, Scenario

LN2 = float(np.log(2.0))


class ZeroReceiveVector(ValueError):
    """Raised when a receive filter is numerically zero."""


class ZeroRate(ValueError):
    """Raised when an offloading device has a zero uplink rate."""


def task_cycles(device: MobileDevice, alpha: float) -> float:
    return alpha * device.task_bits


def local_energy(device: MobileDevice, alpha: float, kappa: float) -> float:
    return kappa * task_cycles(device, alpha) * device.f_loc**2


def local_delay(device: MobileDevice, alpha: float) -> float:
    return task_cycles(device, alpha) / device.f_loc


def edge_delay(device: MobileDevice, alpha: float) -> float:
    return task_cycles(device, alpha) / device.f_c


def stream_interference(
    k: int,
    l: int,
    channels: np.ndarray,
    beamformers: Mapping[int, np.ndarray],
    receive_filters: Mapping[int, np.ndarray],
    noise_power: float,
    include_intra: bool = False,
) -> float:
    """Interference-plus-noise power seen by stream l of device k."""
    v = receive_filters[k][:, l]
    vnorm2 = float(np.real(np.vdot(v, v)))
    if vnorm2 == 0.0:
        raise ZeroReceiveVector(f"receive filter of device {k} stream {l} is zero")
    total = noise_power * vnorm2
    for i, q_i in beamformers.items():
        if i == k and not include_intra:
            continue
        cross = np.conj(v) @ channels[i] @ q_i  # row of per-stream amplitudes
        if i == k:
            # intra-device mode: own stream l carries the signal, not interference
            cross = np.delete(cross, l)
        total += float(np.sum(np.abs(cross) ** 2))
    return total


def stream_sinr(
    k: int,
    l: int,
    channels: np.ndarray,
    beamformers: Mapping[int, np.ndarray],
    receive_filters: Mapping[int, np.ndarray],
    noise_power: float,
    include_intra: bool = False,
) -> float:
    v = receive_filters[k][:, l]
    signal = abs(np.conj(v) @ channels[k] @ beamformers[k][:, l]) ** 2
    denom = stream_interference(
        k, l, channels, beamformers, receive_filters, noise_power, include_intra
    )
    return float(signal / denom)


def rate(
    k: int,
    channels: np.ndarray,
    beamformers: Mapping[int, np.ndarray],
    receive_filters: Mapping[int, np.ndarray],
    bandwidth: float,
    noise_power: float,
    include_intra: bool = False,
) -> float:
    """Uplink rate of device k in bit/s, summed over its streams."""
    d = beamformers[k].shape[1]
    total = 0.0
    for l in range(d):
        sinr = stream_sinr(
            k, l, channels, beamformers, receive_filters, noise_power, include_intra
        )
        total += np.log2(1.0 + sinr)
    return bandwidth * total


def rate_upper_bound(
    channel: np.ndarray,
    p_max: float,
    streams: int,
    bandwidth: float,
    noise_power: float,
) -> float:
    """Interference-free rate estimate with equal power over the top streams.

    Splits p_max evenly across the ``streams`` strongest channel directions
    of the device; serves as the achievability-motivated cap on its rate.
    """
    sing = np.linalg.svd(channel, compute_uv=False)
    top = sing[:streams]
    snr = (p_max / streams) * top**2 / noise_power
    return float(bandwidth * np.sum(np.log2(1.0 + snr)))


@dataclasses.dataclass(frozen=True)
class CostBreakdown:
    """Per-device and aggregate cost of one decision + transmission solution."""

    offload_mask: np.ndarray  # bool, shape (K,)
    energies: np.ndarray  # J, shape (K,)
    delays: np.ndarray  # s, shape (K,)
    rates: np.ndarray  # bit/s, 0.0 for local devices
    tx_powers: np.ndarray  # W, 0.0 for local devices
    transmission_delay: float  # shared upload phase length, 0.0 if nobody offloads
    weighted_cost: float
    eta: float  # all-local weighted cost
    delta: np.ndarray  # per-device offload-vs-local fixed cost difference
    delay_violations: tuple[int, ...]

    @property
    def feasible(self) -> bool:
        return not self.delay_violations

    @property
    def max_delay(self) -> float:
        return float(np.max(self.delays))

    @property
    def mean_delay(self) -> float:
        return float(np.mean(self.delays))

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.energies))


def offload_fixed_costs(scenario: Scenario) -> tuple[np.ndarray, float]:
    """Decision-independent cost pieces: per-device delta and all-local eta.

    delta_k is the fixed part of the cost change when device k offloads
    (edge idle energy and edge compute delay in, local energy and delay out);
    eta is the weighted cost of everyone computing locally.
    """
    cfg = scenario.config
    deltas = np.empty(scenario.num_devices)
    eta = 0.0
    for k, dev in enumerate(scenario.devices):
        e_loc = local_energy(dev, cfg.alpha, cfg.kappa)
        t_loc = local_delay(dev, cfg.alpha)
        t_c = edge_delay(dev, cfg.alpha)
        e_c = cfg.p_idle * t_c
        local_part = cfg.lambda_e * e_loc + cfg.lambda_t * t_loc
        deltas[k] = cfg.lambda_e * e_c + cfg.lambda_t * t_c - local_part
        eta += local_part
    return deltas, eta


def cost_from_rates(
    scenario: Scenario,
    offload_mask: np.ndarray,
    rates: np.ndarray,
    tx_powers: np.ndarray,
    transmission_delay: float | np.ndarray | None = None,
) -> CostBreakdown:
    """Evaluate the cost model given each offloader's rate and transmit power.

    ``transmission_delay`` is the wait before edge compute starts; by
    default it is the slowest offloader's upload time (simultaneous uploads,
    synchronous edge start).  TDMA passes the sum of upload times instead;
    orthogonal-band schemes may pass a per-device array (each task arrives
    when its own upload ends).
    """
    cfg = scenario.config
    k_devices = scenario.num_devices
    mask = np.asarray(offload_mask, dtype=bool)
    energies = np.empty(k_devices)
    delays = np.empty(k_devices)

    upload_times = np.zeros(k_devices)
    for k in np.flatnonzero(mask):
        if rates[k] <= 0.0:
            raise ZeroRate(f"offloading device {k} has rate {rates[k]}")
        upload_times[k] = scenario.devices[k].task_bits / rates[k]
    if transmission_delay is None:
        transmission_delay = float(np.max(upload_times)) if mask.any() else 0.0
    if np.ndim(transmission_delay) == 0:
        waits = np.full(k_devices, float(transmission_delay))
        reported_phase = float(transmission_delay)
    else:
        waits = np.asarray(transmission_delay, dtype=float)
        reported_phase = float(waits[mask].max()) if mask.any() else 0.0

    for k, dev in enumerate(scenario.devices):
        if mask[k]:
            t_c = edge_delay(dev, cfg.alpha)
            energies[k] = upload_times[k] * tx_powers[k] + cfg.p_idle * t_c
            delays[k] = waits[k] + t_c
        else:
            energies[k] = local_energy(dev, cfg.alpha, cfg.kappa)
            delays[k] = local_delay(dev, cfg.alpha)

    weighted = float(cfg.lambda_e * np.sum(energies) + cfg.lambda_t * np.sum(delays))
    deltas, eta = offload_fixed_costs(scenario)
    violations = tuple(
        int(k)
        for k in range(k_devices)
        if delays[k] > scenario.devices[k].tau_max + 1e-9
    )
    out_rates = np.where(mask, rates, 0.0).astype(float)
    out_powers = np.where(mask, tx_powers, 0.0).astype(float)
    return CostBreakdown(
        offload_mask=mask,
        energies=energies,
        delays=delays,
        rates=out_rates,
        tx_powers=out_powers,
        transmission_delay=reported_phase,
        weighted_cost=weighted,
        eta=eta,
        delta=deltas,
        delay_violations=violations,
    )


def offload_cost(
    k: int,
    offload_set: tuple[int, ...],
    scenario: Scenario,
    beamformers: Mapping[int, np.ndarray],
    receive_filters: Mapping[int, np.ndarray],
) -> tuple[float, float]:
    """Energy and delay of offloading device k under the given beamformers."""
    cfg = scenario.config
    rates = {
        i: rate(
            i,
            scenario.channels,
            beamformers,
            receive_filters,
            cfg.bandwidth,
            scenario.noise_power,
            cfg.intra_stream_interference,
        )
        for i in offload_set
    }
    for i, r in rates.items():
        if r <= 0.0:
            raise ZeroRate(f"offloading device {i} has rate {r}")
    dev = scenario.devices[k]
    upload_phase = max(scenario.devices[i].task_bits / rates[i] for i in offload_set)
    t_c = edge_delay(dev, cfg.alpha)
    p_tx = float(np.real(np.sum(np.abs(beamformers[k]) ** 2)))
    energy = (dev.task_bits / rates[k]) * p_tx + cfg.p_idle * t_c
    delay = upload_phase + t_c
    return energy, delay


def total_cost(scenario: Scenario, decision, solution) -> CostBreakdown:
    """Cost of a decision plus (optional) beamforming solution.

    ``decision`` needs an ``offload_mask`` attribute; ``solution`` (ignored
    when nobody offloads) needs ``rates`` and ``tx_powers`` arrays indexed by
    device and optionally ``transmission_delay``.
    """
    mask = np.asarray(decision.offload_mask, dtype=bool)
    k_devices = scenario.num_devices
    if not mask.any() or solution is None:
        zeros = np.zeros(k_devices)
        return cost_from_rates(scenario, np.zeros(k_devices, dtype=bool), zeros, zeros)
    rates_arr = np.asarray(solution.rates, dtype=float)
    powers_arr = np.asarray(solution.tx_powers, dtype=float)
    t_shared = getattr(solution, "transmission_delay", None)
    return cost_from_rates(scenario, mask, rates_arr, powers_arr, t_shared)
