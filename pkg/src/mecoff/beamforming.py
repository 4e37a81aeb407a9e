"""Alternating fractional-programming design of uplink beamformers.

For a fixed offload set the transmission stage minimizes the weighted sum of
upload energies (transmit power times upload time) and the shared upload
phase length, subject to per-device power budgets and deadlines.  The ratio
objective is handled with two layers of auxiliaries:

* per-stream scalars z turn each log's SINR into a concave bracket
  1 + 2 Re(conj(z) s) - |z|^2 I  (s: filtered signal amplitude, I:
  interference-plus-noise power); the maximizing z is s / I;
* per-device scalars w turn each energy ratio into 2 w sqrt(.) - w^2 R; the
  tightening w is sqrt(lambda_e B ||Q||_F^2) / R.

One outer iteration tightens (z, w), solves the transmit subproblem in the
Q matrices (projected gradient under Frobenius power balls, rate floors kept
by a shrinking log-barrier plus a barrier-free polish), re-tightens, and
then updates the receive filters V in closed form.  The loop stops when the
surrogate objective changes by less than epsilon and returns the best
iterate seen.

The shared upload length q is eliminated: with everything else fixed the
objective increases in q and the deadline floor forces q >= max_k B_k / R_k,
so q sits at that max, and the deadlines become per-device rate floors
B_k / (tau_k - edge time).
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .numerics import solve_hpd_system
from .scenario import Scenario
from .system_model import edge_delay, local_delay, rate_upper_bound

log = logging.getLogger(__name__)

POWER_EPS = 1e-12  # Frobenius-norm smoothing in the transmit objective
TOL_INNER = 1e-6  # projected-gradient stationarity target
ARMIJO_C = 1e-4
BARRIER_ROUNDS = 3
BARRIER_SHRINK = 0.2
MAX_INNER_STEPS = 60
PHASE1_ROUNDS = 8
ZERO_AUX = 1e-30  # below this |z| the receive filter keeps its old column


class DomainViolation(ValueError):
    """Raised when a surrogate log argument is not positive."""


class InnerInfeasible(RuntimeError):
    """Raised when the rate floors cannot be met for the given offload set."""

    def __init__(self, message: str, worst_device: int | None = None) -> None:
        super().__init__(message)
        self.worst_device = worst_device


@dataclasses.dataclass
class FpState:
    """Mutable state of the alternating loop (offload-set-local indexing)."""

    offload_set: tuple[int, ...]
    channels: np.ndarray  # (n_off, M, N)
    task_bits: np.ndarray  # (n_off,)
    rate_floors: np.ndarray  # (n_off,), bit/s lower bounds from deadlines
    noise_power: float
    bandwidth: float
    lambda_e: float
    lambda_t: float
    include_intra: bool
    p_max: float
    beamformers: np.ndarray  # Q, (n_off, N, d) complex
    receive_filters: np.ndarray  # V, (n_off, M, d) complex
    z: np.ndarray  # (n_off, d) complex
    w: np.ndarray  # (n_off,) real
    upload_phase: float = 0.0  # q, current max upload time

    @property
    def n_off(self) -> int:
        return len(self.offload_set)

    @property
    def streams(self) -> int:
        return self.beamformers.shape[2]

    def tx_powers(self) -> np.ndarray:
        return np.real(np.sum(np.abs(self.beamformers) ** 2, axis=(1, 2)))


@dataclasses.dataclass(frozen=True)
class BeamformingSolution:
    """Converged transmission design, reported in device (not set) indexing."""

    offload_set: tuple[int, ...]
    beamformers: dict[int, np.ndarray]
    receive_filters: dict[int, np.ndarray]
    rates: np.ndarray  # (K,), 0 for local devices
    tx_powers: np.ndarray  # (K,)
    transmission_delay: float  # q
    iterations: int
    fqm_history: tuple[float, ...]
    delay_cap: float  # min_k (tau_k - edge time), the shared cap on q
    meets_delay_cap: bool


def _cross_amplitudes(state: FpState) -> np.ndarray:
    """cross[i, l, j, r] = v_{i,l}^H H_j q_{j,r}."""
    hq = np.einsum("jmn,jnr->jmr", state.channels, state.beamformers)
    return np.einsum("iml,jmr->iljr", np.conj(state.receive_filters), hq)


def _interference(state: FpState, cross: np.ndarray) -> np.ndarray:
    """Per-stream interference-plus-noise powers, shape (n_off, d).

    Excluded terms are zeroed before summing; subtracting them from the
    total cancels catastrophically once the filters null the interference.
    """
    powers = np.abs(cross) ** 2
    idx = np.arange(state.n_off)
    sid = np.arange(state.streams)
    if state.include_intra:
        powers[idx[:, None], sid[None, :], idx[:, None], sid[None, :]] = 0.0
    else:
        powers[idx, :, idx, :] = 0.0
    vnorm2 = np.real(np.sum(np.abs(state.receive_filters) ** 2, axis=1))
    return powers.sum(axis=(2, 3)) + state.noise_power * vnorm2


def _signal_amplitudes(cross: np.ndarray) -> np.ndarray:
    n_off, d = cross.shape[0], cross.shape[1]
    return cross[np.arange(n_off)[:, None], np.arange(d)[None, :],
                 np.arange(n_off)[:, None], np.arange(d)[None, :]]


def true_rates(state: FpState) -> np.ndarray:
    """Shannon rates of the offloaders at the current (Q, V), bit/s."""
    cross = _cross_amplitudes(state)
    interference = _interference(state, cross)
    signal = np.abs(_signal_amplitudes(cross)) ** 2
    return state.bandwidth * np.sum(np.log2(1.0 + signal / interference), axis=1)


def update_z(state: FpState) -> None:
    """Tighten the per-stream auxiliaries: z = signal / interference."""
    cross = _cross_amplitudes(state)
    interference = _interference(state, cross)
    state.z = _signal_amplitudes(cross) / interference


def update_w(state: FpState) -> None:
    """Tighten the per-device ratio auxiliaries from the true rates."""
    rates = true_rates(state)
    powers = state.tx_powers()
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.sqrt(state.lambda_e * state.task_bits * powers) / rates
    state.w = np.where(rates > 0.0, w, 0.0)
    state.upload_phase = float(np.max(state.task_bits / np.maximum(rates, 1e-300)))


def update_v(state: FpState) -> None:
    """Closed-form receive filters: v = A^{-1} H q / z per stream.

    A is that stream's interference-plus-noise covariance.  Streams with a
    vanishing auxiliary keep their previous filter.
    """
    hq = np.einsum("jmn,jnr->jmr", state.channels, state.beamformers)
    m_ant = state.channels.shape[1]
    flat = hq.transpose(0, 2, 1).reshape(-1, m_ant)  # (S, M) stream signatures
    gram_total = np.einsum("sm,sn->mn", flat, np.conj(flat))
    for i in range(state.n_off):
        own = hq[i]  # (M, d)
        own_gram = own @ np.conj(own.T)
        base = gram_total - own_gram + state.noise_power * np.eye(m_ant)
        if not state.include_intra:
            cov = base
            solved = solve_hpd_system(cov, own)
            for l in range(state.streams):
                z = state.z[i, l]
                if abs(z) > ZERO_AUX:
                    state.receive_filters[i][:, l] = solved[:, l] / z
        else:
            for l in range(state.streams):
                others = own_gram - np.outer(own[:, l], np.conj(own[:, l]))
                cov = base + others
                z = state.z[i, l]
                if abs(z) > ZERO_AUX:
                    state.receive_filters[i][:, l] = solve_hpd_system(cov, own[:, l]) / z


def _brackets(state: FpState, cross: np.ndarray | None = None) -> np.ndarray:
    if cross is None:
        cross = _cross_amplitudes(state)
    interference = _interference(state, cross)
    signal = _signal_amplitudes(cross)
    return 1.0 + 2.0 * np.real(np.conj(state.z) * signal) - np.abs(state.z) ** 2 * interference


def surrogate_rates(state: FpState) -> np.ndarray:
    """Concave rate surrogates R~_k; equal to the true rates at tight z."""
    brackets = _brackets(state)
    if np.any(brackets <= 0.0):
        raise DomainViolation("surrogate bracket is not positive")
    return state.bandwidth * np.sum(np.log2(brackets), axis=1)


def evaluate_fqm(state: FpState) -> float:
    """Surrogate objective at the current state (brackets must be positive)."""
    brackets = _brackets(state)
    if np.any(brackets <= 0.0):
        raise DomainViolation("surrogate bracket is not positive")
    xi = state.w**2 * state.bandwidth * np.sum(np.log2(brackets), axis=1)
    powers = state.tx_powers()
    head = 2.0 * state.w * np.sqrt(state.lambda_e * state.task_bits * powers)
    return float(np.sum(head + state.lambda_t * state.upload_phase - xi))


def ratio_objective(state: FpState) -> float:
    """The transmission-stage cost itself: energy ratios plus delay terms."""
    rates = true_rates(state)
    powers = state.tx_powers()
    energy = state.lambda_e * state.task_bits * powers / rates
    return float(np.sum(energy + state.lambda_t * state.upload_phase))


def _project_power(q_mats: np.ndarray, p_max: float) -> np.ndarray:
    norms2 = np.real(np.sum(np.abs(q_mats) ** 2, axis=(1, 2)))
    scale = np.sqrt(np.minimum(1.0, p_max / np.maximum(norms2, 1e-300)))
    return q_mats * scale[:, None, None]


def q_subproblem_value_and_grad(
    state: FpState,
    q_mats: np.ndarray,
    barrier_weight: float,
    floors: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Transmit-update objective F and its gradient at the given Q stack.

    F sums the smoothed power heads, the weighted negative log surrogates,
    the eliminated upload term lambda_t * n_off * max_k B_k / R~_k, and a
    log-barrier on the floor margins.  Returns +inf (and a zero gradient)
    outside the barrier domain.  The gradient convention is 2 d/d(conj Q),
    i.e. the direction of steepest ascent for the real parametrization.
    """
    n_off, d = state.n_off, state.streams
    # fixed receive side: e[i*d+l, j, :] = v_{i,l}^H H_j
    vh = np.conj(state.receive_filters).transpose(0, 2, 1).reshape(n_off * d, -1)
    eff = np.einsum("sm,jmn->sjn", vh, state.channels)
    cross = np.einsum("sjn,jnr->sjr", eff, q_mats).reshape(n_off, d, n_off, d)
    inter_pow = np.abs(cross) ** 2
    signal = _signal_amplitudes(cross)
    idx = np.arange(n_off)
    sid = np.arange(d)
    if state.include_intra:
        inter_pow[idx[:, None], sid[None, :], idx[:, None], sid[None, :]] = 0.0
    else:
        inter_pow[idx, :, idx, :] = 0.0
    vnorm2 = np.real(np.sum(np.abs(state.receive_filters) ** 2, axis=1))
    interference = inter_pow.sum(axis=(2, 3)) + state.noise_power * vnorm2

    brackets = (
        1.0 + 2.0 * np.real(np.conj(state.z) * signal) - np.abs(state.z) ** 2 * interference
    )
    if np.any(brackets <= 0.0):
        return np.inf, np.zeros_like(q_mats)
    log_brackets = np.log2(brackets)
    surro = state.bandwidth * log_brackets.sum(axis=1)
    margins = surro - floors
    if np.any(margins <= 0.0):
        return np.inf, np.zeros_like(q_mats)

    powers2 = np.real(np.sum(np.abs(q_mats) ** 2, axis=(1, 2)))
    smooth = np.sqrt(powers2 + POWER_EPS)
    head_coef = 2.0 * state.w * np.sqrt(state.lambda_e * state.task_bits)
    value = float(np.sum(head_coef * smooth))
    value -= float(np.sum(state.w**2 * state.bandwidth * log_brackets.sum(axis=1)))
    if barrier_weight > 0.0:
        value -= float(barrier_weight * np.sum(np.log(margins)))

    # dF/dR~_k chain pieces
    df_drate = np.zeros(n_off)
    if barrier_weight > 0.0:
        df_drate -= barrier_weight / margins
    if state.lambda_t > 0.0:
        uploads = state.task_bits / surro
        j_star = int(np.argmax(uploads))
        value += float(state.lambda_t * n_off * uploads[j_star])
        df_drate[j_star] -= state.lambda_t * n_off * state.task_bits[j_star] / surro[j_star] ** 2

    ln2 = np.log(2.0)
    dbracket = -(state.w**2)[:, None] * state.bandwidth / (ln2 * brackets)
    dbracket += df_drate[:, None] * state.bandwidth / (ln2 * brackets)

    grad = (head_coef / smooth)[:, None, None] * q_mats
    # own-signal linear terms
    own_coef = 2.0 * dbracket * state.z  # (n_off, d)
    eff_own = eff.reshape(n_off, d, n_off, -1)[np.arange(n_off), :, np.arange(n_off), :]
    grad += np.einsum("il,iln->inl", own_coef, np.conj(eff_own))
    # interference quadratic terms through every other stream's bracket
    phi = dbracket * (-(np.abs(state.z) ** 2))  # (n_off, d) multipliers
    phi_flat = phi.reshape(-1)
    cross_flat = cross.reshape(n_off * d, n_off, d)
    weighted = phi_flat[:, None, None] * cross_flat  # (S, n_off, d)
    contrib = 2.0 * np.einsum("sjn,sjr->jnr", np.conj(eff), weighted)
    own_weighted = weighted.reshape(n_off, d, n_off, d)[
        np.arange(n_off), :, np.arange(n_off), :
    ]
    eff_own_c = np.conj(eff_own)
    if state.include_intra:
        contrib -= 2.0 * np.einsum("il,iln->inl", phi * signal, eff_own_c)
    else:
        contrib -= 2.0 * np.einsum("ilr,iln->inr", own_weighted, eff_own_c)
    grad += contrib
    return value, grad


def update_q_matrices(state: FpState, max_steps: int = MAX_INNER_STEPS) -> None:
    """Descend the transmit subproblem without increasing its objective.

    Runs the shrinking-barrier rounds followed by a barrier-free polish in
    which infeasible trial points are simply rejected.  The state keeps the
    warm start if no progress was possible.
    """
    surro = surrogate_rates(state)
    # floors stay put unless the warm start already sits on one
    floors_eff = np.minimum(state.rate_floors, surro * (1.0 - 1e-12))

    base_value, _ = q_subproblem_value_and_grad(state, state.beamformers, 0.0, floors_eff)
    mu0 = 1e-2 * (1.0 + abs(base_value))
    weights = [mu0 * BARRIER_SHRINK**r for r in range(BARRIER_ROUNDS)] + [0.0]

    best_q = state.beamformers.copy()
    best_value = base_value
    current = state.beamformers.copy()
    q_scale = float(np.sqrt(np.real(np.sum(np.abs(current) ** 2)))) + np.sqrt(state.p_max)
    for mu in weights:
        value, grad = q_subproblem_value_and_grad(state, current, mu, floors_eff)
        if not np.isfinite(value):
            continue
        gnorm = float(np.sqrt(np.real(np.sum(np.abs(grad) ** 2))))
        step = 0.25 * q_scale / max(gnorm, 1e-300)
        for _ in range(max_steps):
            trial = _project_power(current - step * grad, state.p_max)
            direction = trial - current
            move = float(np.sqrt(np.real(np.sum(np.abs(direction) ** 2))))
            if move <= TOL_INNER * q_scale and step >= 0.25 * q_scale / max(gnorm, 1e-300):
                break
            slope = float(np.real(np.sum(np.conj(grad) * direction)))
            trial_value, trial_grad = q_subproblem_value_and_grad(state, trial, mu, floors_eff)
            if np.isfinite(trial_value) and trial_value <= value + ARMIJO_C * slope:
                current, value, grad = trial, trial_value, trial_grad
                gnorm = float(np.sqrt(np.real(np.sum(np.abs(grad) ** 2))))
                step *= 2.0
            else:
                step *= 0.5
                if step * max(gnorm, 1e-300) < 1e-18 * q_scale:
                    break
        plain, _ = q_subproblem_value_and_grad(state, current, 0.0, floors_eff)
        if plain < best_value:
            best_value, best_q = plain, current.copy()
    state.beamformers = best_q


def _power_scale_for_target(
    sing: np.ndarray, target: float, p_max: float, bandwidth: float, noise_power: float
) -> float:
    """Smallest power fraction whose interference-free rate reaches target."""
    d = len(sing)

    def rate_at(beta: float) -> float:
        snr = beta * (p_max / d) * sing**2 / noise_power
        return float(bandwidth * np.sum(np.log2(1.0 + snr)))

    if rate_at(1.0) <= target:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if rate_at(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def init_beamformers(
    scenario: Scenario,
    offload_set: tuple[int, ...],
    rate_floor_override: np.ndarray | None = None,
) -> FpState:
    """Feasible start: singular-vector directions at floor-covering power.

    Each device transmits along its strongest right singular vectors with
    just enough power (interference-free estimate, with headroom) to clear
    its deadline rate floor; starting at full power would put the loop far
    above the optimum and make the absolute stopping rule quit mid-descent.
    Receive filters start from the left singular vectors and a few (z, V)
    rounds refine them; devices still short of their floor escalate power
    up to the budget before :class:`InnerInfeasible` is raised.

    ``rate_floor_override`` replaces the deadline-induced floors and turns
    every floor failure into best effort: no exception, power simply
    escalates toward the budget (infinite floors ask for the fastest upload
    the channel supports).
    """
    cfg = scenario.config
    off = tuple(int(k) for k in offload_set)
    if not off:
        raise ValueError("offload set is empty")
    n_off, d = len(off), cfg.streams
    channels = scenario.channels[list(off)]
    m_ant, n_ant = channels.shape[1], channels.shape[2]

    devices = [scenario.devices[k] for k in off]
    task_bits = np.array([dev.task_bits for dev in devices])
    best_effort = rate_floor_override is not None
    if best_effort:
        floors = np.asarray(rate_floor_override, dtype=float)
    else:
        slack = np.array([dev.tau_max - edge_delay(dev, cfg.alpha) for dev in devices])
        delay_cap = float(np.min(slack))
        if delay_cap <= 0.0:
            worst = int(np.argmin(slack))
            raise InnerInfeasible(
                f"device {off[worst]} cannot meet its deadline even before upload",
                worst_device=off[worst],
            )
        floors = task_bits / delay_cap

    beamformers = np.empty((n_off, n_ant, d), dtype=complex)
    receive = np.empty((n_off, m_ant, d), dtype=complex)
    scales = np.empty(n_off)
    for i in range(n_off):
        u_mat, sing, vh_mat = np.linalg.svd(channels[i], full_matrices=False)
        scales[i] = _power_scale_for_target(
            sing[:d], 2.0 * floors[i], cfg.p_max, cfg.bandwidth, scenario.noise_power
        )
        beamformers[i] = vh_mat[:d].conj().T * np.sqrt(scales[i] * cfg.p_max / d)
        receive[i] = u_mat[:, :d]

    state = FpState(
        offload_set=off,
        channels=channels,
        task_bits=task_bits,
        rate_floors=floors,
        noise_power=scenario.noise_power,
        bandwidth=cfg.bandwidth,
        lambda_e=cfg.lambda_e,
        lambda_t=cfg.lambda_t,
        include_intra=cfg.intra_stream_interference,
        p_max=cfg.p_max,
        beamformers=beamformers,
        receive_filters=receive,
        z=np.zeros((n_off, d), dtype=complex),
        w=np.zeros(n_off),
    )
    update_z(state)

    for _ in range(PHASE1_ROUNDS):
        rates = true_rates(state)
        short = rates < floors * (1.0 + 1e-9)
        if not short.any():
            break
        for i in np.flatnonzero(short):
            if scales[i] < 1.0:
                grow = min(1.0, scales[i] * 4.0)
                state.beamformers[i] *= np.sqrt(grow / scales[i])
                scales[i] = grow
        update_v(state)
        update_z(state)
    if not best_effort:
        rates = true_rates(state)
        if not np.all(rates >= floors * (1.0 + 1e-9)):
            worst = int(np.argmin(rates / floors))
            raise InnerInfeasible(
                f"device {off[worst]} cannot reach its rate floor "
                f"({rates[worst]:.3e} < {floors[worst]:.3e} bit/s)",
                worst_device=off[worst],
            )
    update_w(state)
    return state


def solve_beamforming(
    scenario: Scenario,
    offload_set: tuple[int, ...],
    rate_floor_override: np.ndarray | None = None,
) -> BeamformingSolution:
    """Run the alternating loop for the given offload set.

    Raises :class:`InnerInfeasible` when the deadline-induced rate floors
    cannot be initialized.  ``rate_floor_override`` substitutes the floors
    and suppresses that exception (best-effort mode); feasibility is still
    reported against the true deadline cap.
    """
    cfg = scenario.config
    state = init_beamformers(scenario, offload_set, rate_floor_override)

    history: list[float] = []
    previous = 0.0  # the loop always runs its first iteration
    best_value = np.inf
    best = None
    iterations = 0
    for iteration in range(1, cfg.numiter + 1):
        iterations = iteration
        update_z(state)
        update_w(state)
        update_q_matrices(state)
        update_z(state)
        update_w(state)
        update_v(state)
        update_z(state)
        update_w(state)
        value = evaluate_fqm(state)
        history.append(value)
        if value < best_value:
            best_value = value
            best = (
                state.beamformers.copy(),
                state.receive_filters.copy(),
                state.z.copy(),
                state.w.copy(),
            )
        if abs(value - previous) < cfg.epsilon:
            break
        previous = value

    if best is not None:
        state.beamformers, state.receive_filters, state.z, state.w = best
    update_z(state)
    update_w(state)

    rates_local = true_rates(state)
    n_devices = scenario.num_devices
    rates = np.zeros(n_devices)
    powers = np.zeros(n_devices)
    beam_map: dict[int, np.ndarray] = {}
    filt_map: dict[int, np.ndarray] = {}
    for i, k in enumerate(state.offload_set):
        rates[k] = rates_local[i]
        powers[k] = state.tx_powers()[i]
        beam_map[k] = state.beamformers[i].copy()
        filt_map[k] = state.receive_filters[i].copy()
    uploads = state.task_bits / rates_local
    upload_phase = float(np.max(uploads))
    devices = [scenario.devices[k] for k in state.offload_set]
    slack = np.array([dev.tau_max - edge_delay(dev, cfg.alpha) for dev in devices])
    delay_cap = float(np.min(slack))
    meets = bool(upload_phase <= delay_cap * (1.0 + 1e-9) + 1e-12)
    return BeamformingSolution(
        offload_set=state.offload_set,
        beamformers=beam_map,
        receive_filters=filt_map,
        rates=rates,
        tx_powers=powers,
        transmission_delay=upload_phase,
        iterations=iterations,
        fqm_history=tuple(history),
        delay_cap=delay_cap,
        meets_delay_cap=meets,
    )


def feasibility_repair(
    scenario: Scenario, offload_mask: np.ndarray
) -> tuple[np.ndarray, BeamformingSolution | None, tuple[int, ...]]:
    """Shrink the offload set until the transmission stage is solvable.

    A device is moved back to local only when its local mode meets its own
    deadline; anything slower than its deadline on-device never leaves the
    offload set.  Among movable devices the one with the largest upload-time
    bound B_k / R_hat_k goes first: pre-emptively when its own deadline is
    unreachable even at the capped rate (it can never upload in time, and
    freeing the channel helps everyone else), otherwise one per failed solve.
    When the remaining set is still unsolvable and no movable device is left,
    the transmission stage runs in best-effort mode (rates pushed as high as
    the channel allows, deadline flagged as missed).  Returns the repaired
    mask, the solution for the surviving set (None when it is empty), and
    the removed devices.
    """
    cfg = scenario.config
    mask = np.asarray(offload_mask, dtype=bool).copy()
    removed: list[int] = []

    def upload_bound(k: int) -> float:
        cap = rate_upper_bound(
            scenario.channels[k], cfg.p_max, cfg.streams, cfg.bandwidth, scenario.noise_power
        )
        return scenario.devices[k].task_bits / cap

    def local_feasible(k: int) -> bool:
        dev = scenario.devices[k]
        return local_delay(dev, cfg.alpha) <= dev.tau_max

    # hopeless offloaders: own deadline unreachable even at the capped rate
    for k in np.flatnonzero(mask):
        dev = scenario.devices[int(k)]
        slack = dev.tau_max - edge_delay(dev, cfg.alpha)
        if slack <= upload_bound(int(k)) and local_feasible(int(k)):
            mask[k] = False
            removed.append(int(k))
            log.info("repair: device %d cannot offload within its deadline", k)

    while mask.any():
        try:
            solution = solve_beamforming(scenario, tuple(np.flatnonzero(mask)))
            return mask, solution, tuple(removed)
        except InnerInfeasible:
            movable = [int(k) for k in np.flatnonzero(mask) if local_feasible(int(k))]
            if not movable:
                break
            drop = max(movable, key=upload_bound)
            mask[drop] = False
            removed.append(drop)
            log.info("repair: moving device %d back to local", drop)

    if not mask.any():
        return mask, None, tuple(removed)
    off = tuple(int(k) for k in np.flatnonzero(mask))
    n_off = len(off)
    log.info("repair: no delay-feasible local fallback for %d devices, best effort", n_off)
    devices = [scenario.devices[k] for k in off]
    bits = np.array([dev.task_bits for dev in devices])
    slack = np.array([dev.tau_max - edge_delay(dev, cfg.alpha) for dev in devices])
    delay_cap = float(np.min(slack))
    if delay_cap <= 0.0:
        # no rate meets the worst deadline; push every upload as hard as possible
        solution = solve_beamforming(scenario, off, rate_floor_override=np.full(n_off, np.inf))
        return mask, solution, tuple(removed)

    def upload_energy(sol: BeamformingSolution) -> float:
        idx = list(off)
        return float(np.sum(sol.tx_powers[idx] * bits / sol.rates[idx]))

    floors = bits / delay_cap
    solution = solve_beamforming(scenario, off, rate_floor_override=floors)
    beta = float(np.min(solution.rates[list(off)] / floors))
    if beta < 1.0:
        # floors unreachable: back off to the nearest proportional target so
        # devices with rate slack stop burning full power on the frontier
        relaxed = solve_beamforming(scenario, off, rate_floor_override=0.999 * beta * floors)
        relaxed_beta = float(np.min(relaxed.rates[list(off)] / floors))
        if relaxed_beta >= 0.95 * beta and upload_energy(relaxed) < upload_energy(solution):
            solution = relaxed
    return mask, solution, tuple(removed)
