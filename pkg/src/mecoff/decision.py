"""Offload decisions via semidefinite relaxation of the lifted decision QCQP.

The binary offload problem couples each device's decision bit with its
uplink rate, upload energy, and the shared upload-phase length.  Collecting
those variables into one vector

    s = [c_1..c_K, R_1..R_K, e_1..e_K, p_1..p_K, t]

(c: decision bits, R: rates, e: per-task upload energies, p: transmit
powers, t: upload-phase length) turns objective and constraints into
quadratic forms.  Lifting G = [s;1][s;1]^T and dropping the rank-1
requirement yields a semidefinite program whose last row holds s itself;
thresholding its decision-bit entries recovers a binary assignment.

Beyond the core rows, the lift adds per-variable box rows (diagonal vs cap
times the linear entry).  Without them the relaxation is unbounded: nothing
in the core constraint set caps the rate/energy diagonal blocks, so the
objective's decision-energy coupling terms can be pushed to -infinity along
a PSD-feasible ray.  The box caps come from achievable rates, the power
budget, and the deadlines.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .numerics import (
    STATUS_MAX_ITER,
    STATUS_OPTIMAL,
    SdpProblem,
    SdpSolution,
    solve_sdp,
)
from .scenario import Scenario
from .system_model import local_delay, offload_fixed_costs, rate_upper_bound

log = logging.getLogger(__name__)

SDP_TOL = 1e-7
SDP_MAX_ITER = 200
# a max_iter exit is still usable when the gap/residuals are this small
ACCEPT_GAP = 1e-5
ACCEPT_VIOLATION = 1e-6

RATE_UNIT = 1e6  # rates are scaled to Mbit/s inside the SDP


class SdpFailed(RuntimeError):
    """Raised when the decision SDP ends without a usable iterate."""


@dataclasses.dataclass(frozen=True)
class SVectorLayout:
    """Index bookkeeping for the stacked decision vector."""

    num_devices: int

    @property
    def dim(self) -> int:
        return 4 * self.num_devices + 1

    def c(self, k: int) -> int:
        return k

    def rate(self, k: int) -> int:
        return self.num_devices + k

    def energy(self, k: int) -> int:
        return 2 * self.num_devices + k

    def power(self, k: int) -> int:
        return 3 * self.num_devices + k

    @property
    def t(self) -> int:
        return 4 * self.num_devices


@dataclasses.dataclass
class QcqpInstance:
    """Quadratic forms of the decision problem, in SI units."""

    layout: SVectorLayout
    objective_quad: np.ndarray  # (dim, dim)
    objective_lin: np.ndarray  # (dim,), objective adds 2 * lin @ s
    tx_energy_quads: list[np.ndarray]  # per k: s^T Q s = -R_k e_k
    upload_delay_quads: list[np.ndarray]  # per k: s^T Q s = -t R_k
    deadline_quads: list[np.ndarray]  # per k: s^T Q s = c_k t
    task_bits: np.ndarray
    t_loc: np.ndarray
    tau_max: np.ndarray
    p_max: float
    rate_bounds: np.ndarray
    delta: np.ndarray
    eta: float

    def objective(self, s: np.ndarray) -> float:
        return float(s @ self.objective_quad @ s + 2.0 * self.objective_lin @ s)


@dataclasses.dataclass(frozen=True)
class LiftedRow:
    name: str
    matrix: np.ndarray  # (dim+1, dim+1), unscaled
    rhs: float
    is_equality: bool


@dataclasses.dataclass
class LiftedSdp:
    layout: SVectorLayout
    objective: np.ndarray  # (dim+1, dim+1), unscaled
    rows: list[LiftedRow]
    problem: SdpProblem  # scaled and row-normalized
    var_scale: np.ndarray  # maps scaled G back: G = D G_scaled D
    objective_scale: float


@dataclasses.dataclass(frozen=True)
class OffloadDecision:
    offload_mask: np.ndarray  # bool (K,)
    scores: np.ndarray  # relaxed decision values in [0, 1]
    solver_status: str
    forced: tuple[int, ...] = ()  # devices forced to offload by local deadlines
    fallback: bool = False  # all-local fallback after a solver failure

    @property
    def offload_set(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.offload_mask))


def build_qcqp(scenario: Scenario, rate_bounds: np.ndarray) -> QcqpInstance:
    """Assemble the decision QCQP's quadratic forms for one scenario."""
    cfg = scenario.config
    kk = scenario.num_devices
    layout = SVectorLayout(kk)
    dim = layout.dim

    delta, eta = offload_fixed_costs(scenario)
    objective_quad = np.zeros((dim, dim))
    objective_lin = np.zeros(dim)
    tx_energy_quads = []
    upload_delay_quads = []
    deadline_quads = []
    for k in range(kk):
        objective_quad[layout.c(k), layout.energy(k)] += 0.5 * cfg.lambda_e
        objective_quad[layout.energy(k), layout.c(k)] += 0.5 * cfg.lambda_e
        objective_quad[layout.c(k), layout.t] += 0.5 * cfg.lambda_t
        objective_quad[layout.t, layout.c(k)] += 0.5 * cfg.lambda_t
        objective_lin[layout.c(k)] = 0.5 * delta[k]

        q_energy = np.zeros((dim, dim))
        q_energy[layout.rate(k), layout.energy(k)] = -0.5
        q_energy[layout.energy(k), layout.rate(k)] = -0.5
        tx_energy_quads.append(q_energy)

        q_delay = np.zeros((dim, dim))
        q_delay[layout.rate(k), layout.t] = -0.5
        q_delay[layout.t, layout.rate(k)] = -0.5
        upload_delay_quads.append(q_delay)

        q_deadline = np.zeros((dim, dim))
        q_deadline[layout.c(k), layout.t] = 0.5
        q_deadline[layout.t, layout.c(k)] = 0.5
        deadline_quads.append(q_deadline)

    return QcqpInstance(
        layout=layout,
        objective_quad=objective_quad,
        objective_lin=objective_lin,
        tx_energy_quads=tx_energy_quads,
        upload_delay_quads=upload_delay_quads,
        deadline_quads=deadline_quads,
        task_bits=np.array([dev.task_bits for dev in scenario.devices]),
        t_loc=np.array([local_delay(dev, cfg.alpha) for dev in scenario.devices]),
        tau_max=np.array([dev.tau_max for dev in scenario.devices]),
        p_max=cfg.p_max,
        rate_bounds=np.asarray(rate_bounds, dtype=float),
        delta=delta,
        eta=eta,
    )


def _embed(quad: np.ndarray) -> np.ndarray:
    dim = quad.shape[0]
    out = np.zeros((dim + 1, dim + 1))
    out[:dim, :dim] = quad
    return out


def _border(dim: int, index: int, value: float) -> np.ndarray:
    out = np.zeros((dim + 1, dim + 1))
    out[index, dim] = value
    out[dim, index] = value
    return out


def lift_to_sdp(qcqp: QcqpInstance) -> LiftedSdp:
    """Lift the QCQP to a semidefinite program over G = [s;1][s;1]^T."""
    layout = qcqp.layout
    kk = layout.num_devices
    dim = layout.dim

    objective = _embed(qcqp.objective_quad)
    objective[:dim, dim] += qcqp.objective_lin
    objective[dim, :dim] += qcqp.objective_lin

    rows: list[LiftedRow] = []
    corner = np.zeros((dim + 1, dim + 1))
    corner[dim, dim] = 1.0
    rows.append(LiftedRow("corner", corner, 1.0, True))

    tau_cap = float(np.max(qcqp.tau_max))
    for k in range(kk):
        b_k = qcqp.task_bits[k]
        binary = _embed(np.diag(np.eye(dim)[layout.c(k)])) + _border(dim, layout.c(k), -0.5)
        rows.append(LiftedRow(f"binary[{k}]", binary, 0.0, True))

        tx_energy = _embed(qcqp.tx_energy_quads[k]) + _border(dim, layout.power(k), 0.5 * b_k)
        rows.append(LiftedRow(f"tx_energy[{k}]", tx_energy, 0.0, False))

        upload = _embed(qcqp.upload_delay_quads[k]) + _border(dim, layout.c(k), 0.5 * b_k)
        rows.append(LiftedRow(f"upload_delay[{k}]", upload, 0.0, False))

        deadline = _embed(qcqp.deadline_quads[k]) + _border(
            dim, layout.c(k), -0.5 * qcqp.t_loc[k]
        )
        rows.append(
            LiftedRow(f"deadline[{k}]", deadline, qcqp.tau_max[k] - qcqp.t_loc[k], False)
        )

        rows.append(
            LiftedRow(
                f"power_cap[{k}]", _border(dim, layout.power(k), 0.5), qcqp.p_max, False
            )
        )
        rows.append(
            LiftedRow(
                f"rate_cap[{k}]",
                _border(dim, layout.rate(k), 0.5),
                qcqp.rate_bounds[k],
                False,
            )
        )

    box_vars: list[tuple[str, int, float]] = []
    for k in range(kk):
        box_vars.append((f"box_rate[{k}]", layout.rate(k), qcqp.rate_bounds[k]))
        box_vars.append((f"box_energy[{k}]", layout.energy(k), qcqp.p_max * qcqp.tau_max[k]))
        box_vars.append((f"box_power[{k}]", layout.power(k), qcqp.p_max))
    box_vars.append(("box_t", layout.t, tau_cap))
    for name, idx, cap in box_vars:
        diag = np.zeros((dim + 1, dim + 1))
        diag[idx, idx] = 1.0
        rows.append(LiftedRow(name, diag + _border(dim, idx, -0.5 * cap), 0.0, False))

    # variable scaling: decision bits and times stay unit, rates in Mbit/s,
    # powers and energies in budget units
    var_scale = np.ones(dim + 1)
    for k in range(kk):
        var_scale[layout.rate(k)] = RATE_UNIT
        var_scale[layout.energy(k)] = qcqp.p_max
        var_scale[layout.power(k)] = qcqp.p_max
    d_mat = np.diag(var_scale)

    def scale_row(mat: np.ndarray, rhs: float) -> tuple[np.ndarray, float]:
        scaled = d_mat @ mat @ d_mat
        norm = max(float(np.linalg.norm(scaled)), abs(rhs), 1e-12)
        return scaled / norm, rhs / norm

    obj_scaled = d_mat @ objective @ d_mat
    obj_norm = max(float(np.linalg.norm(obj_scaled)), 1e-12)

    eq_mats, eq_rhs, ineq_mats, ineq_rhs = [], [], [], []
    for row in rows:
        mat, rhs = scale_row(row.matrix, row.rhs)
        if row.is_equality:
            eq_mats.append(mat)
            eq_rhs.append(rhs)
        else:
            ineq_mats.append(mat)
            ineq_rhs.append(rhs)

    problem = SdpProblem(
        c_matrix=obj_scaled / obj_norm,
        eq_mats=eq_mats,
        eq_rhs=np.array(eq_rhs),
        ineq_mats=ineq_mats,
        ineq_rhs=np.array(ineq_rhs),
    )
    return LiftedSdp(
        layout=layout,
        objective=objective,
        rows=rows,
        problem=problem,
        var_scale=var_scale,
        objective_scale=obj_norm,
    )


def solve_lifted(lifted: LiftedSdp, tol: float = SDP_TOL, max_iter: int = SDP_MAX_ITER):
    """Solve the scaled SDP and undo the scaling on the returned iterate."""
    raw = solve_sdp(lifted.problem, tol=tol, max_iter=max_iter)
    d_mat = np.diag(lifted.var_scale)
    g_unscaled = d_mat @ raw.matrix @ d_mat
    objective_value = float(np.sum(lifted.objective * g_unscaled))
    return raw, g_unscaled, objective_value


def extract_decisions(
    g_matrix: np.ndarray, layout: SVectorLayout, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    """Threshold the relaxed decision entries of the lifted solution."""
    corner = g_matrix[layout.dim, layout.dim]
    denom = corner if abs(corner) > 1e-9 else 1.0
    scores = g_matrix[layout.dim, : layout.num_devices] / denom
    scores = np.clip(scores, 0.0, 1.0)
    mask = scores > gamma
    return mask, scores


def dm_mmco_decide(scenario: Scenario) -> OffloadDecision:
    """Full decision stage: rate caps, QCQP, lift, SDP, rounding.

    Devices whose local compute time already exceeds their deadline are
    forced to offload after rounding.  A solver failure falls back to the
    all-local assignment (flagged) rather than raising.
    """
    cfg = scenario.config
    bounds = np.array(
        [
            rate_upper_bound(
                scenario.channels[k], cfg.p_max, cfg.streams, cfg.bandwidth, scenario.noise_power
            )
            for k in range(scenario.num_devices)
        ]
    )
    qcqp = build_qcqp(scenario, bounds)
    lifted = lift_to_sdp(qcqp)
    raw, g_unscaled, _ = solve_lifted(lifted)

    usable = raw.status == STATUS_OPTIMAL or (
        raw.status == STATUS_MAX_ITER
        and raw.duality_gap <= ACCEPT_GAP
        and raw.primal_infeasibility <= ACCEPT_VIOLATION
    )
    if not usable:
        log.warning(
            "decision SDP unusable (status=%s gap=%.2e); falling back to deadline rule",
            raw.status,
            raw.duality_gap,
        )
        kk = scenario.num_devices
        forced_mask = qcqp.t_loc > qcqp.tau_max  # local compute cannot meet these
        return OffloadDecision(
            offload_mask=forced_mask,
            scores=forced_mask.astype(float),
            solver_status=raw.status,
            forced=tuple(int(k) for k in np.flatnonzero(forced_mask)),
            fallback=True,
        )

    mask, scores = extract_decisions(g_unscaled, lifted.layout, cfg.gamma)
    forced = tuple(
        int(k) for k in range(scenario.num_devices) if qcqp.t_loc[k] > qcqp.tau_max[k] and not mask[k]
    )
    if forced:
        mask = mask.copy()
        for k in forced:
            mask[k] = True
    return OffloadDecision(
        offload_mask=mask,
        scores=scores,
        solver_status=raw.status,
        forced=forced,
    )
