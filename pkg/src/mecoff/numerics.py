"""Dense linear-algebra helpers and a small interior-point SDP solver.

The SDP solver handles problems of the form

    minimize    <C, G>
    subject to  <A_i, G>  = b_i   (i = 1..m_eq)
                <B_j, G| <= d_j   (j = 1..m_in)
                G PSD, real symmetric

by adjoining one nonnegative slack scalar per inequality as an extra 1x1
diagonal block of the cone variable, then running an infeasible-start
primal-dual path-following method (HKM direction, Mehrotra
predictor-corrector, 0.99 fraction-to-boundary).  All data matrices are
treated as dense but the Schur complement is assembled from their nonzero
triplets, which keeps iterations cheap for the sparse constraint structure
this package produces.

Sizes stay small (a few hundred rows at most), so everything is plain numpy
with LAPACK factorizations underneath.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITER = "max_iter"

_SYM_TOL = 1e-12


class NotPositiveDefinite(ValueError):
    """Raised when a Cholesky pivot of a supposedly HPD matrix fails."""


class AsymmetricInput(ValueError):
    """Raised when an SDP data matrix is asymmetric beyond tolerance."""


def solve_hpd_system(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for Hermitian positive-definite a via Cholesky."""
    a = np.asarray(a)
    b = np.asarray(b)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def _check_symmetric(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    scale = max(1.0, float(np.abs(mat).max()))
    if np.abs(mat - mat.T).max() > _SYM_TOL * scale:
        raise AsymmetricInput(f"{what} is asymmetric beyond {_SYM_TOL} relative")
    return 0.5 * (mat + mat.T)


@dataclasses.dataclass
class SdpProblem:
    """Data of one standard-form SDP (see module docstring)."""

    c_matrix: np.ndarray
    eq_mats: list[np.ndarray]
    eq_rhs: np.ndarray
    ineq_mats: list[np.ndarray] = dataclasses.field(default_factory=list)
    ineq_rhs: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        self.c_matrix = _check_symmetric(self.c_matrix, "objective matrix")
        n = self.c_matrix.shape[0]
        self.eq_mats = [_check_symmetric(m, f"equality matrix {i}") for i, m in enumerate(self.eq_mats)]
        self.ineq_mats = [
            _check_symmetric(m, f"inequality matrix {j}") for j, m in enumerate(self.ineq_mats)
        ]
        for mat in self.eq_mats + self.ineq_mats:
            if mat.shape != (n, n):
                raise ValueError("constraint matrix shape mismatch")
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float)
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float)
        if len(self.eq_rhs) != len(self.eq_mats) or len(self.ineq_rhs) != len(self.ineq_mats):
            raise ValueError("constraint right-hand-side length mismatch")

    @property
    def dim(self) -> int:
        return self.c_matrix.shape[0]


@dataclasses.dataclass(frozen=True)
class SdpSolution:
    matrix: np.ndarray  # primal optimizer G, the slack block stripped
    objective_value: float
    status: str
    iterations: int
    duality_gap: float  # normalized |primal - dual|
    primal_infeasibility: float
    dual_infeasibility: float
    y_eq: np.ndarray
    y_ineq: np.ndarray


class _Triplets:
    """Nonzero entries of the stacked constraint matrices, flattened."""

    def __init__(self, mats: list[np.ndarray], n_aug: int, n_base: int) -> None:
        rows, cols, vals, owner = [], [], [], []
        for j, mat in enumerate(mats):
            r, c = np.nonzero(mat)
            rows.append(r)
            cols.append(c)
            vals.append(mat[r, c])
            owner.append(np.full(len(r), j))
        self.m = len(mats)
        self.rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        self.cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        self.vals = np.concatenate(vals) if vals else np.zeros(0)
        self.owner = np.concatenate(owner) if owner else np.zeros(0, dtype=int)
        self.slices: list[slice] = []
        start = 0
        for r in rows:
            self.slices.append(slice(start, start + len(r)))
            start += len(r)
        self.n_aug = n_aug
        self.n_base = n_base

    def add_slack_entries(self) -> None:
        """Append the +1 slack diagonal entry (n_base + j, same) to row j."""
        extra_idx = self.n_base + np.arange(self.m)
        self.rows = np.concatenate([self.rows, extra_idx])
        self.cols = np.concatenate([self.cols, extra_idx])
        self.vals = np.concatenate([self.vals, np.ones(self.m)])
        self.owner = np.concatenate([self.owner, np.arange(self.m)])
        order = np.argsort(self.owner, kind="stable")
        self.rows, self.cols = self.rows[order], self.cols[order]
        self.vals, self.owner = self.vals[order], self.owner[order]
        self.slices = []
        bounds = np.searchsorted(self.owner, np.arange(self.m + 1))
        for j in range(self.m):
            self.slices.append(slice(bounds[j], bounds[j + 1]))

    def apply(self, mat: np.ndarray) -> np.ndarray:
        """Vector of Tr(A_j mat); mat need not be symmetric."""
        if len(self.vals) == 0:
            return np.zeros(self.m)
        terms = self.vals * mat[self.cols, self.rows]
        return np.bincount(self.owner, weights=terms, minlength=self.m)

    def adjoint(self, y: np.ndarray, out: np.ndarray) -> None:
        """Accumulate sum_j y_j A_j into ``out``."""
        if len(self.vals) == 0:
            return
        np.add.at(out, (self.rows, self.cols), self.vals * y[self.owner])


def _merge_triplets(eq: _Triplets, ineq: _Triplets) -> _Triplets:
    merged = _Triplets([], eq.n_aug, eq.n_base)
    merged.m = eq.m + ineq.m
    merged.rows = np.concatenate([eq.rows, ineq.rows])
    merged.cols = np.concatenate([eq.cols, ineq.cols])
    merged.vals = np.concatenate([eq.vals, ineq.vals])
    merged.owner = np.concatenate([eq.owner, ineq.owner + eq.m])
    order = np.argsort(merged.owner, kind="stable")
    merged.rows, merged.cols = merged.rows[order], merged.cols[order]
    merged.vals, merged.owner = merged.vals[order], merged.owner[order]
    bounds = np.searchsorted(merged.owner, np.arange(merged.m + 1))
    merged.slices = [slice(bounds[j], bounds[j + 1]) for j in range(merged.m)]
    return merged


def _schur_matrix(tri: _Triplets, x: np.ndarray, sinv: np.ndarray) -> np.ndarray:
    """M_ij = Tr(A_i X A_j Sinv), assembled from triplets."""
    m = tri.m
    schur = np.empty((m, m))
    for i in range(m):
        sl = tri.slices[i]
        r1, c1, v1 = tri.rows[sl], tri.cols[sl], tri.vals[sl]
        xb = x[np.ix_(c1, tri.rows)]  # X[c1, r2]
        sb = sinv[np.ix_(r1, tri.cols)]  # Sinv[c2, r1] by symmetry
        w = (v1[:, None] * xb * sb).sum(axis=0) * tri.vals
        schur[i] = np.bincount(tri.owner, weights=w, minlength=m)
    return schur


def _max_step(mat: np.ndarray, dmat: np.ndarray) -> float:
    """Largest t with mat + t*dmat PSD, for PD ``mat``."""
    chol = scipy.linalg.cholesky(mat, lower=True, check_finite=False)
    w = scipy.linalg.solve_triangular(chol, dmat, lower=True, check_finite=False)
    inner = scipy.linalg.solve_triangular(chol, w.T, lower=True, check_finite=False)
    inner = 0.5 * (inner + inner.T)
    lam_min = scipy.linalg.eigvalsh(inner, check_finite=False)[0]
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


def _factor_with_jitter(schur: np.ndarray):
    jitter = 0.0
    base = max(np.trace(schur) / max(len(schur), 1), 1.0)
    for attempt in range(4):
        try:
            return scipy.linalg.cho_factor(
                schur + jitter * np.eye(len(schur)), lower=True, check_finite=False
            )
        except scipy.linalg.LinAlgError:
            jitter = base * (1e-12 if attempt == 0 else jitter / base * 100.0)
    raise scipy.linalg.LinAlgError("Schur complement factorization failed")


def solve_sdp(
    problem: SdpProblem,
    tol: float = 1e-7,
    max_iter: int = 200,
) -> SdpSolution:
    """Run the interior-point method on ``problem``.

    Returns status ``optimal`` when primal/dual residuals and the normalized
    duality gap all fall below ``tol``; ``infeasible`` when a diverging dual
    objective certifies primal infeasibility; ``max_iter`` otherwise.
    """
    n = problem.dim
    m_eq, m_in = len(problem.eq_mats), len(problem.ineq_mats)
    m = m_eq + m_in
    n_aug = n + m_in

    c_aug = np.zeros((n_aug, n_aug))
    c_aug[:n, :n] = problem.c_matrix

    tri_eq = _Triplets(problem.eq_mats, n_aug, n)
    tri_in = _Triplets(problem.ineq_mats, n_aug, n)
    tri_in.add_slack_entries()
    tri = _merge_triplets(tri_eq, tri_in)
    b_aug = np.concatenate([problem.eq_rhs, problem.ineq_rhs])

    rhs_scale = float(np.abs(b_aug).max()) if m else 0.0
    rho = 1.0 + rhs_scale
    x = rho * np.eye(n_aug)
    s = (1.0 + np.linalg.norm(c_aug)) * np.eye(n_aug)
    y = np.zeros(m)

    b_norm = 1.0 + np.linalg.norm(b_aug)
    c_norm = 1.0 + np.linalg.norm(c_aug)

    status = STATUS_MAX_ITER
    iterations = 0
    gap = np.inf
    prim_inf = np.inf
    dual_inf = np.inf

    for iteration in range(1, max_iter + 1):
        iterations = iteration
        r_p = b_aug - tri.apply(x)
        r_d = c_aug - s
        tri.adjoint(-y, r_d)

        pobj = float(np.sum(c_aug * x))
        dobj = float(b_aug @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        prim_inf = np.linalg.norm(r_p) / b_norm
        dual_inf = np.linalg.norm(r_d) / c_norm
        if gap <= tol and prim_inf <= tol and dual_inf <= tol:
            status = STATUS_OPTIMAL
            break
        if dobj > 1.0 / tol and dual_inf <= np.sqrt(tol):
            status = STATUS_INFEASIBLE
            break

        mu = float(np.sum(x * s)) / n_aug
        try:
            sinv = scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(s, lower=True, check_finite=False),
                np.eye(n_aug),
                check_finite=False,
            )
        except scipy.linalg.LinAlgError:
            log.warning("dual iterate lost positive definiteness at iteration %d", iteration)
            break
        sinv = 0.5 * (sinv + sinv.T)

        try:
            schur_fac = _factor_with_jitter(_schur_matrix(tri, x, sinv))
        except scipy.linalg.LinAlgError:
            log.warning("Schur factorization failed at iteration %d", iteration)
            break

        x_rd_sinv = x @ r_d @ sinv

        def direction(r_c: np.ndarray):
            rhs = r_p - tri.apply(r_c @ sinv) + tri.apply(x_rd_sinv)
            dy = scipy.linalg.cho_solve(schur_fac, rhs, check_finite=False)
            ds = r_d.copy()
            tri.adjoint(-dy, ds)
            dx = (r_c - x @ ds) @ sinv
            dx = 0.5 * (dx + dx.T)
            return dx, dy, ds

        try:
            # predictor
            dx_aff, dy_aff, ds_aff = direction(-x @ s)
            ap_aff = min(1.0, _max_step(x, dx_aff))
            ad_aff = min(1.0, _max_step(s, ds_aff))
            mu_aff = float(np.sum((x + ap_aff * dx_aff) * (s + ad_aff * ds_aff))) / n_aug
            sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-8))

            # corrector
            r_c = sigma * mu * np.eye(n_aug) - x @ s - dx_aff @ ds_aff
            dx, dy, ds = direction(r_c)

            alpha_p = min(1.0, 0.99 * _max_step(x, dx))
            alpha_d = min(1.0, 0.99 * _max_step(s, ds))
        except scipy.linalg.LinAlgError:
            # an iterate lost definiteness to roundoff; keep the last one
            log.warning("step computation failed at iteration %d; stopping", iteration)
            break
        x = x + alpha_p * dx
        y = y + alpha_d * dy
        s = s + alpha_d * ds

    g = 0.5 * (x[:n, :n] + x[:n, :n].T)
    return SdpSolution(
        matrix=g,
        objective_value=float(np.sum(problem.c_matrix * g)),
        status=status,
        iterations=iterations,
        duality_gap=float(gap),
        primal_infeasibility=float(prim_inf),
        dual_infeasibility=float(dual_inf),
        y_eq=y[:m_eq].copy(),
        y_ineq=y[m_eq:].copy(),
    )
