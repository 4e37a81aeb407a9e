"""Hermitian solves and the interior-point SDP solver on known problems."""

import json
from pathlib import Path

import numpy as np
import pytest

from mecoff.numerics import (
    AsymmetricInput,
    NotPositiveDefinite,
    STATUS_OPTIMAL,
    SdpProblem,
    solve_hpd_system,
    solve_sdp,
)

FIXTURES = Path(__file__).parent / "fixtures"


def gaussian_elimination(a, b):
    """Partial-pivot elimination, written independently of the module."""
    a = np.array(a, dtype=complex)
    b = np.array(b, dtype=complex)
    n = a.shape[0]
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            a[row, col:] -= factor * a[col, col:]
            b[row] -= factor * b[col]
    x = np.zeros(n, dtype=complex)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def test_hpd_solve_matches_elimination_oracle():
    rng = np.random.default_rng(7)
    b_mat = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    a = b_mat @ b_mat.conj().T + np.eye(8)
    rhs = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    x = solve_hpd_system(a, rhs)
    x_ref = gaussian_elimination(a, rhs)
    assert x == pytest.approx(x_ref, rel=1e-10)
    assert np.linalg.norm(a @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_hpd_solve_residuals_over_many_systems():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        b_mat = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = b_mat @ b_mat.conj().T + n * np.eye(n)
        rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = solve_hpd_system(a, rhs)
        assert np.linalg.norm(a @ x - rhs) <= 1e-9 * max(1.0, np.linalg.norm(rhs))


def test_hpd_solve_matrix_rhs():
    rng = np.random.default_rng(8)
    b_mat = rng.standard_normal((5, 5))
    a = b_mat @ b_mat.T + np.eye(5)
    rhs = rng.standard_normal((5, 3))
    x = solve_hpd_system(a, rhs)
    assert a @ x == pytest.approx(rhs, abs=1e-10)


def test_hpd_solve_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        solve_hpd_system(np.diag([1.0, -1.0]), np.ones(2))


def test_sdp_problem_rejects_asymmetric():
    c = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(AsymmetricInput):
        SdpProblem(c_matrix=c, eq_mats=[np.eye(2)], eq_rhs=np.array([1.0]))


def test_min_eigenvalue_sdp_diagonal():
    # min tr(CX) s.t. tr(X) = 1, X >= 0 has optimum lambda_min(C)
    c = np.diag([3.0, 1.0, 2.0])
    prob = SdpProblem(c_matrix=c, eq_mats=[np.eye(3)], eq_rhs=np.array([1.0]))
    sol = solve_sdp(prob)
    assert sol.status == STATUS_OPTIMAL
    assert sol.objective_value == pytest.approx(1.0, abs=1e-6)
    assert sol.duality_gap <= 1e-7


def test_min_eigenvalue_sdp_rotated():
    # eigenvalues fixed by construction, dense C via a random rotation
    rng = np.random.default_rng(17)
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    eigs = np.array([4.0, -2.5, 0.3, 1.1, 2.2, 5.0])
    c = q @ np.diag(eigs) @ q.T
    prob = SdpProblem(c_matrix=c, eq_mats=[np.eye(6)], eq_rhs=np.array([1.0]))
    sol = solve_sdp(prob)
    assert sol.status == STATUS_OPTIMAL
    assert sol.objective_value == pytest.approx(-2.5, abs=1e-6)
    assert sol.duality_gap <= 1e-7
    # optimizer concentrates on the bottom eigenvector
    v = q[:, 1]
    assert float(v @ sol.matrix @ v) == pytest.approx(1.0, abs=1e-4)


def test_sdp_with_diagonal_caps():
    # max x11 + x22 under x11 <= 2, x22 <= 3 (minimize the negative);
    # PSD lets the off-diagonal float, optimum -5 at diag(2, 3)
    prob = SdpProblem(
        c_matrix=-np.eye(2),
        eq_mats=[],
        eq_rhs=np.zeros(0),
        ineq_mats=[np.diag([1.0, 0.0]), np.diag([0.0, 1.0])],
        ineq_rhs=np.array([2.0, 3.0]),
    )
    sol = solve_sdp(prob)
    assert sol.status == STATUS_OPTIMAL
    assert sol.objective_value == pytest.approx(-5.0, abs=1e-6)
    assert sol.matrix[0, 0] == pytest.approx(2.0, abs=1e-5)
    assert sol.matrix[1, 1] == pytest.approx(3.0, abs=1e-5)


def test_sdp_mixed_constraints():
    # min tr(CX), tr(X) = 1, x11 <= 0.25: pushes weight off the smallest
    # eigenvalue's coordinate; optimum = 0.25*1 + 0.75*2 analytically
    c = np.diag([1.0, 2.0, 4.0])
    prob = SdpProblem(
        c_matrix=c,
        eq_mats=[np.eye(3)],
        eq_rhs=np.array([1.0]),
        ineq_mats=[np.diag([1.0, 0.0, 0.0])],
        ineq_rhs=np.array([0.25]),
    )
    sol = solve_sdp(prob)
    assert sol.objective_value == pytest.approx(0.25 * 1.0 + 0.75 * 2.0, abs=1e-6)
    assert sol.duality_gap <= 1e-7


def test_sdp_iterate_stays_feasible_and_reports():
    c = np.diag([1.0, -1.0])
    prob = SdpProblem(c_matrix=c, eq_mats=[np.eye(2)], eq_rhs=np.array([1.0]))
    sol = solve_sdp(prob)
    eigs = np.linalg.eigvalsh(sol.matrix)
    assert eigs.min() >= -1e-9
    assert sol.iterations >= 1
    assert sol.primal_infeasibility <= 1e-7


def test_lifted_decision_sdp_matches_cross_solver_fixture():
    from mecoff.decision import build_qcqp, lift_to_sdp, solve_lifted
    from mecoff.scenario import ScenarioConfig, generate_scenario
    from mecoff.system_model import rate_upper_bound

    payload = json.loads((FIXTURES / "sdp_reference.json").read_text())
    cfg = ScenarioConfig(num_devices=payload["num_devices"], seed=payload["scenario_seed"])
    sc = generate_scenario(cfg)
    bounds = np.array(
        [
            rate_upper_bound(sc.channels[k], cfg.p_max, cfg.streams, cfg.bandwidth, sc.noise_power)
            for k in range(cfg.num_devices)
        ]
    )
    lifted = lift_to_sdp(build_qcqp(sc, bounds))
    raw, _, objective = solve_lifted(lifted)
    ref = payload["unscaled_objective"]
    assert raw.status == STATUS_OPTIMAL
    assert abs(objective - ref) <= 1e-4 * abs(ref)
