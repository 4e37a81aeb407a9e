"""Closed-form auxiliary optima, gradients, loop behavior, and repair rules."""

import dataclasses

import numpy as np
import pytest

from mecoff.beamforming import (
    DomainViolation,
    FpState,
    InnerInfeasible,
    evaluate_fqm,
    feasibility_repair,
    init_beamformers,
    q_subproblem_value_and_grad,
    ratio_objective,
    solve_beamforming,
    surrogate_rates,
    true_rates,
    update_q_matrices,
    update_v,
    update_w,
    update_z,
)
from mecoff.scenario import MobileDevice, Scenario, ScenarioConfig, generate_scenario
from mecoff.system_model import edge_delay, local_delay, rate_upper_bound

# uint64 seed of a spatially overloaded ten-device cell (twenty streams into
# sixteen antennas) whose deadline rate floors defeat the initializer
OVERLOADED_SEED = 11398993441189130860


def random_state(rng, n_off=3, m_ant=6, n_ant=2, d=2, lambda_t=0.7, intra=False):
    """Random mid-optimization state with tightened auxiliaries."""
    shape = (n_off, m_ant, n_ant)
    channels = 1e-4 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    channels /= np.sqrt(2.0)
    p_max = 0.1
    q = rng.standard_normal((n_off, n_ant, d)) + 1j * rng.standard_normal((n_off, n_ant, d))
    norms2 = np.real(np.sum(np.abs(q) ** 2, axis=(1, 2)))
    q *= np.sqrt(0.5 * p_max / norms2)[:, None, None]
    v = rng.standard_normal((n_off, m_ant, d)) + 1j * rng.standard_normal((n_off, m_ant, d))
    state = FpState(
        offload_set=tuple(range(n_off)),
        channels=channels,
        task_bits=np.full(n_off, 8e6),
        rate_floors=np.full(n_off, 1.0),
        noise_power=1e-13,
        bandwidth=1e7,
        lambda_e=1.0,
        lambda_t=lambda_t,
        include_intra=intra,
        p_max=p_max,
        beamformers=q,
        receive_filters=v,
        z=np.zeros((n_off, d), dtype=complex),
        w=np.zeros(n_off),
    )
    update_z(state)
    update_w(state)
    return state


def per_stream_quantities(state):
    """Signal amplitudes and interference powers by explicit loops."""
    n_off, d = state.n_off, state.streams
    signal = np.zeros((n_off, d), dtype=complex)
    interference = np.zeros((n_off, d))
    for i in range(n_off):
        for l in range(d):
            v = state.receive_filters[i][:, l]
            own = v.conj() @ state.channels[i] @ state.beamformers[i][:, l]
            signal[i, l] = own
            acc = state.noise_power * float(np.real(v.conj() @ v))
            for j in range(n_off):
                for r in range(d):
                    if state.include_intra:
                        if j == i and r == l:
                            continue
                    elif j == i:
                        continue
                    amp = v.conj() @ state.channels[j] @ state.beamformers[j][:, r]
                    acc += abs(amp) ** 2
            interference[i, l] = acc
    return signal, interference


def looped_rates(state):
    signal, interference = per_stream_quantities(state)
    sinr = np.abs(signal) ** 2 / interference
    return state.bandwidth * np.sum(np.log2(1.0 + sinr), axis=1)


@pytest.mark.parametrize("intra", [False, True])
def test_update_z_is_signal_over_interference(intra):
    rng = np.random.default_rng(42)
    state = random_state(rng, intra=intra)
    signal, interference = per_stream_quantities(state)
    update_z(state)
    np.testing.assert_allclose(state.z, signal / interference, rtol=1e-12)


def test_tight_z_maximizes_each_bracket():
    rng = np.random.default_rng(7)
    state = random_state(rng)
    signal, interference = per_stream_quantities(state)
    z_star = signal / interference

    def bracket(z):
        return 1.0 + 2.0 * np.real(np.conj(z) * signal) - np.abs(z) ** 2 * interference

    best = bracket(z_star)
    np.testing.assert_allclose(best, 1.0 + np.abs(signal) ** 2 / interference, rtol=1e-12)
    for _ in range(25):
        delta = 0.1 * (rng.standard_normal(z_star.shape) + 1j * rng.standard_normal(z_star.shape))
        assert np.all(bracket(z_star + delta * np.abs(z_star)) <= best + 1e-12)


def test_update_w_matches_ratio_formula():
    rng = np.random.default_rng(3)
    state = random_state(rng)
    rates = looped_rates(state)
    powers = np.real(np.sum(np.abs(state.beamformers) ** 2, axis=(1, 2)))
    update_w(state)
    expected = np.sqrt(state.lambda_e * state.task_bits * powers) / rates
    np.testing.assert_allclose(state.w, expected, rtol=1e-12)
    assert state.upload_phase == pytest.approx(float(np.max(state.task_bits / rates)), rel=1e-12)


def test_true_rates_match_looped_rates():
    rng = np.random.default_rng(5)
    for intra in (False, True):
        state = random_state(rng, intra=intra)
        np.testing.assert_allclose(true_rates(state), looped_rates(state), rtol=1e-12)


def test_intra_stream_interference_lowers_rates():
    rng = np.random.default_rng(19)
    state = random_state(rng, intra=False)
    without = true_rates(state)
    state.include_intra = True
    with_intra = true_rates(state)
    assert np.all(with_intra <= without + 1e-9)
    assert np.any(with_intra < without)


@pytest.mark.parametrize("lambda_t", [0.0, 0.7])
def test_tightened_surrogate_equals_ratio_objective(lambda_t):
    rng = np.random.default_rng(23)
    for case in range(20):
        state = random_state(rng, n_off=2 + case % 3, lambda_t=lambda_t, intra=bool(case % 2))
        update_z(state)
        update_w(state)
        lhs = evaluate_fqm(state)
        rhs = ratio_objective(state)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_update_v_solves_per_stream_normal_equations():
    rng = np.random.default_rng(11)
    for intra in (False, True):
        state = random_state(rng, intra=intra)
        update_v(state)
        n_off, d = state.n_off, state.streams
        m_ant = state.channels.shape[1]
        hq = np.array([state.channels[j] @ state.beamformers[j] for j in range(n_off)])
        for i in range(n_off):
            for l in range(d):
                cov = state.noise_power * np.eye(m_ant, dtype=complex)
                for j in range(n_off):
                    for r in range(d):
                        if state.include_intra:
                            if j == i and r == l:
                                continue
                        elif j == i:
                            continue
                        col = hq[j][:, r]
                        cov += np.outer(col, col.conj())
                rhs = hq[i][:, l] / state.z[i, l]
                resid = cov @ state.receive_filters[i][:, l] - rhs
                assert np.linalg.norm(resid) <= 1e-9 * np.linalg.norm(rhs)


def test_updated_filters_maximize_brackets():
    rng = np.random.default_rng(29)
    state = random_state(rng)
    update_v(state)
    signal, interference = per_stream_quantities(state)
    best = 1.0 + 2.0 * np.real(np.conj(state.z) * signal) - np.abs(state.z) ** 2 * interference
    for _ in range(10):
        trial = dataclasses.replace(
            state,
            receive_filters=state.receive_filters
            + 0.05
            * np.linalg.norm(state.receive_filters)
            / state.receive_filters.size
            * (
                rng.standard_normal(state.receive_filters.shape)
                + 1j * rng.standard_normal(state.receive_filters.shape)
            ),
        )
        sig_t, int_t = per_stream_quantities(trial)
        perturbed = 1.0 + 2.0 * np.real(np.conj(state.z) * sig_t) - np.abs(state.z) ** 2 * int_t
        assert np.all(perturbed <= best + 1e-10)


@pytest.mark.parametrize("barrier", [0.0, 0.37])
def test_q_gradient_matches_central_differences(barrier):
    rng = np.random.default_rng(31)
    state = random_state(rng)
    floors = 0.5 * surrogate_rates(state)
    q0 = state.beamformers.copy()
    value, grad = q_subproblem_value_and_grad(state, q0, barrier, floors)
    assert np.isfinite(value)
    h = 1e-6
    n_off, n_ant, d = q0.shape
    for _ in range(12):
        i, a, b = rng.integers(n_off), rng.integers(n_ant), rng.integers(d)
        imag = bool(rng.integers(2))
        step = np.zeros_like(q0)
        step[i, a, b] = 1j * h if imag else h
        up, _ = q_subproblem_value_and_grad(state, q0 + step, barrier, floors)
        down, _ = q_subproblem_value_and_grad(state, q0 - step, barrier, floors)
        fd = (up - down) / (2.0 * h)
        analytic = grad[i, a, b].imag if imag else grad[i, a, b].real
        assert analytic == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_update_q_never_increases_subproblem_objective():
    rng = np.random.default_rng(37)
    for _ in range(10):
        state = random_state(rng, n_off=2 + rng.integers(3))
        state.rate_floors = 0.3 * surrogate_rates(state)
        floors_eff = np.minimum(state.rate_floors, surrogate_rates(state) * (1.0 - 1e-12))
        before, _ = q_subproblem_value_and_grad(state, state.beamformers, 0.0, floors_eff)
        update_q_matrices(state)
        after, _ = q_subproblem_value_and_grad(state, state.beamformers, 0.0, floors_eff)
        assert after <= before + 1e-9 * max(1.0, abs(before))
        assert np.all(state.tx_powers() <= state.p_max * (1.0 + 1e-9))


@pytest.mark.parametrize("seed", [3, 17, 101])
def test_unconstrained_single_offloader_reaches_rate_bound(seed):
    cfg = ScenarioConfig(num_devices=3, seed=seed)
    scenario = generate_scenario(cfg)
    cap = rate_upper_bound(
        scenario.channels[1], cfg.p_max, cfg.streams, cfg.bandwidth, scenario.noise_power
    )
    solution = solve_beamforming(scenario, (1,), rate_floor_override=np.array([np.inf]))
    assert solution.rates[1] >= 0.999 * cap
    assert solution.rates[1] <= cap * (1.0 + 1e-6)
    assert solution.tx_powers[1] == pytest.approx(cfg.p_max, rel=1e-6)


@pytest.mark.parametrize("seed", [3, 17, 101])
def test_single_offloader_meets_its_deadline_floor(seed):
    cfg = ScenarioConfig(num_devices=3, seed=seed)
    scenario = generate_scenario(cfg)
    dev = scenario.devices[1]
    floor = dev.task_bits / (dev.tau_max - edge_delay(dev, cfg.alpha))
    solution = solve_beamforming(scenario, (1,))
    assert solution.rates[1] >= floor * (1.0 - 1e-9)
    assert solution.meets_delay_cap
    assert solution.delay_cap == pytest.approx(dev.tau_max - edge_delay(dev, cfg.alpha))
    assert solution.tx_powers[1] <= cfg.p_max * (1.0 + 1e-9)


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_solve_history_non_increasing_and_terminates(seed):
    cfg = ScenarioConfig(num_devices=4, seed=seed)
    scenario = generate_scenario(cfg)
    solution = solve_beamforming(scenario, tuple(range(4)))
    hist = np.array(solution.fqm_history)
    assert len(hist) == solution.iterations
    assert solution.iterations <= cfg.numiter
    assert np.all(np.diff(hist) <= 1e-9)
    offloaded = solution.rates[solution.rates > 0.0]
    assert len(offloaded) == 4
    uploads = np.array([scenario.devices[k].task_bits for k in range(4)]) / solution.rates
    assert solution.transmission_delay == pytest.approx(float(uploads.max()), rel=1e-12)
    expected = solution.transmission_delay <= solution.delay_cap * (1.0 + 1e-9) + 1e-12
    assert solution.meets_delay_cap == expected


def test_loose_epsilon_stops_after_one_iteration():
    cfg = ScenarioConfig(num_devices=4, seed=11, epsilon=1e9)
    scenario = generate_scenario(cfg)
    solution = solve_beamforming(scenario, tuple(range(4)))
    assert solution.iterations == 1


def test_unreachable_deadline_raises_with_worst_device():
    cfg = ScenarioConfig(num_devices=4, seed=11, tau_max=1.0)
    scenario = generate_scenario(cfg)
    slacks = [dev.tau_max - edge_delay(dev, cfg.alpha) for dev in scenario.devices]
    assert min(slacks) < 0.0
    with pytest.raises(InnerInfeasible) as excinfo:
        init_beamformers(scenario, tuple(range(4)))
    assert excinfo.value.worst_device == int(np.argmin(slacks))


def test_floor_override_turns_failures_into_full_power():
    cfg = ScenarioConfig(num_devices=4, seed=11, tau_max=1.0)
    scenario = generate_scenario(cfg)
    state = init_beamformers(scenario, tuple(range(4)), np.full(4, np.inf))
    np.testing.assert_allclose(state.tx_powers(), cfg.p_max, rtol=1e-9)


def test_negative_bracket_raises_domain_violation():
    rng = np.random.default_rng(41)
    state = random_state(rng)
    state.z *= 1e9
    with pytest.raises(DomainViolation):
        surrogate_rates(state)


def _handmade_scenario(f_locs, gains_scale, tau_max=5.0):
    """Two-device cell with hand-picked compute speeds and channel scales."""
    cfg = ScenarioConfig(num_devices=2, bs_antennas=8, md_antennas=2, streams=2, tau_max=tau_max)
    rng = np.random.default_rng(90210)
    channels = np.empty((2, 8, 2), dtype=complex)
    for k, scale in enumerate(gains_scale):
        draw = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
        channels[k] = np.sqrt(scale / 2.0) * draw
    devices = tuple(
        MobileDevice(
            index=k,
            distance=50.0,
            task_bits=8e6,
            tau_max=tau_max,
            f_loc=f_locs[k],
            f_c=1e12,
        )
        for k in range(2)
    )
    return Scenario(
        config=cfg, devices=devices, channels=channels, gains=np.asarray(gains_scale)
    )


def test_repair_prefilters_hopeless_device_with_feasible_local_mode():
    # device 0: near-dead channel, cannot upload in time, but computes fast
    scenario = _handmade_scenario(f_locs=(1e10, 3e8), gains_scale=(1e-16, 1e-9))
    cfg = scenario.config
    assert local_delay(scenario.devices[0], cfg.alpha) <= cfg.tau_max
    mask, solution, removed = feasibility_repair(scenario, np.array([True, True]))
    assert removed == (0,)
    assert mask.tolist() == [False, True]
    assert solution is not None and solution.meets_delay_cap


def test_repair_moves_movable_devices_then_best_effort():
    # device 0: hopeless upload AND local mode misses its deadline;
    # device 1: healthy, but the only one whose local mode is feasible
    scenario = _handmade_scenario(f_locs=(1e8, 1e10), gains_scale=(1e-16, 1e-9))
    cfg = scenario.config
    assert local_delay(scenario.devices[0], cfg.alpha) > cfg.tau_max
    assert local_delay(scenario.devices[1], cfg.alpha) <= cfg.tau_max
    mask, solution, removed = feasibility_repair(scenario, np.array([True, True]))
    assert removed == (1,)
    assert mask.tolist() == [True, False]
    assert solution is not None
    assert not solution.meets_delay_cap
    assert solution.rates[0] > 0.0
    assert solution.tx_powers[0] <= cfg.p_max * (1.0 + 1e-9)


def test_repair_empties_set_when_every_device_is_hopeless_but_local_feasible():
    scenario = _handmade_scenario(f_locs=(1e10, 1e10), gains_scale=(1e-16, 1e-16))
    mask, solution, removed = feasibility_repair(scenario, np.array([True, True]))
    assert not mask.any()
    assert solution is None
    assert sorted(removed) == [0, 1]


def test_repair_keeps_forced_offloaders_in_overloaded_cell():
    cfg = ScenarioConfig(num_devices=10, seed=OVERLOADED_SEED)
    scenario = generate_scenario(cfg)
    for dev in scenario.devices:
        assert local_delay(dev, cfg.alpha) > dev.tau_max
    with pytest.raises(InnerInfeasible):
        init_beamformers(scenario, tuple(range(10)))
    mask, solution, removed = feasibility_repair(scenario, np.ones(10, dtype=bool))
    assert removed == ()
    assert mask.all()
    assert solution is not None
    assert np.all(solution.rates > 0.0)
