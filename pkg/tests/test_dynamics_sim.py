from __future__ import annotations

import json

import numpy as np
import pytest

from sbdc.attack_model import benchmark_attack
from sbdc.dynamics_sim import (
    SanConfig,
    SimulationSettings,
    StateVector,
    Trajectory,
    Verdict,
    augmented_laplacian,
    classify,
    disagreement,
    rk4_step,
    san_fixed_point_residual,
    sbdc_drift_oracle,
    simulate_ct,
    simulate_dt,
    simulate_san,
)
from sbdc.errors import NonFiniteState
from sbdc.graph_core import build_graph, laplacian
from sbdc.objective_coding import CodingAssignment, decode_weights, linear_decoder, concave_decoder, synthesize_codeword
from tests.factories import random_connected_graph
from utils.config import BENCHMARK_DT, BENCHMARK_HORIZON, BENCHMARK_INPUT, BENCHMARK_TOL, BENCHMARK_X0

LEADER = SanConfig(leaders=(1,), gains=(1.0,), inputs=(BENCHMARK_INPUT,))
BENCH_SETTINGS = SimulationSettings(convergence_tol=BENCHMARK_TOL)


def nominal(g, decoder=None):
    coding = CodingAssignment.uniform(g, decoder or linear_decoder(1.0))
    return coding, synthesize_codeword(g, coding)


def test_pair_converges_to_average(pair) -> None:
    coding, theta = nominal(pair)
    traj = simulate_ct(pair, coding, theta, None, [0.0, 1.0], horizon=10.0)
    assert traj.verdict is Verdict.CONVERGED
    np.testing.assert_allclose(traj.limit, [0.5], atol=1e-9)
    # closed form x1(t) = 0.5 - 0.5 exp(-2t)
    assert traj.states[-1, 0, 0] == pytest.approx(0.5 - 0.5 * np.exp(-20.0), abs=1e-9)


def test_consensual_start_stays_put(triangle) -> None:
    coding, theta = nominal(triangle)
    traj = simulate_ct(triangle, coding, theta, None, [2.0, 2.0, 2.0], horizon=1.0, dt=0.01)
    np.testing.assert_array_equal(traj.states[-1], np.full((3, 1), 2.0))
    assert traj.verdict is Verdict.CONVERGED


def test_dt_half_step_is_exact_on_pair(pair) -> None:
    coding, theta = nominal(pair)
    traj = simulate_dt(pair, coding, theta, None, [0.0, 1.0], steps=5, epsilon=0.5)
    np.testing.assert_allclose(traj.states[1, :, 0], [0.5, 0.5], atol=1e-15)
    assert traj.verdict is Verdict.CONVERGED
    assert traj.times[1] == 1.0


def test_dt_unit_step_oscillates(pair) -> None:
    coding, theta = nominal(pair)
    traj = simulate_dt(pair, coding, theta, None, [0.0, 1.0], steps=50, epsilon=1.0)
    np.testing.assert_allclose(traj.states[1, :, 0], [1.0, 0.0], atol=1e-15)
    assert traj.verdict is Verdict.UNDECIDED


def test_benchmark_without_leader_converges(bench, coding_k2) -> None:
    theta = synthesize_codeword(bench, coding_k2)
    traj = simulate_ct(bench, coding_k2, theta, benchmark_attack(2, 0.5), BENCHMARK_X0,
                       horizon=BENCHMARK_HORIZON, dt=BENCHMARK_DT, settings=BENCH_SETTINGS)
    assert traj.verdict is Verdict.CONVERGED
    np.testing.assert_allclose(traj.limit, [np.mean(BENCHMARK_X0)], atol=1e-9)


def test_ct_preserves_average(rng) -> None:
    for _ in range(10):
        g = random_connected_graph(rng, int(rng.integers(2, 8)))
        coding, theta = nominal(g, concave_decoder(2.0))
        x0 = rng.uniform(-1.0, 1.0, g.n)
        traj = simulate_ct(g, coding, theta, None, x0, horizon=2.0, dt=1e-2)
        np.testing.assert_allclose(traj.states.mean(axis=1)[:, 0], x0.mean(), atol=1e-8)


def test_dt_step_matches_euler(triangle) -> None:
    coding, theta = nominal(triangle)
    x0 = np.array([0.3, -0.2, 1.1])
    traj = simulate_dt(triangle, coding, theta, None, x0, steps=1, epsilon=1e-3)
    euler = x0 - 1e-3 * laplacian(triangle) @ x0
    np.testing.assert_allclose(traj.states[1, :, 0], euler, atol=1e-14)


def test_dt_approaches_rk4_at_first_order(bench, coding_k2) -> None:
    theta = synthesize_codeword(bench, coding_k2)
    horizon = 1.0
    reference = simulate_ct(bench, coding_k2, theta, None, BENCHMARK_X0, horizon=horizon, dt=1e-3)
    errors = []
    for eps in (1e-3, 1e-4):
        traj = simulate_dt(bench, coding_k2, theta, None, BENCHMARK_X0, steps=int(round(horizon / eps)), epsilon=eps)
        errors.append(np.abs(traj.states[-1] - reference.states[-1]).max())
    order = np.log10(errors[0] / errors[1])
    assert order >= 0.9


def test_benchmark_san_verdicts(bench, coding_k1, coding_k2) -> None:
    attack = benchmark_attack(2, 0.5)
    theta = synthesize_codeword(bench, coding_k2)
    traj = simulate_san(bench, coding_k2, theta, attack, LEADER, BENCHMARK_X0,
                        horizon=BENCHMARK_HORIZON, dt=BENCHMARK_DT, settings=BENCH_SETTINGS)
    assert traj.mode == "san-ct"
    assert traj.verdict is Verdict.CONVERGED
    assert np.abs(traj.states[-1] - BENCHMARK_INPUT).max() < BENCHMARK_TOL

    theta = synthesize_codeword(bench, coding_k1)
    traj = simulate_san(bench, coding_k1, theta, attack, LEADER, BENCHMARK_X0,
                        horizon=BENCHMARK_HORIZON, dt=BENCHMARK_DT, settings=BENCH_SETTINGS)
    assert traj.verdict is Verdict.DIVERGED

    traj = simulate_san(bench, coding_k1, theta, attack, LEADER, BENCHMARK_X0, mode="dt",
                        steps=1000, epsilon=0.1, settings=BENCH_SETTINGS)
    assert traj.mode == "san-dt"
    assert traj.verdict is Verdict.DIVERGED


def test_san_dt_limit_is_the_input(bench, coding_k2) -> None:
    theta = synthesize_codeword(bench, coding_k2)
    traj = simulate_san(bench, coding_k2, theta, benchmark_attack(1, 0.5), LEADER, BENCHMARK_X0, mode="dt",
                        steps=1000, epsilon=0.1, settings=BENCH_SETTINGS)
    assert traj.verdict is Verdict.CONVERGED
    np.testing.assert_allclose(traj.limit, [BENCHMARK_INPUT], atol=BENCHMARK_TOL)


def test_san_argument_errors(bench, coding_k2) -> None:
    theta = synthesize_codeword(bench, coding_k2)
    with pytest.raises(ValueError):
        simulate_san(bench, coding_k2, theta, None, LEADER, BENCHMARK_X0)
    with pytest.raises(ValueError):
        simulate_san(bench, coding_k2, theta, None, LEADER, BENCHMARK_X0, mode="dt", steps=10)
    with pytest.raises(ValueError):
        simulate_san(bench, coding_k2, theta, None, LEADER, BENCHMARK_X0, mode="hybrid", horizon=1.0)
    with pytest.raises(ValueError):
        simulate_san(bench, coding_k2, theta, None, SanConfig((9,), (1.0,), (0.0,)), BENCHMARK_X0, horizon=1.0)


def test_san_config_validation() -> None:
    with pytest.raises(ValueError):
        SanConfig((), (), ())
    with pytest.raises(ValueError):
        SanConfig((1, 1), (1.0, 1.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        SanConfig((1,), (0.0,), (0.0,))
    assert SanConfig.from_dict({"leaders": [2], "inputs": [1.5]}).gains == (1.0,)


def test_san_fixed_point_residual(bench, coding_k2) -> None:
    theta = synthesize_codeword(bench, coding_k2)
    weights = decode_weights(bench, coding_k2, theta, benchmark_attack(2, 0.5))
    assert san_fixed_point_residual(bench, weights, LEADER) <= 1e-12
    L_B = augmented_laplacian(bench, weights, LEADER)
    assert L_B[0, 0] == pytest.approx(laplacian(bench, weights)[0, 0] + 1.0)


def test_drift_oracle_matches_laplacian(rng) -> None:
    for _ in range(100):
        g = random_connected_graph(rng, int(rng.integers(2, 9)))
        coding, theta = nominal(g, concave_decoder(float(rng.uniform(0.5, 6.0))))
        x = rng.uniform(-1.0, 1.0, g.n)
        assert sbdc_drift_oracle(g, coding, theta, x).difference <= 1e-9


def test_drift_oracle_small_cases(bench, coding_k2) -> None:
    theta = synthesize_codeword(bench, coding_k2)
    result = sbdc_drift_oracle(bench, coding_k2, theta, np.full(6, 3.0))
    np.testing.assert_allclose(result.sbdc, 0.0, atol=1e-12)

    g = build_graph(2, [(1, 2, 2.5)])
    coding, theta = nominal(g)
    result = sbdc_drift_oracle(g, coding, theta, [1.0, 3.0])
    np.testing.assert_allclose(result.sbdc[:, 0], [2.5 * 2.0, 2.5 * -2.0], atol=1e-9)


def test_classify_geometric_growth() -> None:
    times = np.arange(20.0)
    states = np.stack([np.array([[1.0], [-1.0]]) * 1.5 ** k for k in range(20)])
    assert classify(Trajectory(times, states, "ct")) is Verdict.DIVERGED

    escaped = Trajectory(np.array([0.0]), np.zeros((1, 2, 1)), "ct", escape_time=0.5)
    assert classify(escaped) is Verdict.DIVERGED
    with pytest.raises(ValueError):
        classify(Trajectory(np.array([0.0]), np.zeros((1, 2, 1)), "ct"))


def test_escape_stops_the_run(bench, coding_k1) -> None:
    theta = synthesize_codeword(bench, coding_k1)
    settings = SimulationSettings(escape_threshold=1e3)
    traj = simulate_ct(bench, coding_k1, theta, benchmark_attack(2, 0.5), BENCHMARK_X0, horizon=1e4, dt=0.05,
                       settings=settings)
    assert traj.verdict is Verdict.DIVERGED
    assert traj.escape_time is not None
    assert np.all(np.isfinite(traj.states))
    assert traj.times[-1] == pytest.approx(traj.escape_time)


def test_csv_and_sidecar(tmp_path, pair) -> None:
    coding, theta = nominal(pair)
    traj = simulate_ct(pair, coding, theta, None, [1.0 / 3.0, 1.0], horizon=1.0, dt=0.5)
    text = traj.to_csv()
    lines = text.split("\n")
    assert lines[0] == "t,x_1,x_2"
    assert lines[1] == "0,0.333333333333,1"
    assert "\r" not in text

    traj.write(tmp_path / "run.csv", tmp_path / "run.verdict.json")
    assert (tmp_path / "run.csv").read_text() == text
    sidecar = json.loads((tmp_path / "run.verdict.json").read_text())
    assert set(sidecar) == {"verdict", "limit", "escape_time", "disagreement_final", "mode", "samples"}


def test_multi_dimensional_states(triangle) -> None:
    coding, theta = nominal(triangle)
    x0 = [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]
    traj = simulate_ct(triangle, coding, theta, None, x0, horizon=10.0, dt=0.01)
    assert traj.dim == 2
    assert traj.columns() == ["t", "x_1_1", "x_1_2", "x_2_1", "x_2_2", "x_3_1", "x_3_2"]
    np.testing.assert_allclose(traj.limit, [1.0, 1.0], atol=1e-9)

    san = SanConfig((2,), (1.0,), ([0.5, -0.5],))
    traj = simulate_san(triangle, coding, theta, None, san, [0.0, 0.0, 0.0], horizon=80.0, dt=0.01)
    np.testing.assert_allclose(traj.states[-1], [[0.5, -0.5]] * 3, atol=1e-6)


def test_non_finite_initial_state(pair) -> None:
    coding, theta = nominal(pair)
    with pytest.raises(NonFiniteState):
        simulate_ct(pair, coding, theta, None, [0.0, float("nan")], horizon=1.0)
    with pytest.raises(NonFiniteState):
        StateVector(0.0, [1.0, float("inf")])


def test_samples_are_decimated(pair) -> None:
    coding, theta = nominal(pair)
    settings = SimulationSettings(max_samples=50)
    traj = simulate_dt(pair, coding, theta, None, [0.0, 1.0], steps=1000, epsilon=0.1, settings=settings)
    assert len(traj) <= 50
    assert traj.times[-1] == 1000.0


def test_rk4_step_exponential() -> None:
    x = rk4_step(lambda _t, y: -y, 0.0, np.array([1.0]), 0.1)
    assert x[0] == pytest.approx(np.exp(-0.1), abs=1e-6)


def test_disagreement_of_consensus_is_zero() -> None:
    states = np.ones((3, 4, 2))
    np.testing.assert_array_equal(disagreement(states), np.zeros(3))


def test_horizon_not_a_multiple_of_dt(pair) -> None:
    coding, theta = nominal(pair)
    traj = simulate_ct(pair, coding, theta, None, [0.0, 1.0], horizon=1.0, dt=0.3)
    np.testing.assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-15)
    assert traj.times[-1] == 1.0
    gap = np.exp(-2.0)
    np.testing.assert_allclose(traj.states[-1, :, 0], [0.5 - 0.5 * gap, 0.5 + 0.5 * gap], atol=1e-3)

    exact = simulate_ct(pair, coding, theta, None, [0.0, 1.0], horizon=1.0, dt=0.1)
    assert len(exact) == 11
    assert exact.times[-1] == 1.0
