import csv
import math

import numpy as np
import pytest

from crowdout import follower as fl
from crowdout import functional as fn
from crowdout import simulate as sim
from crowdout.model import ControlPath, MarketParams, SolverError, ValidationError, make_uniform_grid

VAR_UNIT_INVESTMENT = 0.1107013790800849  # 0.01 ∫_0^10 e^{0.02(10-t)} dt


def const_path(T, n_points, i, c):
    g = make_uniform_grid(T, n_points)
    return ControlPath(g, np.full(n_points, float(i)), np.full(n_points, float(c)))


def optimal_on(s, n_points):
    return fl.solve_follower(s, make_uniform_grid(s.market.horizon_T, n_points)).paths


def test_config_validation():
    for bad in (dict(n_paths=0), dict(n_steps=-1), dict(seed=-1), dict(n_paths=2.5)):
        with pytest.raises(ValidationError):
            sim.SimConfig(**bad)


def test_zero_diffusion_matches_discrete_compounding(baseline):
    path = const_path(10, 101, 0.0, 0.3)
    cfg = sim.SimConfig(n_paths=7, n_steps=100, seed=1)
    xt, _ = sim.terminal_funds(baseline.follower, baseline.market, path, cfg)
    growth = 1 + 0.01 * 0.1
    expected = 1.0 * growth**100 - 0.3 * 0.1 * sum(growth**k for k in range(100))
    np.testing.assert_allclose(xt, expected, rtol=1e-13)


def test_zero_volatility_has_no_spread(baseline):
    m = MarketParams(0.01, 0.1, 1e-300, 10.0, 1.0)
    path = const_path(10, 51, 2.0, 0.0)
    res = sim.simulate_fund(baseline.follower, m, path, sim.SimConfig(n_paths=50, n_steps=50))
    assert res.terminal_fund_var_mc == pytest.approx(0.0, abs=1e-20)


def test_euler_bias_first_order(baseline):
    exact = math.exp(0.1)
    biases = []
    for n in (100, 200, 400):
        xt, _ = sim.terminal_funds(baseline.follower, baseline.market, const_path(10, n + 1, 0, 0),
                                   sim.SimConfig(n_paths=1, n_steps=n))
        biases.append(exact - xt[0])
    assert biases[0] / biases[1] == pytest.approx(2.0, rel=0.01)
    assert biases[1] / biases[2] == pytest.approx(2.0, rel=0.01)


def test_analytic_mean_constant_consumption(baseline):
    c = 0.4
    mean, var = sim.analytic_terminal_moments(baseline.follower, baseline.market, const_path(10, 1025, 0, c))
    assert mean == pytest.approx(math.exp(0.1) - c * math.expm1(0.1) / 0.01, rel=1e-13)
    assert var == 0.0


def test_analytic_variance_unit_investment(baseline):
    _, var = sim.analytic_terminal_moments(baseline.follower, baseline.market, const_path(10, 1025, 1, 0))
    assert var == pytest.approx(VAR_UNIT_INVESTMENT, rel=1e-12)


def test_gaussian_utility():
    assert sim.gaussian_expected_utility(0.5, 1.0, 0.0) == pytest.approx(sim.cara_utility(0.5, 1.0))
    assert sim.gaussian_expected_utility(0.5, 1.0, 4.0) == pytest.approx(-2 * math.exp(-0.5 + 0.5), rel=1e-15)


def test_analytic_utility_equals_fund_term(baseline, grid):
    sol = fl.solve_follower(baseline, grid)
    mean, var = sim.analytic_terminal_moments(baseline.follower, baseline.market, sol.paths)
    leader = fl.rational_path(baseline, grid, "leader")
    fund = fn.evaluate_objective(baseline, sol.paths, leader).fund_utility_term
    assert sim.gaussian_expected_utility(0.2, mean, var) == pytest.approx(fund, rel=1e-10)


def test_grid_must_divide(baseline):
    with pytest.raises(ValidationError, match="divisor"):
        sim.terminal_funds(baseline.follower, baseline.market, const_path(10, 101, 1, 0),
                           sim.SimConfig(n_paths=2, n_steps=30))


def test_grid_must_span_horizon(baseline):
    with pytest.raises(ValidationError):
        sim.terminal_funds(baseline.follower, baseline.market, const_path(5, 101, 1, 0),
                           sim.SimConfig(n_paths=2, n_steps=100))


def test_coarse_steps_on_fine_grid(baseline):
    path = const_path(10, 1001, 0, 0)
    a, _ = sim.terminal_funds(baseline.follower, baseline.market, path, sim.SimConfig(n_paths=3, n_steps=100))
    b, _ = sim.terminal_funds(baseline.follower, baseline.market, const_path(10, 101, 0, 0),
                              sim.SimConfig(n_paths=3, n_steps=100))
    assert np.array_equal(a, b)


def test_reproducible_and_chunk_independent(baseline, monkeypatch):
    path = optimal_on(baseline, 201)
    cfg = sim.SimConfig(n_paths=500, n_steps=200, seed=9)
    a, _ = sim.terminal_funds(baseline.follower, baseline.market, path, cfg)
    b, _ = sim.terminal_funds(baseline.follower, baseline.market, path, cfg)
    monkeypatch.setattr(sim, "_CHUNK_VALUES", 200 * 37)
    c, _ = sim.terminal_funds(baseline.follower, baseline.market, path, cfg)
    assert np.array_equal(a, b) and np.array_equal(a, c)


def test_prefix_stable_in_path_count(baseline):
    path = optimal_on(baseline, 101)
    small, _ = sim.terminal_funds(baseline.follower, baseline.market, path, sim.SimConfig(n_paths=10, n_steps=100))
    big, _ = sim.terminal_funds(baseline.follower, baseline.market, path, sim.SimConfig(n_paths=40, n_steps=100))
    assert np.array_equal(small, big[:10])


def test_seed_changes_draws(baseline):
    path = optimal_on(baseline, 101)
    a, _ = sim.terminal_funds(baseline.follower, baseline.market, path, sim.SimConfig(n_paths=5, n_steps=100, seed=1))
    b, _ = sim.terminal_funds(baseline.follower, baseline.market, path, sim.SimConfig(n_paths=5, n_steps=100, seed=2))
    assert not np.array_equal(a, b)


def test_overflow_reported(baseline):
    m = MarketParams(50.0, 0.1, 0.1, 10.0, 1.0)
    with pytest.raises(SolverError):
        sim.simulate_fund(baseline.follower, m, const_path(10, 11, 0, 0), sim.SimConfig(n_paths=2, n_steps=10))


def test_moderate_monte_carlo(baseline):
    res = sim.simulate_fund(baseline.follower, baseline.market, optimal_on(baseline, 201),
                            sim.SimConfig(n_paths=20_000, n_steps=200, seed=5))
    z = res.z_scores()
    assert abs(z["mean"]) < 4 and abs(z["var"]) < 4 and abs(z["utility"]) < 4


@pytest.mark.slow
def test_fine_step_monte_carlo(baseline):
    res = sim.simulate_fund(baseline.follower, baseline.market, optimal_on(baseline, 10_001),
                            sim.SimConfig(n_paths=100_000, n_steps=10_000, seed=42))
    z = res.z_scores()
    assert abs(z["mean"]) < 4 and abs(z["var"]) < 4 and abs(z["utility"]) < 3


def test_path_dump(tmp_path, baseline):
    path = optimal_on(baseline, 11)
    xt, traces = sim.terminal_funds(baseline.follower, baseline.market, path,
                                    sim.SimConfig(n_paths=4, n_steps=10), keep_paths=2)
    assert traces.shape == (2, 11)
    np.testing.assert_array_equal(traces[:, -1], xt[:2])
    out = tmp_path / "dump.csv"
    sim.write_path_dump(traces, 1.0, out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["path_id", "t", "X"]
    assert len(rows) == 1 + 22
    assert rows[1] == ["0", "0", "1"]
