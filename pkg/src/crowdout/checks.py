"""Invariant battery behind ``crowdout check``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import closed_form as cf
from . import crowding as cr
from . import follower as fl
from . import functional as fn
from .model import ControlPath, HerdingScenario, TimeGrid, make_uniform_grid
from .numerics import DEFAULT_ROOT, DEFAULT_RULE, QuadratureRule, RootConfig
from .simulate import SimConfig, simulate_fund


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale else 0.0


def paths_from_log_eta(s: HerdingScenario, grid: TimeGrid, u: float) -> ControlPath:
    """Follower paths implied by a given ln(eta), intercept taken from ln(eta) directly."""
    h, m = s.follower, s.market
    k = (math.log(h.gamma) - u - m.r * m.horizon_T) / h.beta
    t = grid.times
    return ControlPath(grid, fl.investment_log_eta(s, u, t), cf.consumption_slope(h, m) * t + k)


def run_checks(
    s: HerdingScenario,
    grid: TimeGrid | None = None,
    root_cfg: RootConfig = DEFAULT_ROOT,
    rule: QuadratureRule = DEFAULT_RULE,
    sim_cfg: SimConfig = SimConfig(),
    n_directions: int = 25,
    corrupt_eta: float | None = None,
) -> list[CheckResult]:
    """Run every consistency check; ``corrupt_eta`` scales the solved eta (negative control)."""
    s.validate()
    m, h = s.market, s.follower
    grid = grid or make_uniform_grid(m.horizon_T, 1025)
    results = []

    def add(name, ok, detail):
        results.append(CheckResult(name, bool(ok), detail))

    # herding-free reduction
    s0 = s.replace(theta=0.0)
    sol0 = fl.solve_follower(s0, grid, root_cfg, rule)
    i_bar = cf.rational_investment(h, m, grid.times)
    inv_err = float(np.max(np.abs(sol0.paths.investment - i_bar) / np.abs(i_bar))) if m.v else 0.0
    k_err = _rel(sol0.k1_star, sol0.k1_bar)
    add("theta=0 reduction", inv_err < 1e-9 and k_err < 1e-9 and sol0.crowding < 1e-12,
        f"max rel |I1*-I1_bar|={inv_err:.2e}, rel k gap={k_err:.2e}, crowding={sol0.crowding:.2e}")

    # equal risk aversion
    s_eq = s.replace(leader_alpha=h.alpha)
    sol_eq = fl.solve_follower(s_eq, grid, root_cfg, rule)
    i2 = cf.rational_investment(s_eq.leader, m, grid.times)
    eq_err = float(np.max(np.abs(sol_eq.paths.investment - i2) / np.maximum(np.abs(i2), 1e-300)))
    add("equal risk aversion gives no crowding", sol_eq.crowding < 1e-12 and eq_err < 1e-10,
        f"crowding={sol_eq.crowding:.2e}, max rel |I1*-I2_bar|={eq_err:.2e}")

    sol = fl.solve_follower(s, grid, root_cfg, rule)
    u = sol.log_eta if corrupt_eta is None else sol.log_eta + math.log(corrupt_eta)
    k_from_eta = (math.log(h.gamma) - u - m.r * m.horizon_T) / h.beta
    k_gap = _rel(sol.k1_star, k_from_eta)
    add("intercept formulas agree", k_gap < 1e-8, f"relative gap {k_gap:.2e}")

    eta = math.exp(u)
    eta_implied = h.gamma * math.exp(-m.r * m.horizon_T - h.beta * sol.k1_star)
    resid = fl.eta_residual(s, u, rule)
    add("eta self-consistency", _rel(eta, eta_implied) < 1e-9 and abs(resid) < 1e-9,
        f"eta={eta:.12g}, implied={eta_implied:.12g}, residual={resid:.2e}")

    gap = sol.k1_bar - sol.k1_star
    add("crowding nonnegative and equals intercept gap",
        sol.crowding >= 0 and abs(gap - sol.crowding) <= 1e-8 * max(1.0, abs(sol.k1_bar)),
        f"crowding={sol.crowding:.12g}, k1_bar-k1*={gap:.12g}")

    big = s.replace(theta=1e6 * h.alpha * m.sigma**2)
    c_big = cr.crowding_out(big, fl.solve_eta(big, root_cfg, rule), rule)
    c_lim = cr.crowding_out_limit(s)
    lim_err = _rel(c_big, c_lim) if c_lim else abs(c_big)
    add("large-theta limit", lim_err < 1e-3, f"crowding={c_big:.8g}, limit={c_lim:.8g}, rel err={lim_err:.2e}")

    base = paths_from_log_eta(s, grid, u)
    leader = fl.rational_path(s, grid, "leader")
    dirs = fn.fourier_directions(
        grid, n_directions, seed=2024,
        investment_scale=float(np.max(np.abs(base.investment))) or 1.0,
        consumption_scale=float(np.max(np.abs(base.consumption))) or 1.0,
    )
    tables = [fn.variational_gap(s, base, leader, d) for d in dirs]
    min_gap = min(t.min_gap for t in tables)
    slopes = [t.slope() for t in tables]
    slope_ok = all(1.9 <= sl <= 2.1 for sl in slopes)
    add("variational optimality", min_gap >= -1e-12 and slope_ok,
        f"{n_directions} directions, min gap={min_gap:.3e}, slopes in [{min(slopes):.3f}, {max(slopes):.3f}]")

    sim_grid = make_uniform_grid(m.horizon_T, sim_cfg.n_steps + 1)
    sim = simulate_fund(h, m, paths_from_log_eta(s, sim_grid, u), sim_cfg)
    z = sim.z_scores()
    add("Monte Carlo vs exact moments",
        abs(z["mean"]) < 4 and abs(z["var"]) < 4 and abs(z["utility"]) < 3,
        f"z(mean)={z['mean']:+.2f}, z(var)={z['var']:+.2f}, z(utility)={z['utility']:+.2f}")
    return results
