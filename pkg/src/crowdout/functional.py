"""Deterministic objective of the follower and variational optimality checks.

For deterministic open-loop controls the expected CARA utility of the
terminal fund is explicit, so the whole objective can be evaluated on sampled
paths without simulation.  Integrals over sampled paths use composite Simpson
on the path's own grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .model import ControlPath, HerdingScenario, MarketParams, SolverError, TimeGrid, ValidationError
from .numerics import integrate_samples


def _same_grid(p1: ControlPath, p2: ControlPath) -> None:
    if p1.grid != p2.grid:
        raise ValidationError("paths must be sampled on identical grids")


def average_deviation(p1: ControlPath, p2: ControlPath, m: MarketParams) -> float:
    """½ ∫ e^{rho r (T-t)} [I1(t) - I2(t)]^2 dt."""
    _same_grid(p1, p2)
    t = p1.times
    gap = p1.investment - p2.investment
    if not np.any(gap):
        return 0.0
    return 0.5 * integrate_samples(np.exp(m.rho * m.r * (m.horizon_T - t)) * gap**2, t)


def fund_exponent(s: HerdingScenario, path: ControlPath) -> float:
    """Log of alpha1 times minus the expected fund utility.

    -alpha x e^{rT} - alpha ∫ e^{r(T-t)} [v I - C] dt + (alpha^2 sigma^2 / 2) ∫ e^{2r(T-t)} I^2 dt
    """
    m, h = s.market, s.follower
    t = path.times
    r, T = m.r, m.horizon_T
    disc = np.exp(r * (T - t))
    drift = integrate_samples(disc * (m.v * path.investment - path.consumption), t)
    spread = integrate_samples(disc**2 * path.investment**2, t)
    return -h.alpha * h.x0 * math.exp(r * T) - h.alpha * drift + 0.5 * h.alpha**2 * m.sigma**2 * spread


@dataclass(frozen=True)
class ObjectiveBreakdown:
    fund_log: float  # log(-fund_utility_term)
    fund_utility_term: float
    consumption_utility_term: float
    deviation_penalty: float
    total_J: float


def evaluate_objective(
    s: HerdingScenario, follower_path: ControlPath, leader_rational: ControlPath
) -> ObjectiveBreakdown:
    """Objective of the follower for deterministic controls.

    ``leader_rational`` supplies the leader's investment that the follower is
    penalised for deviating from.
    """
    _same_grid(follower_path, leader_rational)
    if not (np.all(np.isfinite(follower_path.investment)) and np.all(np.isfinite(follower_path.consumption))):
        raise ValidationError("follower path samples must be finite")
    m, h = s.market, s.follower
    t = follower_path.times

    fund_log = fund_exponent(s, follower_path) - math.log(h.alpha)
    if fund_log > 709.0:
        raise SolverError(f"fund utility overflows (log magnitude {fund_log:.6g})")
    fund = -math.exp(fund_log)

    weight = np.exp(-m.rho * m.r * t - h.beta * follower_path.consumption)
    consumption = -(h.gamma / h.beta) * integrate_samples(weight, t)
    penalty = s.theta * average_deviation(follower_path, leader_rational, m)
    total = fund + consumption - penalty
    if not math.isfinite(total):
        raise SolverError("objective is not finite")
    return ObjectiveBreakdown(fund_log, fund, consumption, penalty, total)


def fourier_directions(
    grid: TimeGrid,
    n_directions: int,
    n_modes: int = 6,
    seed: int = 0,
    investment_scale: float = 1.0,
    consumption_scale: float = 1.0,
) -> list[tuple[NDArray[np.float64], NDArray[np.float64]]]:
    """Random smooth perturbations built from sin(k pi t / T), k = 1..n_modes.

    Every direction vanishes at t = 0.  Coefficients are standard normal with
    a 1/k decay, drawn from a fixed seed.
    """
    rng = np.random.default_rng(seed)
    t = grid.times
    basis = np.sin(np.outer(np.arange(1, n_modes + 1), np.pi * t / grid.horizon_T))
    decay = 1.0 / np.arange(1, n_modes + 1)
    out = []
    for _ in range(n_directions):
        ci = rng.standard_normal(n_modes) * decay
        cc = rng.standard_normal(n_modes) * decay
        out.append((investment_scale * ci @ basis, consumption_scale * cc @ basis))
    return out


@dataclass(frozen=True)
class GapTable:
    epsilons: tuple[float, ...]
    gaps: tuple[float, ...]

    @property
    def min_gap(self) -> float:
        return min(self.gaps)

    def slope(self) -> float:
        """Least-squares slope of log(gap) against log(eps) over the nonzero epsilons."""
        pts = [(e, g) for e, g in zip(self.epsilons, self.gaps) if e > 0]
        if len(pts) < 2 or any(g <= 0 for _, g in pts):
            return math.nan
        x = np.log([e for e, _ in pts])
        y = np.log([g for _, g in pts])
        return float(np.polyfit(x, y, 1)[0])


def variational_gap(
    s: HerdingScenario,
    base_path: ControlPath,
    leader_rational: ControlPath,
    direction: tuple,
    epsilons=(1e-1, 1e-2, 1e-3),
) -> GapTable:
    """J(base) - J(base + eps * direction) for each eps.

    Non-negative gaps that shrink like eps² mean the first variation vanishes
    and the second is negative at ``base_path``.
    """
    d_inv, d_con = (np.asarray(d, dtype=np.float64) for d in direction)
    j0 = evaluate_objective(s, base_path, leader_rational).total_J
    gaps = []
    for eps in epsilons:
        if eps == 0:
            gaps.append(0.0)
            continue
        j = evaluate_objective(s, base_path.perturbed(eps, d_inv, d_con), leader_rational).total_J
        gaps.append(j0 - j)
    return GapTable(tuple(float(e) for e in epsilons), tuple(gaps))
