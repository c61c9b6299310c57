"""Optimal decisions of the herding follower.

The follower's optimum depends on a single positive constant ``eta`` that is
itself an integral of the optimal investment path.  We solve for
``u = ln(eta)``, which keeps the problem scale-free:

    I1*(t; eta) = ratio(t; eta) * I2_bar(t)
    u = RHS(u)        (self-consistency of eta)

and then read off the consumption intercept and the crowding-out amount.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import closed_form as cf
from .model import ControlPath, HerdingScenario, SolverError, TimeGrid, ValidationError
from .numerics import (
    DEFAULT_ROOT,
    DEFAULT_RULE,
    QuadratureRule,
    RootConfig,
    convergence_check,
    find_root_full,
    integrate,
)

log = logging.getLogger(__name__)

MAX_DOUBLINGS = 60
_INTERIOR_PROBES = 8
K_AGREEMENT_RTOL = 1e-8


def _ratio_log_eta(s: HerdingScenario, u: float, t):
    """Investment multiplier on I2_bar for ``eta = exp(u)``; overflow-free."""
    m = s.market
    a1, a2, theta = s.follower.alpha, s.leader.alpha, s.theta
    t = np.asarray(t, dtype=np.float64)
    if theta == 0.0:
        return np.full(t.shape, a2 / a1)
    # z = ln(eta sigma^2 e^{(2-rho) r (T-t)} / theta)
    z = u + 2.0 * math.log(m.sigma) + (2.0 - m.rho) * m.r * (m.horizon_T - t) - math.log(theta)
    small = z <= 0
    ez = np.exp(np.where(small, z, -z))
    return np.where(small, (a2 * ez + 1.0) / (a1 * ez + 1.0), (a2 + ez) / (a1 + ez))


def _check_eta(eta: float) -> float:
    if not (math.isfinite(eta) and eta > 0):
        raise ValidationError(f"eta must be a positive finite number, got {eta!r}")
    return math.log(eta)


def herding_ratio(s: HerdingScenario, eta: float, t):
    """Multiplier turning the leader's rational investment into the follower's optimum."""
    u = _check_eta(eta)
    t = cf.check_times(t, s.market.horizon_T)
    out = _ratio_log_eta(s, u, t)
    return float(out) if out.ndim == 0 else out


def investment_log_eta(s: HerdingScenario, u: float, t):
    t = np.asarray(t, dtype=np.float64)
    return _ratio_log_eta(s, u, t) * cf.rational_investment(s.leader, s.market, t)


def optimal_investment(s: HerdingScenario, eta: float, t):
    u = _check_eta(eta)
    t = cf.check_times(t, s.market.horizon_T)
    out = investment_log_eta(s, u, t)
    return float(out) if out.ndim == 0 else out


def eta_rhs(s: HerdingScenario, u: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Right-hand side of the closed equation for ln(eta), with I1* built from ``exp(u)``."""
    m, h = s.market, s.follower
    r, v, T = m.r, m.v, m.horizon_T
    a, b = h.alpha, h.beta
    disc = cf.discount_integral(m)
    # ∫ e^{r(T-t)} [(1-rho) r t / b + (ln gamma - rT) / b] dt in closed form
    linear = (
        (1.0 - m.rho) / b * (math.expm1(r * T) - r * T) / r
        + (math.log(h.gamma) - r * T) / b * disc
    )
    first = integrate(lambda t: np.exp(r * (T - t)) * investment_log_eta(s, u, t), 0.0, T, rule)
    second = integrate(
        lambda t: np.exp(2.0 * r * (T - t)) * investment_log_eta(s, u, t) ** 2, 0.0, T, rule
    )
    numerator = (
        -a * h.x0 * math.exp(r * T)
        + a * linear
        - a * v * first
        + 0.5 * a**2 * m.sigma**2 * second
    )
    return numerator / (1.0 + a / b * disc)


def eta_residual(s: HerdingScenario, u: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """u - RHS(u); zero exactly at the self-consistent ``u = ln(eta)``."""
    return u - eta_rhs(s, u, rule)


def rational_log_eta(s: HerdingScenario) -> float:
    """ln(eta) when the follower ignores the leader: ln gamma1 - rT - beta1 k1_bar."""
    h, m = s.follower, s.market
    return math.log(h.gamma) - m.r * m.horizon_T - h.beta * cf.rational_intercept(h, m)


@dataclass(frozen=True)
class EtaSolve:
    log_eta: float
    iterations: int
    residual: float
    bracket: tuple[float, float]
    evaluations: int

    @property
    def eta(self) -> float:
        return math.exp(self.log_eta)


def _sign_changes(samples: list[tuple[float, float]]) -> list[int]:
    """Indices i where the residual changes sign between samples i and i+1."""
    signs = [np.sign(res) for _, res in samples]
    return [i for i in range(len(signs) - 1) if signs[i] * signs[i + 1] < 0]


def solve_log_eta(
    s: HerdingScenario,
    root_cfg: RootConfig = DEFAULT_ROOT,
    rule: QuadratureRule = DEFAULT_RULE,
) -> EtaSolve:
    s.validate()
    u0 = rational_log_eta(s)
    n_eval = 0

    def g(u: float) -> float:
        nonlocal n_eval
        n_eval += 1
        return eta_residual(s, u, rule)

    samples: dict[float, float] = {}
    width = 1.0
    for _ in range(MAX_DOUBLINGS + 1):
        for u in (u0 - width, u0 + width):
            if u not in samples:
                samples[u] = g(u)
        ordered = sorted(samples.items())
        changes = _sign_changes(ordered)
        zeros = [u for u, res in ordered if res == 0.0]
        if len(changes) > 1 or (zeros and changes):
            raise SolverError(f"eta equation has multiple roots near ln(eta) in {[ordered[i][0] for i in changes]}")
        if zeros:
            return EtaSolve(zeros[0], 0, 0.0, (zeros[0], zeros[0]), n_eval)
        if changes:
            break
        width *= 2.0
    else:
        raise SolverError(f"no sign change for the eta equation within ±{width / 2:g} of ln(eta)={u0:.6g}")

    i = changes[0]
    lo, hi = ordered[i][0], ordered[i + 1][0]
    probes = np.linspace(lo, hi, _INTERIOR_PROBES + 2)
    probe_samples = [(lo, ordered[i][1])] + [(p, g(p)) for p in probes[1:-1]] + [(hi, ordered[i + 1][1])]
    inner = _sign_changes(probe_samples)
    if len(inner) != 1:
        raise SolverError(f"eta residual is not single-crossing on [{lo:.6g}, {hi:.6g}]")
    j = inner[0]
    lo, hi = probe_samples[j][0], probe_samples[j + 1][0]
    root, iters = find_root_full(g, (lo, hi), root_cfg)
    return EtaSolve(root, iters, eta_residual(s, root, rule), (lo, hi), n_eval)


def solve_eta(
    s: HerdingScenario,
    root_cfg: RootConfig = DEFAULT_ROOT,
    rule: QuadratureRule = DEFAULT_RULE,
) -> float:
    return solve_log_eta(s, root_cfg, rule).eta


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    final_residual: float
    quadrature_est_error: float
    k_formula_gap: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class FollowerSolution:
    eta: float
    log_eta: float
    k1_star: float
    k1_bar: float
    paths: ControlPath
    crowding: float
    diagnostics: SolverDiagnostics
    scenario: HerdingScenario = field(repr=False)

    @property
    def k1_star_from_eta(self) -> float:
        """Intercept recovered from eta alone: (ln(gamma1/eta) - rT) / beta1."""
        h, m = self.scenario.follower, self.scenario.market
        return (math.log(h.gamma) - self.log_eta - m.r * m.horizon_T) / h.beta


def deviation_integral(
    s: HerdingScenario, u: float, rule: QuadratureRule = DEFAULT_RULE
) -> tuple[float, float]:
    """∫ e^{2r(T-t)} [I1*(t) - I1_bar(t)]^2 dt and its panel-doubling error estimate."""
    m = s.market
    r, T = m.r, m.horizon_T

    def f(t):
        gap = investment_log_eta(s, u, t) - cf.rational_investment(s.follower, m, t)
        return np.exp(2.0 * r * (T - t)) * gap**2

    return convergence_check(f, 0.0, T, rule)


def solve_follower(
    s: HerdingScenario,
    grid: TimeGrid,
    root_cfg: RootConfig = DEFAULT_ROOT,
    rule: QuadratureRule = DEFAULT_RULE,
) -> FollowerSolution:
    """Solve eta, then build the follower's intercept, paths and crowding-out amount."""
    from .crowding import crowding_out

    s.validate()
    m, h = s.market, s.follower
    if abs(grid.horizon_T - m.horizon_T) > 1e-12 * m.horizon_T:
        raise ValidationError(f"grid ends at {grid.horizon_T}, scenario horizon is {m.horizon_T}")

    es = solve_log_eta(s, root_cfg, rule)
    eta = es.eta
    dev, dev_err = deviation_integral(s, es.log_eta, rule)
    factor = cf.budget_factor(h, m)
    k_bar = cf.intercept_numerator(h, m) / factor
    k_star = (cf.intercept_numerator(h, m) - 0.5 * h.alpha * m.sigma**2 * dev) / factor
    k_from_eta = (math.log(h.gamma) - es.log_eta - m.r * m.horizon_T) / h.beta
    # the log-eta tolerance maps to an intercept error of order tol / beta1
    scale = max(abs(k_star), abs(k_from_eta), 1.0 / h.beta)
    k_gap = abs(k_star - k_from_eta)
    if k_gap > K_AGREEMENT_RTOL * scale:
        raise SolverError(
            f"intercept formulas disagree: {k_star!r} vs {k_from_eta!r} (gap {k_gap:.3g})"
        )

    crowd = crowding_out(s, eta, rule)
    t = grid.times
    investment = investment_log_eta(s, es.log_eta, t)
    consumption = cf.consumption_slope(h, m) * t + k_star
    notes = []
    if consumption.min() <= 0:
        notes.append(f"optimal consumption is not positive on [0, T] (min {consumption.min():.6g})")
        log.warning(notes[-1])
    diag = SolverDiagnostics(
        iterations=es.iterations,
        final_residual=es.residual,
        quadrature_est_error=0.5 * h.alpha * m.sigma**2 * dev_err / factor,
        k_formula_gap=k_gap,
        warnings=tuple(notes),
    )
    paths = ControlPath(grid, investment, consumption, label="follower optimal")
    return FollowerSolution(
        eta=eta,
        log_eta=es.log_eta,
        k1_star=k_star,
        k1_bar=k_bar,
        paths=paths,
        crowding=crowd,
        diagnostics=diag,
        scenario=s,
    )


def rational_path(s: HerdingScenario, grid: TimeGrid, who: str = "follower") -> ControlPath:
    """Rational (theta = 0) path of either household sampled on ``grid``."""
    h = {"follower": s.follower, "leader": s.leader}[who]
    d = cf.RationalDecision(h, s.market)
    return ControlPath(grid, d.investment(grid.times), d.consumption(grid.times), label=f"{who} rational")
