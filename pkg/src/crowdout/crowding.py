"""Crowding-out consumption: the constant gap between rational and optimal consumption."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from . import closed_form as cf
from . import follower as fl
from .model import CrowdoutError, HerdingScenario, ValidationError, baseline_scenario
from .numerics import DEFAULT_ROOT, DEFAULT_RULE, QuadratureRule, RootConfig, integrate

log = logging.getLogger(__name__)

SWEEP_PARAMS = ("r", "v", "sigma")
SWEEP_HEADER = ("param", "value", "crowding", "eta", "iterations", "residual")


def crowding_out(s: HerdingScenario, eta: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Crowding-out amount for a solved ``eta``.

    (alpha1 sigma^2 / 2) / (beta1/alpha1 + (e^{rT}-1)/r) * ∫ e^{2r(T-t)} (I1* - I1_bar)^2 dt
    """
    m, h = s.market, s.follower
    u = fl._check_eta(eta)
    r, T = m.r, m.horizon_T

    def integrand(t):
        gap = fl.investment_log_eta(s, u, t) - cf.rational_investment(h, m, t)
        return np.exp(2.0 * r * (T - t)) * gap**2

    return 0.5 * h.alpha * m.sigma**2 * integrate(integrand, 0.0, T, rule) / cf.budget_factor(h, m)


def crowding_out_limit(s: HerdingScenario) -> float:
    """Crowding-out amount as theta → ∞, where the follower copies the leader exactly."""
    s.validate()
    m, h = s.market, s.follower
    spread = (h.alpha / s.leader.alpha - 1.0) ** 2
    return spread / cf.budget_factor(h, m) * m.v**2 * m.horizon_T / (2.0 * h.alpha * m.sigma**2)


def crowding_limit_partials(s: HerdingScenario) -> dict[str, float]:
    """Hand-derived partial derivatives of the theta → ∞ crowding-out amount.

    The limit is ∝ v² / sigma², and depends on r only through the budget factor.
    """
    m, h = s.market, s.follower
    c = crowding_out_limit(s)
    r, T = m.r, m.horizon_T
    factor = cf.budget_factor(h, m)
    # d/dr of (e^{rT}-1)/r
    d_disc = (T * math.exp(r * T) * r - math.expm1(r * T)) / r**2
    return {"r": -c * d_disc / factor, "v": 2.0 * c / m.v, "sigma": -2.0 * c / m.sigma}


def _with_param(s: HerdingScenario, parameter: str, value: float) -> HerdingScenario:
    if parameter not in SWEEP_PARAMS:
        raise ValidationError(f"parameter must be one of {SWEEP_PARAMS}, got {parameter!r}")
    return s.replace(**{parameter: value})


def _param_value(s: HerdingScenario, parameter: str) -> float:
    return getattr(s.market, parameter)


def sensitivity(
    s: HerdingScenario,
    parameter: Literal["r", "v", "sigma"],
    use_limit: bool = True,
    step: float = 1e-4,
    root_cfg: RootConfig = DEFAULT_ROOT,
    rule: QuadratureRule = DEFAULT_RULE,
) -> float:
    """Central-difference derivative of the crowding-out amount w.r.t. a market parameter.

    ``step`` is relative to the parameter value.  With ``use_limit`` the
    theta → ∞ closed form is differentiated, otherwise the solved amount at the
    scenario's own theta.
    """
    x = _param_value(s, parameter)
    h = step * abs(x)
    if not h > 0:
        raise ValidationError("finite-difference step must be > 0")
    try:
        lo, hi = _with_param(s, parameter, x - h), _with_param(s, parameter, x + h)
    except ValidationError as exc:
        raise ValidationError(f"step {step} leaves the valid region: {exc}") from exc

    if use_limit:
        f = crowding_out_limit
    else:
        def f(sc):
            return crowding_out(sc, fl.solve_eta(sc, root_cfg, rule), rule)

    return (f(hi) - f(lo)) / (2.0 * h)


@dataclass(frozen=True)
class SweepSpec:
    parameter: Literal["r", "v", "sigma"]
    lo: float
    hi: float
    n_points: int
    base: HerdingScenario

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMS:
            raise ValidationError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {self.parameter!r}")
        if isinstance(self.n_points, bool) or int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValidationError(f"n_points must be an integer ≥ 2, got {self.n_points!r}")
        if not self.lo < self.hi:
            raise ValidationError(f"sweep range needs lo < hi, got [{self.lo}, {self.hi}]")
        # both ends must give a valid scenario
        _with_param(self.base, self.parameter, self.lo)
        _with_param(self.base, self.parameter, self.hi)

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, int(self.n_points))


@dataclass(frozen=True)
class SweepPoint:
    value: float
    crowding: float
    eta: float
    iterations: int
    residual: float
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    points: tuple[SweepPoint, ...] = field(default_factory=tuple)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def crowding(self) -> np.ndarray:
        return np.array([p.crowding for p in self.points])

    @property
    def failures(self) -> list[SweepPoint]:
        return [p for p in self.points if p.error]

    def is_strictly_monotone(self, direction: int) -> bool:
        c = self.crowding
        d = np.diff(c)
        return bool(np.all(np.isfinite(c)) and np.all(direction * d > 0))


def _sweep_point(s: HerdingScenario, value: float, root_cfg, rule) -> SweepPoint:
    try:
        es = fl.solve_log_eta(s, root_cfg, rule)
        crowd = crowding_out(s, es.eta, rule)
    except CrowdoutError as exc:
        log.warning("sweep point %s failed: %s", value, exc)
        return SweepPoint(value, math.nan, math.nan, 0, math.nan, error=str(exc))
    return SweepPoint(value, crowd, es.eta, es.iterations, es.residual)


def sweep(
    spec: SweepSpec,
    root_cfg: RootConfig = DEFAULT_ROOT,
    rule: QuadratureRule = DEFAULT_RULE,
) -> SweepResult:
    """Solve eta afresh at each parameter value; failures are recorded, not raised."""
    points = tuple(
        _sweep_point(_with_param(spec.base, spec.parameter, float(x)), float(x), root_cfg, rule)
        for x in spec.values()
    )
    return SweepResult(spec.parameter, points)


def _fmt(x: float) -> str:
    return format(x, ".15g")


def sweep_rows(result: SweepResult) -> list[tuple[str, ...]]:
    return [
        (result.parameter, _fmt(p.value), _fmt(p.crowding), _fmt(p.eta), str(p.iterations), _fmt(p.residual))
        for p in result.points
    ]


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(sweep_rows(result))


def baseline_sweep_spec(parameter: str, T: float = 10.0, n_points: int = 21, theta: float = 0.01) -> SweepSpec:
    """Parameter ranges of the baseline experiment."""
    ranges = {"r": (0.005, 0.025), "v": (0.05, 0.25), "sigma": (0.05, 0.25)}
    lo, hi = ranges[parameter]
    return SweepSpec(parameter, lo, hi, n_points, baseline_scenario(theta=theta, T=T))

