"""Rational (herding-free) investment and consumption decisions.

For a household acting alone the optimum is explicit:

    I(t) = v / (alpha sigma^2) * exp(r (t - T))
    C(t) = (1 - rho) r t / beta + k

with a constant intercept ``k`` fixed by the horizon budget.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import HouseholdParams, MarketParams, ValidationError

log = logging.getLogger(__name__)

_T_SLACK = 1e-12


def check_times(t, T: float):
    """Return ``t`` as float array(s), raising if any time lies outside [0, T]."""
    arr = np.asarray(t, dtype=np.float64)
    tol = _T_SLACK * max(1.0, T)
    if np.any(arr < -tol) or np.any(arr > T + tol) or not np.all(np.isfinite(arr)):
        raise ValidationError(f"time outside the horizon [0, {T}]")
    return arr


def discount_integral(m: MarketParams) -> float:
    """∫_0^T e^{r(T-t)} dt = (e^{rT} - 1) / r."""
    return math.expm1(m.r * m.horizon_T) / m.r


def budget_factor(h: HouseholdParams, m: MarketParams) -> float:
    """beta/alpha + (e^{rT} - 1)/r, the common normaliser of every intercept."""
    return h.beta / h.alpha + discount_integral(m)


def rational_investment(h: HouseholdParams, m: MarketParams, t):
    t = check_times(t, m.horizon_T)
    out = m.v / (h.alpha * m.sigma**2) * np.exp(m.r * (t - m.horizon_T))
    return float(out) if out.ndim == 0 else out


def intercept_numerator(h: HouseholdParams, m: MarketParams) -> float:
    """Bracketed budget term of the rational intercept (before normalisation).

    The horizon discount enters as ``-rT/alpha``: every term here is in
    currency units, and this is the value that makes the intercept consistent
    with ``ln(eta) = ln(gamma) - rT - beta k``.
    """
    r, T = m.r, m.horizon_T
    rT = r * T
    # e^{rT} - rT - 1, kept accurate for small rT
    curvature = math.expm1(rT) - rT
    return (
        -rT / h.alpha
        + h.x0 * math.exp(rT)
        + math.log(h.gamma) / h.alpha
        + m.v**2 * T / (2.0 * h.alpha * m.sigma**2)
        + (m.rho - 1.0) * curvature / (h.beta * r)
    )


def rational_intercept(h: HouseholdParams, m: MarketParams) -> float:
    h.validate()
    m.validate()
    return intercept_numerator(h, m) / budget_factor(h, m)


def consumption_slope(h: HouseholdParams, m: MarketParams) -> float:
    return (1.0 - m.rho) * m.r / h.beta


def rational_consumption(h: HouseholdParams, m: MarketParams, t, k_bar: float | None = None):
    t = check_times(t, m.horizon_T)
    k = rational_intercept(h, m) if k_bar is None else k_bar
    out = consumption_slope(h, m) * t + k
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RationalDecision:
    """Cached rational intercept for one (household, market) pair."""

    household: HouseholdParams
    market: MarketParams
    k_bar: float = field(default=math.nan)

    def __post_init__(self):
        if math.isnan(self.k_bar):
            object.__setattr__(self, "k_bar", rational_intercept(self.household, self.market))
        if not math.isfinite(self.k_bar):
            raise ValidationError("rational intercept is not finite")

    def investment(self, t):
        return rational_investment(self.household, self.market, t)

    def consumption(self, t):
        return rational_consumption(self.household, self.market, t, self.k_bar)

    def min_consumption(self) -> float:
        """Smallest consumption over [0, T]; the path is linear so an endpoint attains it."""
        T = self.market.horizon_T
        return min(self.k_bar, consumption_slope(self.household, self.market) * T + self.k_bar)


def rational_decision(h: HouseholdParams, m: MarketParams) -> RationalDecision:
    d = RationalDecision(h, m)
    if d.min_consumption() <= 0:
        log.warning("rational consumption is not positive on [0, T] (min %.6g)", d.min_consumption())
    return d
