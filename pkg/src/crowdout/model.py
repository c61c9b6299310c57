"""Parameter and path types shared by every solver module.

All rates (``r``, ``v``) are per unit time and ``sigma`` is per square root of
unit time, with the horizon ``T`` measured in the same unit.  No unit system is
enforced; callers pick a consistent one (years by default).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray


class CrowdoutError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CrowdoutError, ValueError):
    """A parameter or input violates a documented constraint."""


class SolverError(CrowdoutError, RuntimeError):
    """A numerical procedure failed to converge or produced an invalid result."""


def _require_finite(name: str, value: float) -> None:
    if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
        raise ValidationError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")


def _require_positive(name: str, value: float) -> None:
    _require_finite(name, value)
    if not value > 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class MarketParams:
    """Financial environment: one risk-free and one risky asset."""

    r: float  # risk-free interest rate per unit time
    v: float  # excess return rate per unit time
    sigma: float  # volatility per sqrt(unit time)
    horizon_T: float  # horizon length
    rho: float  # decay coefficient of consumption utility and deviation weight

    def validate(self) -> MarketParams:
        # r > 0 strictly: several closed forms divide by r
        _require_positive("r", self.r)
        _require_finite("v", self.v)
        _require_positive("sigma", self.sigma)
        _require_positive("T", self.horizon_T)
        _require_positive("rho", self.rho)
        return self


@dataclass(frozen=True)
class HouseholdParams:
    """Preferences and endowment of a single household."""

    alpha: float  # risk aversion of the terminal-fund utility
    beta: float  # diminishing marginal coefficient of the consumption utility
    gamma: float  # consumption weight
    x0: float  # initial fund

    def validate(self, prefix: str = "") -> HouseholdParams:
        _require_positive(prefix + "alpha", self.alpha)
        _require_positive(prefix + "beta", self.beta)
        _require_positive(prefix + "gamma", self.gamma)
        _require_finite(prefix + "x0", self.x0)
        return self


@dataclass(frozen=True)
class HerdingScenario:
    """Full problem instance: follower H1 herds towards leader H2 with weight theta."""

    market: MarketParams
    follower: HouseholdParams
    leader: HouseholdParams
    theta: float = 0.0

    def validate(self) -> HerdingScenario:
        self.market.validate()
        self.follower.validate("follower.")
        self.leader.validate("leader.")
        _require_finite("theta", self.theta)
        if self.theta < 0:
            raise ValidationError(f"theta must be ≥ 0, got {self.theta!r}")
        return self

    def replace(self, **changes) -> HerdingScenario:
        """Copy with flat-key overrides, e.g. ``replace(theta=0, r=0.02, follower_alpha=0.4)``."""
        flat = scenario_to_dict(self)
        for key, value in changes.items():
            key = key.replace("follower_", "follower.").replace("leader_", "leader.")
            if key not in flat:
                raise ValidationError(f"unknown scenario field {key!r}")
            flat[key] = value
        return scenario_from_dict(flat)


def validate_scenario(s: HerdingScenario) -> HerdingScenario:
    """Return ``s`` unchanged if every invariant holds, else raise ValidationError."""
    return s.validate()


def baseline_scenario(theta: float = 0.01, T: float = 10.0) -> HerdingScenario:
    """Baseline parameters of the reference numerical experiment.

    The experiment does not state its horizon, so ``T`` defaults to 10.
    """
    return HerdingScenario(
        market=MarketParams(r=0.01, v=0.1, sigma=0.1, horizon_T=T, rho=1.0),
        follower=HouseholdParams(alpha=0.2, beta=0.2, gamma=1.0, x0=1.0),
        leader=HouseholdParams(alpha=0.4, beta=0.4, gamma=1.0, x0=1.0),
        theta=theta,
    ).validate()


# -- scenario file format -----------------------------------------------------

SCENARIO_KEYS = (
    "r", "v", "sigma", "T", "rho", "theta",
    "follower.alpha", "follower.beta", "follower.gamma", "follower.x0",
    "leader.alpha", "leader.beta", "leader.gamma", "leader.x0",
)


def scenario_to_dict(s: HerdingScenario) -> dict[str, float]:
    m, f, l = s.market, s.follower, s.leader
    return {
        "r": m.r, "v": m.v, "sigma": m.sigma, "T": m.horizon_T, "rho": m.rho,
        "theta": s.theta,
        "follower.alpha": f.alpha, "follower.beta": f.beta,
        "follower.gamma": f.gamma, "follower.x0": f.x0,
        "leader.alpha": l.alpha, "leader.beta": l.beta,
        "leader.gamma": l.gamma, "leader.x0": l.x0,
    }


def scenario_from_dict(d: dict) -> HerdingScenario:
    """Build and validate a scenario from the flat key/value mapping."""
    if not isinstance(d, dict):
        raise ValidationError("scenario must be a JSON object of flat keys")
    missing = [k for k in SCENARIO_KEYS if k not in d]
    if missing:
        raise ValidationError(f"scenario is missing field(s): {', '.join(missing)}")
    extra = sorted(set(d) - set(SCENARIO_KEYS))
    if extra:
        raise ValidationError(f"scenario has unknown field(s): {', '.join(extra)}")
    for key in SCENARIO_KEYS:
        _require_finite(key, d[key])
    s = HerdingScenario(
        market=MarketParams(r=d["r"], v=d["v"], sigma=d["sigma"], horizon_T=d["T"], rho=d["rho"]),
        follower=HouseholdParams(*(d[f"follower.{k}"] for k in ("alpha", "beta", "gamma", "x0"))),
        leader=HouseholdParams(*(d[f"leader.{k}"] for k in ("alpha", "beta", "gamma", "x0"))),
        theta=d["theta"],
    )
    return s.validate()


def dumps_scenario(s: HerdingScenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def loads_scenario(text: str) -> HerdingScenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"malformed scenario at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return scenario_from_dict(data)


def load_scenario(path: str | Path) -> HerdingScenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


# -- time grid and sampled controls -------------------------------------------

@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform samples of [0, T]."""

    times: NDArray[np.float64]

    def __post_init__(self):
        self.times.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.times.size

    @property
    def horizon_T(self) -> float:
        return float(self.times[-1])

    @property
    def step(self) -> float:
        return self.horizon_T / (self.n_points - 1)

    def __eq__(self, other) -> bool:
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)


def make_uniform_grid(T: float, n: int) -> TimeGrid:
    """Uniform grid of ``n`` points with exact endpoints 0 and ``T``."""
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ValidationError(f"grid needs n ≥ 2 points, got {n!r}")
    _require_positive("T", T)
    n = int(n)
    times = np.arange(n, dtype=np.float64) * (T / (n - 1))
    times[-1] = T
    return TimeGrid(times)


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Investment I(t) and consumption C(t) sampled on a time grid."""

    grid: TimeGrid
    investment: NDArray[np.float64]
    consumption: NDArray[np.float64]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        inv = np.array(self.investment, dtype=np.float64)
        con = np.array(self.consumption, dtype=np.float64)
        n = self.grid.n_points
        if inv.shape != (n,) or con.shape != (n,):
            raise ValidationError(
                f"path samples must have shape ({n},), got {inv.shape} and {con.shape}"
            )
        inv.setflags(write=False)
        con.setflags(write=False)
        object.__setattr__(self, "investment", inv)
        object.__setattr__(self, "consumption", con)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.grid.times

    def is_admissible(self) -> bool:
        """Consumption strictly positive everywhere; investment sign is unrestricted."""
        return bool(np.all(self.consumption > 0))

    def perturbed(self, eps: float, d_investment, d_consumption) -> ControlPath:
        return ControlPath(
            self.grid,
            self.investment + eps * np.asarray(d_investment),
            self.consumption + eps * np.asarray(d_consumption),
            label=self.label,
        )
