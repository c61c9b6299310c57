"""Monte Carlo simulation of the fund SDE under deterministic controls.

    dX = [r X + v I(t) - C(t)] dt + sigma I(t) dB,   X(0) = x0

Paths are stepped with Euler-Maruyama.  Because the controls are deterministic,
X(T) is exactly Gaussian, and those moments serve as the oracle for the
simulation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ControlPath, HouseholdParams, MarketParams, SolverError, ValidationError
from .numerics import integrate_samples, path_generator

_CHUNK_VALUES = 4_000_000  # normals held in memory per chunk


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    n_steps: int = 1_000
    seed: int = 42

    def __post_init__(self):
        for name in ("n_paths", "n_steps"):
            val = getattr(self, name)
            if isinstance(val, bool) or int(val) != val or val < 1:
                raise ValidationError(f"{name} must be a positive integer, got {val!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class SimResult:
    mc_mean_utility: float
    mc_std_error: float
    analytic_utility: float
    terminal_fund_mean_mc: float
    terminal_fund_var_mc: float
    terminal_fund_mean_se: float
    terminal_fund_var_se: float
    analytic_mean: float
    analytic_var: float
    n_paths: int
    n_steps: int

    def z_scores(self) -> dict[str, float]:
        """Standardised MC-minus-analytic errors (0 where both agree exactly)."""
        def z(diff, se):
            if se == 0:
                return 0.0 if diff == 0 else math.inf
            return diff / se

        return {
            "mean": z(self.terminal_fund_mean_mc - self.analytic_mean, self.terminal_fund_mean_se),
            "var": z(self.terminal_fund_var_mc - self.analytic_var, self.terminal_fund_var_se),
            "utility": z(self.mc_mean_utility - self.analytic_utility, self.mc_std_error),
        }


def analytic_terminal_moments(h: HouseholdParams, m: MarketParams, path: ControlPath) -> tuple[float, float]:
    """Exact mean and variance of X(T) by variation of constants."""
    t = path.times
    # overflow surfaces as a SolverError from the non-finite integrand check
    with np.errstate(over="ignore", invalid="ignore"):
        disc = np.exp(m.r * (m.horizon_T - t))
        drift = disc * (m.v * path.investment - path.consumption)
        spread = disc**2 * path.investment**2
    mean = h.x0 * math.exp(m.r * m.horizon_T) + integrate_samples(drift, t)
    var = m.sigma**2 * integrate_samples(spread, t)
    return mean, var


def cara_utility(alpha: float, x):
    return -np.exp(-alpha * np.asarray(x)) / alpha


def gaussian_expected_utility(alpha: float, mean: float, var: float) -> float:
    """E[-(1/alpha) e^{-alpha X}] for X ~ N(mean, var), via the Gaussian MGF."""
    return -math.exp(-alpha * mean + 0.5 * alpha**2 * var) / alpha


def _step_controls(path: ControlPath, n_steps: int):
    """Left-hold control values on each Euler step."""
    n_int = path.grid.n_points - 1
    if n_int % n_steps:
        raise ValidationError(
            f"path grid with {n_int} intervals cannot be held on {n_steps} steps (need a divisor)"
        )
    stride = n_int // n_steps
    return path.investment[:-1:stride], path.consumption[:-1:stride]


def _draws(seed: int, start: int, stop: int, n_steps: int) -> np.ndarray:
    return np.stack([path_generator(seed, i).standard_normal(n_steps) for i in range(start, stop)])


def _euler_chunk(x0, m, inv, con, dt, z, keep_paths: bool):
    x = np.full(z.shape[0], float(x0))
    trace = [x.copy()] if keep_paths else None
    sq = math.sqrt(dt)
    for j in range(z.shape[1]):
        x = x + (m.r * x + m.v * inv[j] - con[j]) * dt + m.sigma * inv[j] * sq * z[:, j]
        if keep_paths:
            trace.append(x.copy())
    return x, (np.stack(trace, axis=1) if keep_paths else None)


def terminal_funds(
    h: HouseholdParams,
    m: MarketParams,
    path: ControlPath,
    cfg: SimConfig,
    keep_paths: int = 0,
):
    """Euler-Maruyama terminal funds in path order, plus up to ``keep_paths`` full trajectories."""
    if abs(path.grid.horizon_T - m.horizon_T) > 1e-12 * m.horizon_T:
        raise ValidationError("path grid does not span the market horizon")
    inv, con = _step_controls(path, cfg.n_steps)
    dt = m.horizon_T / cfg.n_steps
    chunk = max(1, _CHUNK_VALUES // cfg.n_steps)
    out = np.empty(cfg.n_paths)
    kept = []
    for start in range(0, cfg.n_paths, chunk):
        stop = min(cfg.n_paths, start + chunk)
        z = _draws(cfg.seed, start, stop, cfg.n_steps)
        want = max(0, min(keep_paths, stop) - start)
        xt, trace = _euler_chunk(h.x0, m, inv, con, dt, z, want > 0)
        out[start:stop] = xt
        if want:
            kept.append(trace[:want])
    if not np.all(np.isfinite(out)):
        raise SolverError("simulated fund overflowed")
    traces = np.concatenate(kept) if kept else np.empty((0, cfg.n_steps + 1))
    return out, traces


def simulate_fund(
    h: HouseholdParams,
    m: MarketParams,
    path: ControlPath,
    cfg: SimConfig = SimConfig(),
) -> SimResult:
    """Simulate X(T) and compare its statistics to the exact Gaussian law."""
    xt, _ = terminal_funds(h, m, path, cfg)
    n = xt.size
    util = cara_utility(h.alpha, xt)
    if not np.all(np.isfinite(util)):
        raise SolverError("utility of simulated funds overflowed")
    mean = float(np.mean(xt))
    var = float(np.var(xt, ddof=1)) if n > 1 else 0.0
    centred = xt - mean
    # standard error of the sample variance from the fourth central moment
    m4 = float(np.mean(centred**4))
    var_se = math.sqrt(max(m4 - var**2, 0.0) / n) if n > 1 else 0.0
    a_mean, a_var = analytic_terminal_moments(h, m, path)
    return SimResult(
        mc_mean_utility=float(np.mean(util)),
        mc_std_error=float(np.std(util, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        analytic_utility=gaussian_expected_utility(h.alpha, a_mean, a_var),
        terminal_fund_mean_mc=mean,
        terminal_fund_var_mc=var,
        terminal_fund_mean_se=math.sqrt(var / n),
        terminal_fund_var_se=var_se,
        analytic_mean=a_mean,
        analytic_var=a_var,
        n_paths=cfg.n_paths,
        n_steps=cfg.n_steps,
    )


def write_path_dump(traces: np.ndarray, dt: float, path: str | Path) -> None:
    """CSV of ``path_id,t,X`` rows for diagnostic plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("path_id", "t", "X"))
        for i, row in enumerate(traces):
            for j, x in enumerate(row):
                w.writerow((i, format(j * dt, ".15g"), format(x, ".15g")))
