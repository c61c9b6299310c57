"""Quadrature on [a, b], bracketed root finding and per-path random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray
from scipy import integrate as _sp_integrate
from scipy import optimize as _sp_optimize

from .model import SolverError, ValidationError

SIMPSON = "simpson"
GAUSS_LEGENDRE = "gauss-legendre"
GL_NODES = 5


@dataclass(frozen=True)
class QuadratureRule:
    """Composite rule over ``panels`` equal sub-intervals of [a, b].

    Simpson uses two sub-intervals per panel, so its subinterval count is
    always even.  Gauss-Legendre uses ``GL_NODES`` points per panel.
    """

    kind: Literal["simpson", "gauss-legendre"] = GAUSS_LEGENDRE
    panels: int = 256

    def __post_init__(self):
        if self.kind not in (SIMPSON, GAUSS_LEGENDRE):
            raise ValidationError(f"unknown quadrature kind {self.kind!r}")
        if isinstance(self.panels, bool) or int(self.panels) != self.panels or self.panels < 1:
            raise ValidationError(f"panels must be an integer ≥ 1, got {self.panels!r}")

    def refined(self, factor: int = 2) -> QuadratureRule:
        return QuadratureRule(self.kind, self.panels * factor)


DEFAULT_RULE = QuadratureRule()


@dataclass(frozen=True)
class RootConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol >= 0 and self.rel_tol >= 0):
            raise ValidationError("root tolerances must be ≥ 0")
        if not self.abs_tol + self.rel_tol > 0:
            raise ValidationError("abs_tol + rel_tol must be > 0")
        if isinstance(self.max_iter, bool) or int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError(f"max_iter must be a positive integer, got {self.max_iter!r}")


DEFAULT_ROOT = RootConfig()


@lru_cache(maxsize=None)
def _gl_reference(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def quadrature_nodes(a: float, b: float, rule: QuadratureRule = DEFAULT_RULE):
    """Abscissae and weights such that ``sum(w * f(x))`` approximates the integral."""
    if not a <= b:
        raise ValidationError(f"integration bounds need a ≤ b, got [{a}, {b}]")
    if rule.kind == GAUSS_LEGENDRE:
        x_ref, w_ref = _gl_reference(GL_NODES)
        edges = np.linspace(a, b, rule.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        x = (mid[:, None] + half[:, None] * x_ref[None, :]).ravel()
        w = (half[:, None] * w_ref[None, :]).ravel()
        return x, w
    m = 2 * rule.panels
    x = np.linspace(a, b, m + 1)
    h = (b - a) / m
    w = np.full(m + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w * (h / 3.0)


def _evaluate(f: Callable, x: NDArray[np.float64]) -> NDArray[np.float64]:
    y = np.asarray(f(x), dtype=np.float64)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    bad = ~np.isfinite(y)
    if bad.any():
        t = x[np.argmax(bad)]
        raise SolverError(f"integrand is not finite at t={float(t)!r}")
    return y


def integrate(f: Callable, a: float, b: float, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Integrate a vectorised function ``f`` over [a, b] with a composite rule."""
    x, w = quadrature_nodes(a, b, rule)
    return math.fsum(w * _evaluate(f, x))


def convergence_check(
    f: Callable, a: float, b: float, rule: QuadratureRule = DEFAULT_RULE
) -> tuple[float, float]:
    """Integral at ``rule`` plus |I(panels) - I(2 panels)| as an error estimate."""
    coarse = integrate(f, a, b, rule)
    fine = integrate(f, a, b, rule.refined())
    return coarse, abs(coarse - fine)


def integrate_samples(values, times) -> float:
    """Integrate uniformly sampled values with composite Simpson.

    An odd subinterval count is handled by scipy's end correction.
    """
    y = np.asarray(values, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if y.shape != t.shape or t.size < 2:
        raise ValidationError("samples and times must be equal-length arrays with ≥ 2 points")
    if not np.all(np.isfinite(y)):
        i = int(np.argmax(~np.isfinite(y)))
        raise SolverError(f"integrand is not finite at t={float(t[i])!r}")
    if t.size == 2:
        return float(0.5 * (y[0] + y[1]) * (t[1] - t[0]))
    return float(_sp_integrate.simpson(y, x=t))


def find_root(
    g: Callable[[float], float],
    bracket: tuple[float, float],
    cfg: RootConfig = DEFAULT_ROOT,
) -> float:
    """Root of ``g`` inside a sign-changing bracket."""
    return find_root_full(g, bracket, cfg)[0]


def find_root_full(
    g: Callable[[float], float],
    bracket: tuple[float, float],
    cfg: RootConfig = DEFAULT_ROOT,
) -> tuple[float, int]:
    """Like :func:`find_root` but also returns the iteration count.

    Brent's method: inverse-quadratic/secant steps safeguarded by bisection,
    so convergence is guaranteed once the bracket holds a sign change.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    g_lo, g_hi = g(lo), g(hi)
    if not (math.isfinite(g_lo) and math.isfinite(g_hi)):
        raise SolverError(f"function not finite at bracket ends: g({lo})={g_lo}, g({hi})={g_hi}")
    if g_lo == 0.0:
        return lo, 0
    if g_hi == 0.0:
        return hi, 0
    if g_lo * g_hi > 0:
        raise SolverError(f"no sign change in bracket [{lo}, {hi}]: g={g_lo:.6g}, {g_hi:.6g}")
    # scipy rejects rtol below 4 machine epsilons
    rtol = max(cfg.rel_tol, 4 * np.finfo(float).eps)
    xtol = cfg.abs_tol if cfg.abs_tol > 0 else 1e-300
    try:
        root, info = _sp_optimize.brentq(
            g, lo, hi, xtol=xtol, rtol=rtol, maxiter=int(cfg.max_iter), full_output=True, disp=False
        )
    except ValueError as exc:
        raise SolverError(str(exc)) from exc
    if not info.converged:
        raise SolverError(
            f"root finder exceeded max_iter={cfg.max_iter} (last estimate {root!r})"
        )
    return float(root), int(info.iterations)


# -- counter-based random streams ---------------------------------------------

def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent normal stream for one simulated path.

    The Philox key packs ``(seed, path_index)`` so the stream depends only on
    that pair, never on how many other paths were drawn before it.
    """
    if seed < 0 or seed >= 2**64:
        raise ValidationError(f"seed must fit in 64 unsigned bits, got {seed}")
    key = (int(path_index) << 64) | int(seed)
    return np.random.Generator(np.random.Philox(key=key))
