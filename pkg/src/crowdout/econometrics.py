"""Series transforms and multiple linear OLS with classical inference."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from .model import CrowdoutError, ValidationError


class DataError(ValidationError):
    """Malformed or unusable tabular input."""


class RankDeficientError(CrowdoutError, ValueError):
    """Design matrix does not have full column rank."""


@dataclass(frozen=True)
class DataTable:
    names: tuple[str, ...]
    columns: dict[str, np.ndarray]
    dropped_rows: int = 0

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("column names must be unique")
        lengths = {len(self.columns[n]) for n in self.names}
        if len(lengths) > 1:
            raise DataError("all columns must have the same length")
        for n in self.names:
            col = np.asarray(self.columns[n], dtype=np.float64)
            if not np.all(np.isfinite(col)):
                raise DataError(f"column {n!r} contains non-finite values")
            col.setflags(write=False)
            self.columns[n] = col

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.names[0]]) if self.names else 0

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DataError(f"unknown column {name!r}")
        return self.columns[name]

    def with_column(self, name: str, values) -> DataTable:
        cols = dict(self.columns)
        cols[name] = np.asarray(values, dtype=np.float64)
        names = self.names if name in self.names else self.names + (name,)
        return DataTable(names, cols, self.dropped_rows)

    def take(self, rows) -> DataTable:
        return DataTable(self.names, {n: self.columns[n][rows] for n in self.names}, self.dropped_rows)

    @classmethod
    def from_columns(cls, data: dict[str, Sequence[float]]) -> DataTable:
        return cls(tuple(data), {k: np.asarray(v, dtype=np.float64) for k, v in data.items()})


def _parse_cell(text: str) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan", "null", "none"):
        return math.nan
    return float(text)


def read_csv(path: str | Path) -> DataTable:
    """Read a headed numeric CSV; rows with any missing value are dropped and counted."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    names = tuple(h.strip() for h in rows[0])
    if len(set(names)) != len(names) or any(not n for n in names):
        raise DataError(f"{path}: header names must be unique and non-empty")
    kept, dropped = [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(names):
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, expected {len(names)}")
        try:
            values = [_parse_cell(c) for c in row]
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from exc
        if all(math.isfinite(x) for x in values):
            kept.append(values)
        else:
            dropped += 1
    arr = np.array(kept, dtype=np.float64).reshape(len(kept), len(names))
    return DataTable(names, {n: arr[:, i] for i, n in enumerate(names)}, dropped)


def growth_rate(series) -> np.ndarray:
    """Period-on-period growth (x_i - x_{i-1}) / x_{i-1}; one element shorter."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2:
        raise DataError("growth rate needs at least two observations")
    zero = np.flatnonzero(x[:-1] == 0)
    if zero.size:
        raise DataError(f"growth rate undefined: zero previous value at index {int(zero[0])}")
    return np.diff(x) / x[:-1]


def minmax_normalize(series, name: str = "series") -> np.ndarray:
    """Affine map of the series onto [0, 1] (min → 0, max → 1)."""
    x = np.asarray(series, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise DataError(f"cannot normalize constant column {name!r}")
    return (x - lo) / (hi - lo)


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    coefficient: float
    standard_error: float
    t_statistic: float


@dataclass(frozen=True)
class RegressionReport:
    rows: tuple[CoefficientRow, ...]
    r_squared: float
    adjusted_r_squared: float
    f_statistic: float
    n_observations: int
    response: str = ""
    intercept: bool = True
    residual_variance: float = field(default=math.nan)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([r.coefficient for r in self.rows])

    @property
    def standard_errors(self) -> np.ndarray:
        return np.array([r.standard_error for r in self.rows])

    @property
    def t_statistics(self) -> np.ndarray:
        return np.array([r.t_statistic for r in self.rows])

    def row(self, name: str) -> CoefficientRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def _t_stat(coef: float, se: float) -> float:
    if se > 0:
        return coef / se
    return math.copysign(math.inf, coef) if coef != 0 else math.nan


def ols_fit(
    table: DataTable,
    response: str,
    regressors: Sequence[str],
    intercept: bool = True,
) -> RegressionReport:
    """Least squares via QR, with classical (homoskedastic) standard errors.

    R² is centred when an intercept is present, uncentred otherwise.  The F
    statistic tests all slope coefficients jointly with (k, n - p) degrees of
    freedom, where k counts regressors and p all coefficients.
    """
    y = table.column(response)
    cols = [table.column(r) for r in regressors]
    names = (["Intercept"] if intercept else []) + list(regressors)
    n = table.n_rows
    X = np.column_stack(([np.ones(n)] if intercept else []) + cols) if names else np.empty((n, 0))
    p = X.shape[1]
    if p == 0:
        raise DataError("no coefficients to estimate")
    if n <= p:
        raise DataError(f"need more observations ({n}) than coefficients ({p})")

    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    col_norm = np.linalg.norm(X, axis=0)
    tiny = np.finfo(float).eps * n * 100
    if np.any(diag <= tiny * np.maximum(col_norm, 1.0)):
        bad = names[int(np.argmin(diag / np.maximum(col_norm, 1.0)))]
        raise RankDeficientError(f"design matrix is rank deficient (check column {bad!r})")

    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = n - p
    s2 = ssr / dof
    r_inv = linalg.solve_triangular(R, np.eye(p))
    cov_diag = np.sum(r_inv**2, axis=1) * s2
    se = np.sqrt(cov_diag)

    centred = y - y.mean() if intercept else y
    sst = float(centred @ centred)
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    k = p - 1 if intercept else p
    if intercept:
        adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    else:
        adj = 1.0 - (1.0 - r2) * n / dof
    if k == 0:
        f = math.nan
    elif r2 >= 1.0:
        f = math.inf
    else:
        f = (r2 / k) / ((1.0 - r2) / dof)

    rows = tuple(
        CoefficientRow(nm, float(b), float(e), _t_stat(float(b), float(e)))
        for nm, b, e in zip(names, beta, se)
    )
    return RegressionReport(rows, r2, adj, f, n, response, intercept, s2)


def _num(x: float, width: int) -> str:
    return f"{x:>{width}.3f}"


def render_report(rep: RegressionReport, title: str | None = None) -> str:
    """Fixed-width table: coefficients block followed by model statistics."""
    name_w = max([len("Variable"), len("Adjusted R-squared")] + [len(r.name) for r in rep.rows]) + 2
    heads = ("Coefficient", "Standard Error", "t-Statistic")
    widths = [len(h) for h in heads]
    lines = []
    if title:
        lines.append(title)
    header = "Variable".ljust(name_w) + "  ".join(h.rjust(w) for h, w in zip(heads, widths))
    rule = "-" * len(header)
    lines += [rule, header, rule]
    for r in rep.rows:
        cells = [r.coefficient, r.standard_error, r.t_statistic]
        lines.append(r.name.ljust(name_w) + "  ".join(_num(c, w) for c, w in zip(cells, widths)))
    lines.append(rule)
    lines.append("Model Statistics")
    left = [("R-squared", _num(rep.r_squared, widths[0])), ("Adjusted R-squared", _num(rep.adjusted_r_squared, widths[0]))]
    right = [("F-Statistic", _num(rep.f_statistic, widths[2])), ("Observations", f"{rep.n_observations:>{widths[2]}d}")]
    for (ln, lv), (rn, rv) in zip(left, right):
        lines.append(ln.ljust(name_w) + lv + "  " + rn.ljust(widths[1]) + "  " + rv)
    lines.append(rule)
    return "\n".join(lines) + "\n"


def report_records(rep: RegressionReport) -> list[dict]:
    """Machine-readable key/value records, one per coefficient plus one per statistic."""
    out = [
        {"kind": "coefficient", "name": r.name, "coefficient": r.coefficient,
         "standard_error": r.standard_error, "t_statistic": r.t_statistic}
        for r in rep.rows
    ]
    out += [
        {"kind": "statistic", "name": "r_squared", "value": rep.r_squared},
        {"kind": "statistic", "name": "adjusted_r_squared", "value": rep.adjusted_r_squared},
        {"kind": "statistic", "name": "f_statistic", "value": rep.f_statistic},
        {"kind": "statistic", "name": "n_observations", "value": rep.n_observations},
    ]
    return out
