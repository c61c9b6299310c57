"""Command-line driver: ``crowdout {solve,sweep,simulate,check,regress}``.

Exit codes: 0 ok, 1 failed self-check, 2 usage, 3 validation, 4 solver, 5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import checks
from . import closed_form as cf
from . import crowding as cr
from . import econometrics as ec
from . import follower as fl
from .model import (
    CrowdoutError,
    SolverError,
    ValidationError,
    baseline_scenario,
    load_scenario,
    make_uniform_grid,
    scenario_to_dict,
)
from .numerics import GAUSS_LEGENDRE, QuadratureRule, RootConfig
from .simulate import SimConfig, simulate_fund, terminal_funds, write_path_dump

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4, 5

log = logging.getLogger("crowdout")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(x: float) -> str:
    return format(float(x), ".15g")


def _int_at_least(lo: int):
    def parse(text: str) -> int:
        try:
            val = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if val < lo:
            raise argparse.ArgumentTypeError(f"must be ≥ {lo}, got {val}")
        return val
    return parse


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not val > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return val


def _common(args) -> tuple[QuadratureRule, RootConfig]:
    return QuadratureRule(GAUSS_LEGENDRE, args.panels), RootConfig(args.tol, args.tol, 200)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, name: str, params: dict, inputs: list, outputs: list) -> Path:
    manifest = {
        "subcommand": name,
        "parameters": params,
        "global": {"seed": args.seed, "grid": args.grid, "panels": args.panels, "tol": args.tol},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": _version(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path = out / f"manifest_{name}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _scenario(args):
    return load_scenario(args.scenario) if args.scenario else baseline_scenario()


# -- solve -------------------------------------------------------------------

def cmd_solve(args) -> int:
    s = _scenario(args)
    rule, root = _common(args)
    grid = make_uniform_grid(s.market.horizon_T, args.grid)
    sol = fl.solve_follower(s, grid, root, rule)
    lead = cf.RationalDecision(s.leader, s.market)
    foll = cf.RationalDecision(s.follower, s.market)
    t = grid.times
    columns = (
        t, sol.paths.investment, sol.paths.consumption,
        foll.investment(t), foll.consumption(t), lead.investment(t), lead.consumption(t),
    )
    out = _out_dir(args)
    paths_csv = out / "paths.csv"
    with open(paths_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "I1_star", "C1_star", "I1_bar", "C1_bar", "I2_bar", "C2_bar"))
        for row in zip(*columns):
            w.writerow([_fmt(x) for x in row])
    scalars = {
        "eta": sol.eta,
        "log_eta": sol.log_eta,
        "k1_star": sol.k1_star,
        "k1_bar": sol.k1_bar,
        "k2_bar": lead.k_bar,
        "crowding": sol.crowding,
        "crowding_limit": cr.crowding_out_limit(s),
        "iterations": sol.diagnostics.iterations,
        "final_residual": sol.diagnostics.final_residual,
        "quadrature_est_error": sol.diagnostics.quadrature_est_error,
        "warnings": list(sol.diagnostics.warnings),
    }
    scalars_json = out / "scalars.json"
    scalars_json.write_text(json.dumps(scalars, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, args, "solve", scenario_to_dict(s), [args.scenario or "<baseline scenario>"],
                    [paths_csv, scalars_json])
    print(f"eta={sol.eta:.12g} k1*={sol.k1_star:.12g} k1_bar={sol.k1_bar:.12g} crowding={sol.crowding:.12g}")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

def write_svg(xs, ys, path: Path, xlabel: str, ylabel: str) -> None:
    """Static line chart: two axes and a single polyline."""
    w, h, pad = 480, 320, 50
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    if y1 == y0:
        y1 = y0 + 1.0
    px = pad + (xs - x0) / (x1 - x0) * (w - 2 * pad)
    py = h - pad - (ys - y0) / (y1 - y0) * (h - 2 * pad)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>
<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>
<text x="{w / 2}" y="{h - 12}" text-anchor="middle" font-size="12">{xlabel} [{x0:.4g}, {x1:.4g}]</text>
<text x="14" y="{h / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {h / 2})">{ylabel} [{y0:.4g}, {y1:.4g}]</text>
<polyline fill="none" stroke="steelblue" stroke-width="2" points="{pts}"/>
</svg>
"""
    path.write_text(svg, encoding="utf-8")


def cmd_sweep(args) -> int:
    base = _scenario(args)
    if args.T is not None:
        base = base.replace(T=args.T)
    if args.theta is not None:
        base = base.replace(theta=args.theta)
    spec = cr.SweepSpec(args.param, args.lo, args.hi, args.n, base)
    rule, root = _common(args)
    res = cr.sweep(spec, root, rule)
    out = _out_dir(args)
    csv_path = out / f"sweep_{args.param}.csv"
    cr.write_sweep_csv(res, csv_path)
    outputs = [csv_path]
    if args.svg:
        svg_path = out / f"sweep_{args.param}.svg"
        write_svg(res.values, res.crowding, svg_path, args.param, "crowding-out")
        outputs.append(svg_path)
    params = {"param": args.param, "lo": args.lo, "hi": args.hi, "n": args.n, **scenario_to_dict(base)}
    _write_manifest(out, args, "sweep", params, [args.scenario or "<baseline scenario>"], outputs)
    for p in res.points:
        print(f"{args.param}={p.value:.6g} crowding={p.crowding:.10g}" + (f" ERROR {p.error}" if p.error else ""))
    return EXIT_SOLVER if res.failures else EXIT_OK


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    s = _scenario(args)
    rule, root = _common(args)
    cfg = SimConfig(args.paths, args.steps, args.seed)
    # controls are sampled on the Euler step grid itself
    grid = make_uniform_grid(s.market.horizon_T, cfg.n_steps + 1)
    sol = fl.solve_follower(s, grid, root, rule)
    res = simulate_fund(s.follower, s.market, sol.paths, cfg)
    out = _out_dir(args)
    record = {k: getattr(res, k) for k in res.__dataclass_fields__}
    record["z_scores"] = res.z_scores()
    sim_json = out / "simulation.json"
    sim_json.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    outputs = [sim_json]
    if args.dump_paths:
        _, traces = terminal_funds(s.follower, s.market, sol.paths, SimConfig(args.dump_paths, cfg.n_steps, cfg.seed),
                                   keep_paths=args.dump_paths)
        dump = out / "paths_dump.csv"
        write_path_dump(traces, s.market.horizon_T / cfg.n_steps, dump)
        outputs.append(dump)
    params = {"paths": cfg.n_paths, "steps": cfg.n_steps, "seed": cfg.seed, **scenario_to_dict(s)}
    _write_manifest(out, args, "simulate", params, [args.scenario or "<baseline scenario>"], outputs)
    z = res.z_scores()
    print(f"E[X(T)] mc={res.terminal_fund_mean_mc:.8g} exact={res.analytic_mean:.8g} (z={z['mean']:+.2f})")
    print(f"Var[X(T)] mc={res.terminal_fund_var_mc:.8g} exact={res.analytic_var:.8g} (z={z['var']:+.2f})")
    print(f"E[utility] mc={res.mc_mean_utility:.8g}±{res.mc_std_error:.2g} exact={res.analytic_utility:.8g} (z={z['utility']:+.2f})")
    return EXIT_OK


# -- check -------------------------------------------------------------------

def cmd_check(args) -> int:
    s = _scenario(args)
    rule, root = _common(args)
    grid = make_uniform_grid(s.market.horizon_T, args.grid)
    results = checks.run_checks(
        s, grid, root, rule, SimConfig(args.paths, args.steps, args.seed),
        n_directions=args.directions, corrupt_eta=args.corrupt_eta,
    )
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    out = _out_dir(args)
    report = out / "check.json"
    report.write_text(json.dumps([r.__dict__ for r in results], indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, args, "check", {"corrupt_eta": args.corrupt_eta, **scenario_to_dict(s)},
                    [args.scenario or "<baseline scenario>"], [report])
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


# -- regress -----------------------------------------------------------------

def _split_names(text: str | None) -> list[str]:
    return [n.strip() for n in text.split(",") if n.strip()] if text else []


def prepare_table(table: ec.DataTable, growth: list[str], normalize: list[str]) -> ec.DataTable:
    """Apply growth-rate then min-max transforms; growth drops the first row of every column."""
    for name in growth + [n for n in normalize if n != "all"]:
        table.column(name)
    if growth:
        cols = {}
        for n in table.names:
            x = table.column(n)
            cols[n] = ec.growth_rate(x) if n in growth else x[1:]
        table = ec.DataTable(table.names, cols, table.dropped_rows)
    targets = list(table.names) if "all" in normalize else normalize
    for n in targets:
        table = table.with_column(n, ec.minmax_normalize(table.column(n), n))
    return table


def cmd_regress(args) -> int:
    table = ec.read_csv(args.csv)
    regressors = _split_names(args.regressors)
    if not regressors:
        raise ValidationError("at least one regressor is required")
    for name in [args.response] + regressors:
        table.column(name)
    table = prepare_table(table, _split_names(args.growth), _split_names(args.normalize))
    rep = ec.ols_fit(table, args.response, regressors, intercept=not args.no_intercept)
    text = ec.render_report(rep, title=f"Regression of {args.response}")
    if table.dropped_rows:
        text += f"({table.dropped_rows} row(s) with missing values dropped)\n"
    out = _out_dir(args)
    txt = out / "regression.txt"
    txt.write_text(text, encoding="utf-8")
    js = out / "regression.json"
    js.write_text(json.dumps(ec.report_records(rep), indent=2) + "\n", encoding="utf-8")
    params = {"response": args.response, "regressors": regressors, "growth": args.growth,
              "normalize": args.normalize, "intercept": not args.no_intercept}
    _write_manifest(out, args, "regress", params, [args.csv], [txt, js])
    print(text, end="")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--out-dir", default="out", help="directory for outputs (default: out)")
    g.add_argument("--seed", type=_int_at_least(0), default=42, help="random seed (default: 42)")
    g.add_argument("--grid", type=_int_at_least(2), default=1025, help="output grid points (default: 1025)")
    g.add_argument("--panels", type=_int_at_least(1), default=256, help="Gauss-Legendre panels (default: 256)")
    g.add_argument("--tol", type=_positive_float, default=1e-12, help="root tolerance (default: 1e-12)")
    g.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")

    parser = argparse.ArgumentParser(
        prog="crowdout",
        description="Optimal investment/consumption under investment herding.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve the follower's optimal decisions")
    p.add_argument("scenario", nargs="?", help="scenario JSON file (default: baseline parameters)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="crowding-out over a parameter range")
    p.add_argument("--scenario", help="base scenario JSON file (default: baseline parameters)")
    p.add_argument("--param", choices=cr.SWEEP_PARAMS, required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--n", type=_int_at_least(2), default=21, help="number of points, ≥ 2")
    p.add_argument("--T", type=_positive_float, help="override the horizon")
    p.add_argument("--theta", type=float, help="override the herd coefficient")
    p.add_argument("--svg", action="store_true", help="also write an SVG line chart")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of the fund dynamics")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--paths", type=_int_at_least(1), default=100_000)
    p.add_argument("--steps", type=_int_at_least(1), default=1_000)
    p.add_argument("--dump-paths", type=_int_at_least(0), default=0, metavar="N",
                   help="write the first N trajectories to paths_dump.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", parents=[common], help="run the invariant battery")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--paths", type=_int_at_least(2), default=100_000)
    p.add_argument("--steps", type=_int_at_least(1), default=1_000)
    p.add_argument("--directions", type=_int_at_least(1), default=25)
    p.add_argument("--corrupt-eta", type=_positive_float, default=None, metavar="FACTOR",
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("regress", parents=[common], help="OLS regression report from a CSV")
    p.add_argument("csv")
    p.add_argument("--response", required=True)
    p.add_argument("--regressors", required=True, help="comma-separated column names")
    p.add_argument("--growth", help="comma-separated columns to convert to growth rates")
    p.add_argument("--normalize", help="comma-separated columns to min-max normalize, or 'all'")
    p.add_argument("--no-intercept", action="store_true")
    p.set_defaults(func=cmd_regress)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ec.DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, ec.RankDeficientError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CrowdoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
