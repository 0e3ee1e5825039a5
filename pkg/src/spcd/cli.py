"""Command-line front end: ``spcd {simulate,grid,analytic,emfit,check}``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import math
import sys
from dataclasses import replace
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .analytic import expected_estimates
from .classify import ClassifierSpec
from .config import ConfigError, RunConfig, apply_overrides, load_config, validate
from .mixture_em import DegenerateFitError, InsufficientDataError, em_fit, identifiability_diagnostics
from .montecarlo import ESTIMATORS, CellSummary, run_grid
from .trial import NOT_APPLICABLE, AllocationError, TrialParams, simulate_trial

SIMULATE_COLUMNS = ["id", "y0", "l", "a1", "y1", "r", "a2", "y2"]
GRID_COLUMNS = [
    "delta_placebo", "sigma_eps", "classifier", "estimator", "mean", "se", "bias_all", "bias_nr",
    "npv_mean", "npv_se", "q1_analytic", "e_analytic", "skipped",
]
ANALYTIC_COLUMNS = ["delta_placebo", "sigma_eps", "q1", "npv", "e_theta1", "e_theta2", "e_theta_w", "threshold_c"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_WEAK = 4
EXIT_NOT_CONVERGED = 5


def fmt(x) -> str:
    """Shortest round-trip text for floats; NaN/None become an empty field."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _write_rows(out, header: Sequence[str], rows: Iterable[Sequence], comment: Optional[str] = None) -> None:
    if comment is not None:
        out.write(f"# {comment}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


@contextlib.contextmanager
def _output(path: str):
    if not path or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


# -- simulate -------------------------------------------------------------------------------------

def simulate_csv(params: TrialParams, seed: int, classifier: ClassifierSpec) -> str:
    ds = simulate_trial(params, seed, classifier)
    settings = " ".join(f"{k}={fmt(getattr(params, k))}" for k in params.__dataclass_fields__)
    comment = f"seed={seed} classifier={classifier.label} {settings}"
    rows = []
    for i in range(ds.n):
        r = "" if ds.r[i] == NOT_APPLICABLE else str(int(ds.r[i]))
        rows.append([i + 1, ds.y0[i], ds.l[i], ds.a1[i], ds.y1[i], r, ds.a2[i], ds.y2[i]])
    buf = io.StringIO()
    _write_rows(buf, SIMULATE_COLUMNS, rows, comment)
    return buf.getvalue()


def cmd_simulate(cfg: RunConfig) -> int:
    text = simulate_csv(cfg.trial, cfg.run.seed, cfg.classifier_spec(cfg.run.classifier))
    with _output(cfg.run.out) as out:
        out.write(text)
    return EXIT_OK


# -- grid -----------------------------------------------------------------------------------------

def grid_rows(cells: List[CellSummary]) -> List[list]:
    rows = []
    for cell in cells:
        q1 = cell.analytic.q1 if cell.analytic else math.nan
        for name in ESTIMATORS:
            e = cell.estimators[name]
            rows.append([
                cell.delta_placebo, cell.sigma_eps, cell.classifier, name, e.mean, e.se, e.bias_all, e.bias_nr,
                cell.npv_mean, cell.npv_se, q1, e.expected, cell.skipped,
            ])
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return rows


def grid_csv(cfg: RunConfig) -> str:
    cells = run_grid(cfg.grid_spec(), parallelism=cfg.run.parallelism)
    buf = io.StringIO()
    _write_rows(buf, GRID_COLUMNS, grid_rows(cells))
    for cell in cells:
        if cell.flagged:
            print(
                f"warning: {cell.skipped}/{cell.n_reps} replicates skipped at delta_placebo={cell.delta_placebo} "
                f"sigma_eps={cell.sigma_eps} classifier={cell.classifier}",
                file=sys.stderr,
            )
    return buf.getvalue()


def cmd_grid(cfg: RunConfig) -> int:
    text = grid_csv(cfg)
    with _output(cfg.run.out) as out:
        out.write(text)
    return EXIT_OK


# -- analytic -------------------------------------------------------------------------------------

def analytic_csv(cfg: RunConfig) -> str:
    spec = cfg.grid_spec()
    clf = cfg.classifier_spec("quantile-change")
    rows = []
    for dp, s in spec.coordinates():
        a = expected_estimates(spec.cell_params(dp, s), clf)
        rows.append([dp, s, a.q1, a.npv, a.e_theta1, a.e_theta2, a.e_theta_w, a.threshold_c])
    buf = io.StringIO()
    _write_rows(buf, ANALYTIC_COLUMNS, rows)
    return buf.getvalue()


def cmd_analytic(cfg: RunConfig) -> int:
    text = analytic_csv(cfg)
    with _output(cfg.run.out) as out:
        out.write(text)
    return EXIT_OK


# -- emfit ----------------------------------------------------------------------------------------

def read_changes(path: str, column: str = "change") -> np.ndarray:
    """Numeric column ``column``; for simulate output without one, placebo-arm ``y1 - y0``."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise ValueError(f"{path}: empty file")
    rows = list(reader)
    try:
        if column in reader.fieldnames:
            return np.array([float(r[column]) for r in rows])
        if {"y0", "y1", "a1"} <= set(reader.fieldnames):
            return np.array([float(r["y1"]) - float(r["y0"]) for r in rows if r["a1"] == "0"])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    raise KeyError(f"{path}: no column {column!r}")


def cmd_emfit(path: str, column: str = "change", tol: float = 1e-8, max_iter: int = 500, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        x = read_changes(path, column)
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        fit = em_fit(x, tol=tol, max_iter=max_iter)
    except DegenerateFitError as exc:
        print(f"degenerate fit: {exc}", file=out)
        return EXIT_DEGENERATE
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    diag = identifiability_diagnostics(fit)
    for key in ("n", "p_hat", "mu0", "mu1", "sigma_hat", "loglik", "iterations", "converged"):
        print(f"{key}: {fmt(getattr(fit, key))}", file=out)
    print(f"separation: {fmt(diag.separation)}", file=out)
    print(f"p_boundary_distance: {fmt(diag.p_boundary_distance)}", file=out)
    print(f"lr_stat: {fmt(diag.lr_stat)}", file=out)
    print(f"weak: {int(diag.weak)}", file=out)
    for reason in diag.reasons:
        print(f"weak_reason: {reason}", file=out)
    if diag.weak:
        return EXIT_WEAK
    if not fit.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# -- check ----------------------------------------------------------------------------------------

def check_lines(cells: List[CellSummary], se_multiplier: float, abs_slack: float):
    """Compare every Monte Carlo mean with its closed form; yields ``(passed, line)``."""

    def tol(se):
        return se_multiplier * (0.0 if math.isnan(se) else se) + abs_slack

    for cell in cells:
        where = f"delta_placebo={cell.delta_placebo!r} sigma_eps={cell.sigma_eps!r} classifier={cell.classifier}"
        items = [(name, e.mean, e.expected, e.se) for name, e in cell.estimators.items()]
        if cell.analytic is not None:
            items.append(("npv", cell.npv_mean, cell.analytic.npv, cell.npv_se))
        for name, got, want, se in items:
            if math.isnan(want):
                continue
            diff = abs(got - want)
            thr = tol(se)
            ok = diff <= thr
            yield ok, f"{'PASS' if ok else 'FAIL'} {where} quantity={name} diff={diff:.6g} threshold={thr:.6g}"


def cmd_check(cfg: RunConfig, out=None) -> int:
    out = sys.stdout if out is None else out
    cells = run_grid(cfg.grid_spec(), parallelism=cfg.run.parallelism)
    failed = 0
    total = 0
    for ok, line in check_lines(cells, cfg.check.se_multiplier, cfg.check.abs_slack):
        total += 1
        failed += not ok
        print(line, file=out)
    print(f"{total - failed}/{total} checks passed", file=out)
    return EXIT_OK if failed == 0 else EXIT_FAIL


# -- entry point ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides SPCD_SEED and the config)")
    common.add_argument("--out", help="output path, '-' for stdout")
    common.add_argument("--parallelism", type=int, help="worker processes for grid runs")
    common.add_argument("--reps", type=int, help="Monte Carlo replicates per cell")

    parser = argparse.ArgumentParser(prog="spcd", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write one simulated trial as CSV")
    p.add_argument("--classifier", help="classifier kind (default: run.classifier)")
    sub.add_parser("grid", parents=[common], help="Monte Carlo bias/NPV grid as CSV")
    sub.add_parser("analytic", parents=[common], help="closed-form expectations per grid coordinate")
    p = sub.add_parser("emfit", parents=[common], help="fit the two-component mixture to a CSV column")
    p.add_argument("input", help="CSV file")
    p.add_argument("--column", default="change", help="numeric column to fit (default: change)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=500)
    p = sub.add_parser("check", parents=[common], help="Monte Carlo vs closed-form consistency report")
    p.add_argument("--se-multiplier", type=float)
    p.add_argument("--abs-slack", type=float)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, out=args.out, parallelism=args.parallelism, reps=args.reps)
        if args.command == "simulate":
            if args.classifier:
                cfg = replace(cfg, run=replace(cfg.run, classifier=args.classifier))
                validate(cfg)
            return cmd_simulate(cfg)
        if args.command == "grid":
            return cmd_grid(cfg)
        if args.command == "analytic":
            return cmd_analytic(cfg)
        if args.command == "emfit":
            return cmd_emfit(args.input, args.column, args.tol, args.max_iter)
        if args.command == "check":
            chk = cfg.check
            if args.se_multiplier is not None:
                chk = replace(chk, se_multiplier=args.se_multiplier)
            if args.abs_slack is not None:
                chk = replace(chk, abs_slack=args.abs_slack)
            return cmd_check(replace(cfg, check=chk))
    except (ConfigError, AllocationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
