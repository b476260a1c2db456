"""Command-line entry point: solve, sweep, validate, stein-check, gen.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .amp import AmpOptions, RegressionInstance, amp_solve
from .errors import (
    AmpGdfError,
    DimensionMismatch,
    NoConvergence,
    NumericalDivergence,
    ParseError,
    RankWarning,
    SolverFailure,
)
from .estimators import gdf_report
from .oracle import stein_divergence_fd
from .penalty import PenaltySpec
from .pipeline import (
    EnsembleSource,
    PlantedSource,
    SyntheticConfig,
    ensure_dir,
    equicorrelated_design,
    gen_gaussian_ensemble,
    gen_correlated_table,
    parse_grid,
    prepare_real_data,
    read_dataset_csv,
    summary_dict,
    sweep,
    write_dataset_csv,
    write_sweep_csv,
)
from .replica import ReplicaInputs, replica_solve

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _grid(text):
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _add_penalty(p, lam_grid=False):
    p.add_argument("--penalty", choices=["l1", "scad", "mcp"], required=True)
    if lam_grid:
        p.add_argument("--lambda", dest="lam", type=_grid, required=True, help="start:step:stop or comma list")
        p.add_argument("--a", type=_grid, default=None, help="a value(s) for SCAD/MCP (default 3.7)")
    else:
        p.add_argument("--lambda", dest="lam", type=_positive, required=True)
        p.add_argument("--a", type=float, default=None)


def _add_amp(p):
    p.add_argument("--damping", type=float, default=0.3)
    p.add_argument("--tol", type=_positive, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=2000)


def _amp_opts(args) -> AmpOptions:
    return AmpOptions(tol=args.tol, max_sweeps=args.max_sweeps, damping=args.damping)


def _spec(family, lam, a) -> PenaltySpec:
    if family == "l1":
        return PenaltySpec(family, lam)
    return PenaltySpec(family, lam, 3.7 if a is None else a)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="amp-gdf", description="AMP-based degrees of freedom and prediction-error estimators.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="run AMP on one instance at one (lambda, a) and print the estimators")
    _add_penalty(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV with header and a 'y' column; used as-is")
    src.add_argument("--A", dest="A_path", help="design matrix CSV written by 'gen' (needs --y)")
    p.add_argument("--y", dest="y_path", help="response CSV written by 'gen'")
    p.add_argument("--sigma2", type=_positive, default=1.0)
    _add_amp(p)

    p = sub.add_parser("sweep", help="grid sweep with Monte-Carlo averaging and model selection")
    _add_penalty(p, lam_grid=True)
    p.add_argument("--input", help="CSV data; standardized and turned into a planted model with --k")
    p.add_argument("--k", type=int, default=None, help="support size of the planted model built from --input")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--sigma2", type=_positive, default=1.0)
    p.add_argument("--train", type=int, default=20, help="training samples per grid point")
    p.add_argument("--test", type=int, default=1000, help="test samples for the Monte-Carlo prediction error")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--no-correction", action="store_true")
    p.add_argument("--out", required=True, help="output CSV; summary.json is written next to it")
    _add_amp(p)

    p = sub.add_parser("validate", help="replica df against the AMP Monte-Carlo average on the Gaussian ensemble")
    _add_penalty(p, lam_grid=True)
    p.add_argument("--alpha", type=_positive, default=0.5)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=None, help="defaults to round(alpha * n)")
    p.add_argument("--sigma2", type=_positive, default=1.0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="paired-curve CSV (stdout if omitted)")
    _add_amp(p)

    p = sub.add_parser("stein-check", help="finite-difference divergence against df1 and df2")
    _add_penalty(p)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--rho", type=float, default=0.0, help="pairwise column correlation of the design")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--solver", choices=["amp", "cd"], default="amp")
    p.add_argument("--fd-step", type=_positive, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_amp(p)

    p = sub.add_parser("gen", help="write synthetic data")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--sigma2", type=_positive, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--correlated-table", action="store_true", help="302 x 70 correlated table as data.csv")
    p.add_argument("--out", required=True, help="output directory")
    return ap


# ------------------------------------------------------------------ commands


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _write_table(rows, header, out, stdout):
    lines = [",".join(header)] + [",".join(_fmt(r[h]) for h in header) for r in rows]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _load_matrix(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def cmd_solve(args, stdout):
    if args.input:
        X, y, _ = read_dataset_csv(args.input)
    else:
        if not args.y_path:
            raise UsageError("solve: --A requires --y")
        X = _load_matrix(args.A_path)
        y = _load_matrix(args.y_path).ravel()
    inst = RegressionInstance(y, X, args.sigma2)
    spec = _spec(args.penalty, args.lam, args.a)
    fp = amp_solve(inst, spec, _amp_opts(args))
    if not fp.converged:
        raise NoConvergence(f"AMP did not converge in {fp.sweeps_used} sweeps (residual {fp.residual:.3g})")
    out = gdf_report(inst, fp, spec).as_dict()
    out["sweeps"] = fp.sweeps_used
    stdout.write(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def cmd_sweep(args, stdout):
    if args.input:
        if args.k is None:
            raise UsageError("sweep: --input requires --k")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RankWarning)
            prep = prepare_real_data(args.input, args.k)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        source = PlantedSource(prep.inst.A, prep.x0, math.sqrt(prep.sigma_hat2))
    else:
        source = EnsembleSource(SyntheticConfig(N=args.n, M=args.m, sigma_y2=args.sigma2, seed=args.seed))
    a_grid = args.a if args.a is not None else [3.7]
    res = sweep(
        source,
        args.penalty,
        args.lam,
        a_grid,
        n_train=args.train,
        n_test=args.test,
        seed=args.seed,
        amp_opts=_amp_opts(args),
        correct=not args.no_correction,
        warm_start=not args.no_warm_start,
    )
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        ensure_dir(out.parent)
    write_sweep_csv(res, out)
    summary = summary_dict(res)
    (out.parent / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    stdout.write(json.dumps(summary["selected_by"], sort_keys=True) + "\n")
    return EXIT_OK


def cmd_validate(args, stdout):
    m = args.m if args.m is not None else max(1, round(args.alpha * args.n))
    alpha = m / args.n
    a_val = args.a[0] if args.a else None
    opts = _amp_opts(args)
    rows = []
    children = np.random.SeedSequence(args.seed).spawn(args.samples)
    cfg = SyntheticConfig(N=args.n, M=m, sigma_y2=args.sigma2)
    insts = [gen_gaussian_ensemble(cfg, np.random.default_rng(c)) for c in children]
    for lam in args.lam:
        spec = _spec(args.penalty, lam, a_val)
        row = {"lambda": lam, "a": spec.a, "df_replica": math.nan, "df_amp": math.nan, "df_amp_se": math.nan,
               "n_converged": 0, "status": "ok"}
        try:
            row["df_replica"] = replica_solve(ReplicaInputs(spec, alpha, args.sigma2)).df
        except NoConvergence as exc:
            row["status"] = f"replica:{type(exc).__name__}"
        vals = []
        for inst in insts:
            try:
                fp = amp_solve(inst, spec, opts)
            except AmpGdfError:
                continue
            if fp.converged:
                vals.append(gdf_report(inst, fp, spec, correct=False).df1_homogeneous)
        row["n_converged"] = len(vals)
        if vals:
            row["df_amp"] = float(np.mean(vals))
            row["df_amp_se"] = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
        if len(vals) < len(insts) and row["status"] == "ok":
            row["status"] = f"partial({len(vals)}/{len(insts)})"
        rows.append(row)
    header = ["lambda", "a", "df_replica", "df_amp", "df_amp_se", "n_converged", "status"]
    _write_table(rows, header, args.out, stdout)
    return EXIT_OK


def cmd_stein_check(args, stdout):
    spec = _spec(args.penalty, args.lam, args.a)
    opts = _amp_opts(args)
    fd_opts = AmpOptions(tol=min(args.tol, 1e-10), max_sweeps=max(args.max_sweeps, 20000), damping=args.damping)
    rows = []
    for k, child in enumerate(np.random.SeedSequence(args.seed).spawn(args.instances)):
        rng = np.random.default_rng(child)
        A = equicorrelated_design(args.m, args.n, args.rho, rng)
        inst = RegressionInstance(rng.standard_normal(args.m), A, 1.0)
        row = {"instance": k, "df1": math.nan, "df2": math.nan, "df_fd": math.nan, "l0": 0, "status": "ok"}
        try:
            fp = amp_solve(inst, spec, opts)
            if not fp.converged:
                raise NoConvergence("AMP did not converge")
            rep = gdf_report(inst, fp, spec)
            row.update(df1=rep.df1, l0=rep.l0, df2=math.nan if rep.df2 is None else rep.df2)
            row["df_fd"] = stein_divergence_fd(inst, spec, args.solver, args.fd_step, amp_opts=fd_opts)
        except AmpGdfError as exc:
            row["status"] = type(exc).__name__
        rows.append(row)
    _write_table(rows, ["instance", "df1", "df2", "df_fd", "l0", "status"], args.out, stdout)
    return EXIT_OK


def cmd_gen(args, stdout):
    out = ensure_dir(args.out)
    if args.correlated_table:
        X, y = gen_correlated_table(args.seed)
        write_dataset_csv(out / "data.csv", X, y)
        stdout.write(f"wrote {out / 'data.csv'}\n")
        return EXIT_OK
    inst = gen_gaussian_ensemble(SyntheticConfig(N=args.n, M=args.m, sigma_y2=args.sigma2, seed=args.seed))
    np.savetxt(out / "A.csv", inst.A, delimiter=",", fmt="%.17g")
    np.savetxt(out / "y.csv", inst.y, delimiter=",", fmt="%.17g")
    stdout.write(f"wrote {out / 'A.csv'} and {out / 'y.csv'}\n")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "stein-check": cmd_stein_check,
    "gen": cmd_gen,
}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, stdout)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (NumericalDivergence, NoConvergence, SolverFailure, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, DimensionMismatch, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
