"""``angletl`` command-line interface.

Errors go to stderr as one line of JSON followed by a one-line hint.
Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import rmt, simulation
from .aggregation import SourceBundle, aggregate_spectral, aggregate_validation
from .core import (
    AngleTLError,
    Dataset,
    FormatError,
    NumericalError,
    ParameterError,
    SourceEstimate,
    dump_json,
    load_json,
    load_matrix_csv,
    load_vector_csv,
    save_vector_csv,
    validate_pairing,
    write_table_csv,
)
from .estimators import PenaltyConfig, fit_angle_tl, predict
from .tuning import CvPlan, TuneGrid, cross_validate, write_surface_csv

HINTS = {
    "UsageError": "run 'angletl <subcommand> --help' for the accepted flags",
    "FormatError": "inputs must be comma-separated numeric CSV files or valid JSON",
    "ParseError": "every cell must be a finite number; pass --has-header if the first row is a header",
    "ShapeError": "X must be n x p, Y length n and w length p",
    "ParameterError": "check the numeric flags and the fields of the JSON configuration",
    "PlanError": "use fewer folds than target samples",
    "RegimeError": "the requested quantity is not defined in this regime",
    "DegenerateError": "a source estimate or fitted direction is identically zero",
    "NumericalError": "the system is numerically unstable; try a larger lambda",
    "ConditioningError": "the regularised system is ill-conditioned; try a larger lambda",
}


class UsageError(AngleTLError):
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _manifest(**extra) -> dict:
    from . import __version__
    from ._backend import BACKEND

    out = {"software_version": __version__, "kernel_backend": BACKEND,
           "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    out.update(extra)
    return out


def _out_dir(path) -> Path:
    if path is None:
        raise UsageError("--out is required")
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_data(args) -> tuple[Dataset, SourceEstimate | None]:
    if args.x is None or args.y is None:
        raise UsageError("--x and --y are required")
    X = load_matrix_csv(args.x, args.has_header)
    Y = load_vector_csv(args.y, args.has_header)
    w = load_vector_csv(args.w, args.has_header) if getattr(args, "w", None) else None
    b = validate_pairing(X, Y, w)
    return b.data, b.source


def cmd_fit(args) -> dict:
    data, src = _load_data(args)
    if args.lambda_ is None:
        raise UsageError("--lambda is required")
    eta = 0.0 if args.eta is None else args.eta
    if src is None and eta != 0:
        raise UsageError("--eta needs a source estimate given with --w")
    res = fit_angle_tl(data, src, PenaltyConfig(args.lambda_, eta))
    out = _out_dir(args.out)
    save_vector_csv(out / "beta.csv", res.beta_hat)
    summary = res.summary()
    summary.update(n=data.n, p=data.p)
    dump_json(out / "summary.json", summary)
    return summary


def cmd_predict(args) -> dict:
    if args.x is None or args.beta is None or args.out is None:
        raise UsageError("predict needs --x, --beta and --out")
    X = load_matrix_csv(args.x, args.has_header)
    beta = load_vector_csv(args.beta)
    yhat = predict(beta, X)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_vector_csv(out, yhat)
    return {"n": int(yhat.size), "out": str(out)}


def _grid(args, default_mode: str) -> TuneGrid:
    if args.grid is None:
        return TuneGrid.default(default_mode)
    d = load_json(args.grid)
    if not isinstance(d, dict):
        raise FormatError(f"{args.grid}: grid JSON must be an object")
    d.setdefault("mode", default_mode)
    return TuneGrid.from_dict(d)


def cmd_tune(args) -> dict:
    data, src = _load_data(args)
    grid = _grid(args, "angle" if src is not None else "target_only")
    if src is None and grid.mode != "target_only":
        raise UsageError(f"grid mode {grid.mode!r} needs a source estimate given with --w")
    plan = CvPlan(args.folds, args.seed)
    res = cross_validate(data, src, grid, plan)
    fit = fit_angle_tl(data, src, res.best)
    out = _out_dir(args.out)
    write_surface_csv(out / "cv_surface.csv", res)
    save_vector_csv(out / "beta.csv", fit.beta_hat)
    best = {"lambda": res.best.lambda_, "eta": res.best.eta, "cv_mse": res.best_error,
            "method": fit.method, "mode": grid.mode, "folds": plan.n_folds, "seed": plan.seed}
    dump_json(out / "best.json", best)
    dump_json(out / "manifest.json", _manifest(command="tune", seed=plan.seed, folds=plan.n_folds))
    return best


def _load_bundle(w_dir, has_header: bool) -> tuple[SourceBundle, list]:
    if w_dir is None:
        raise UsageError("--w-dir is required")
    d = Path(w_dir)
    if not d.is_dir():
        raise FormatError(f"{d}: not a directory")
    files = sorted(d.glob("w_*.csv"))
    if not files:
        raise FormatError(f"{d}: no w_*.csv files found")
    est = [SourceEstimate(load_vector_csv(f, has_header), label=f.stem) for f in files]
    return SourceBundle(est), [f.name for f in files]


def cmd_aggregate(args) -> dict:
    bundle, names = _load_bundle(args.w_dir, args.has_header)
    if args.method == "validation":
        if args.x is None or args.y is None:
            raise UsageError("validation aggregation needs --x and --y for the validation set")
        X = load_matrix_csv(args.x, args.has_header)
        Y = load_vector_csv(args.y, args.has_header)
        res = aggregate_validation(bundle, validate_pairing(X, Y).data)
    else:
        res = aggregate_spectral(bundle)
    out = _out_dir(args.out)
    res.save(out / "w_agg.csv")
    info = res.to_dict()
    info["sources"] = names
    dump_json(out / "aggregation.json", info)
    return info


def cmd_risk(args) -> dict:
    if args.scenario is None:
        raise UsageError("--scenario is required")
    d = load_json(args.scenario)
    if not isinstance(d, dict):
        raise FormatError(f"{args.scenario}: scenario JSON must be an object")
    s = rmt.RiskScenario.from_dict(d)
    grid = _grid(args, "angle")
    out = _out_dir(args.out)
    write_table_csv(out / "risk_surface.csv", ["lambda", "eta", "risk_lower", "risk_upper"],
                    rmt.risk_surface_rows(s, grid.lambdas, grid.eta_matrix()))
    report = {"scenario": s.to_dict()}
    try:
        report["limit_checks"] = rmt.limit_checks(s)
    except ParameterError as exc:
        report["limit_checks"] = {"error": str(exc)}
    try:
        report["optimal_tuning"] = rmt.optimal_tuning(s).to_dict()
    except ParameterError as exc:
        report["optimal_tuning"] = {"error": str(exc)}
    dump_json(out / "report.json", report)
    return report


def cmd_simulate(args) -> dict:
    if args.spec is None:
        raise UsageError("--spec is required")
    d = load_json(args.spec)
    if not isinstance(d, dict):
        raise FormatError(f"{args.spec}: experiment spec must be a JSON object")
    spec = simulation.ExperimentSpec.from_dict(d)
    threads = 1 if args.threads is None else args.threads
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    res = simulation.run_experiment(spec, threads=threads)
    out = _out_dir(args.out)
    name = simulation.result_filename(spec.figure)
    write_table_csv(out / name, res.columns, res.rows)
    res.manifest["threads"] = threads
    dump_json(out / "manifest.json", res.manifest)
    return {"figure": spec.figure, "rows": len(res.rows), "results": name}


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "tune": cmd_tune,
    "aggregate": cmd_aggregate,
    "risk": cmd_risk,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="angletl", description="Angle-based transfer learning for ridge regression.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_, *flags):
        p = sub.add_parser(name, help=help_)
        for f in flags:
            f(p)
        p.add_argument("--out", help="output directory (predict: output file)")
        p.add_argument("--has-header", action="store_true", help="input CSVs start with a header row")
        return p

    def xy(p):
        p.add_argument("--x", help="target design CSV (n x p)")
        p.add_argument("--y", help="target response CSV (n x 1)")

    def w(p):
        p.add_argument("--w", help="source coefficient CSV (p x 1)")

    def lam(p):
        p.add_argument("--lambda", dest="lambda_", type=float, help="ridge strength (> 0)")
        p.add_argument("--eta", type=float, help="angle-penalty strength (default 0)")

    def cv(p):
        p.add_argument("--grid", help="grid JSON")
        p.add_argument("--folds", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)

    add("fit", "closed-form fit at a given (lambda, eta)", xy, w, lam)
    pp = add("predict", "apply fitted coefficients to a new design", xy)
    pp.add_argument("--beta", help="coefficient CSV written by fit")
    add("tune", "cross-validate over a (lambda, eta) grid and refit", xy, w, cv)
    pa = add("aggregate", "combine a directory of w_*.csv source estimates", xy)
    pa.add_argument("--w-dir", help="directory holding w_*.csv files")
    pa.add_argument("--method", choices=("spectral", "validation"), default="spectral")
    pr = add("risk", "asymptotic risk surface and optimal tuning for a scenario")
    pr.add_argument("--scenario", help="scenario JSON")
    pr.add_argument("--grid", help="grid JSON")
    ps = add("simulate", "run a seeded simulation experiment")
    ps.add_argument("--spec", help="experiment JSON")
    ps.add_argument("--threads", type=int, default=1)
    return parser


def _report_error(exc: AngleTLError) -> int:
    kind = type(exc).__name__
    payload = {"error": kind, "message": str(exc), "exit_code": exc.exit_code}
    residual = getattr(exc, "residual", None)
    if residual is not None:
        payload["residual"] = float(residual)
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    sys.stderr.write("hint: " + HINTS.get(kind, HINTS["UsageError"]) + "\n")
    return exc.exit_code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        result = COMMANDS[args.command](args)
    except AngleTLError as exc:
        return _report_error(exc)
    except np.linalg.LinAlgError as exc:
        return _report_error(NumericalError(f"linear algebra failure: {exc}"))
    sys.stdout.write(json.dumps(result, sort_keys=True, default=float) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
