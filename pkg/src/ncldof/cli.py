"""Command-line interface: ``ncldof <subcommand> ...``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error,
3 verification failure.  ``NCL_SEED`` replaces the default seed of 0;
an explicit ``--seed`` still wins.  Timings go to stderr so that stdout and
output files are byte-identical across runs with the same inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .basis import evaluate, frequency_heuristic, sample_rff
from .data import MU_FUNCTIONS, SynthSpec, load_csv, load_features, standardize, synthesize
from .dof import default_grid, df_curve, noise_variance
from .gram import compute_gram, whiten
from .ncl import FittedEnsemble, ModelBundle, fit, predict_from_features
from .tuning import BenchProtocol, TuneConfig, bench_dataset, tune_cv_all, tune_sure_all, write_bench_csv

logger = logging.getLogger("ncldof")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("NCL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NCL_SEED must be an integer, got {raw!r}") from None


def _unit_interval(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"lambda must lie in [0, 1], got {v}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _parse_targets(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            out.append(tok)
    if not out:
        raise argparse.ArgumentTypeError("empty target selection")
    return out


def _parse_grid(text: str) -> np.ndarray:
    """``default``, ``uniform:K`` or a comma-separated list of values."""
    if text == "default":
        return default_grid()
    if text.startswith("uniform:"):
        k = _positive_int(text.split(":", 1)[1])
        if k < 2:
            raise argparse.ArgumentTypeError("uniform grid needs at least 2 points")
        return np.linspace(0.0, 1.0, k)
    try:
        vals = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if vals.size == 0 or np.any((vals < 0) | (vals > 1)) or np.any(np.diff(vals) <= 0):
        raise argparse.ArgumentTypeError("grid values must be strictly ascending within [0, 1]")
    return vals


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- shared setup


def _prepare(args):
    """Load, standardize, and draw the basis for fit/tune/df-curve."""
    raw = load_csv(args.data, args.targets)
    train, params = standardize(raw)
    gamma = args.gamma if args.gamma is not None else frequency_heuristic(train.features, args.seed)
    basis = sample_rff(train.d, args.H, args.M, gamma, args.seed)
    return raw, train, params, basis


def cmd_fit(args) -> int:
    raw, train, params, basis = _prepare(args)
    phi = evaluate(basis, train.features)
    g = compute_gram(phi, train.targets, basis.H)
    wg = whiten(g)
    models = [FittedEnsemble(args.lam, wg.solve(g.phi_y[:, t], args.lam), basis.H, basis.M, basis.fingerprint)
              for t in range(train.n_targets)]
    bundle = ModelBundle(basis, tuple(models), params, raw.feature_names, raw.target_names)
    if args.model_out:
        bundle.save(args.model_out)
    # raw-unit training error, computed exactly as `predict` will
    pred = bundle.predict_raw(raw.features)
    emp = np.mean((pred - raw.targets) ** 2, axis=0)
    report = {"lambda": args.lam, "H": basis.H, "M": basis.M, "Q": basis.Q, "gamma": basis.gamma,
              "n": raw.n, "targets": list(raw.target_names),
              "emp_err": [float(e) for e in emp], "model": args.model_out}
    if args.format == "csv":
        _emit(_rows_csv(["target", "emp_err"], [[n, repr(float(e))] for n, e in zip(raw.target_names, emp)]), args.out)
    else:
        _emit(_dumps(report), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = ModelBundle.load(args.model)
    X = load_features(args.data, bundle.feature_names)
    pred = bundle.predict_raw(X)
    names = list(bundle.target_names)
    if args.format == "json":
        _emit(_dumps({"targets": names, "predictions": pred.tolist()}), args.out)
    else:
        _emit(_rows_csv(names, [[repr(float(v)) for v in row] for row in pred]), args.out)
    return EXIT_OK


def cmd_tune(args) -> int:
    _, train, _, basis = _prepare(args)
    config = TuneConfig(xtol=args.xtol, max_iter=args.max_iter, noise_var=args.noise_var)
    if args.method == "sure":
        results = tune_sure_all(train, basis, config)
    else:
        results = tune_cv_all(train, basis, 5, args.seed, config)
    for name, r in zip(train.target_names, results):
        print(f"tune {args.method} [{name}]: {r.wall_time:.4f} s", file=sys.stderr)
    rows = []
    for name, r in zip(train.target_names, results):
        d = r.to_dict()
        d.pop("wall_time")
        d["target"] = name
        rows.append(d)
    if args.format == "csv":
        _emit(_rows_csv(["target", "method", "lambda_star", "criterion_value", "evaluations", "converged"],
                        [[d["target"], d["method"], repr(d["lambda_star"]), repr(d["criterion_value"]),
                          d["evaluations"], d["converged"]] for d in rows]), args.out)
    else:
        _emit(_dumps({"H": basis.H, "M": basis.M, "Q": basis.Q, "gamma": basis.gamma, "results": rows}), args.out)
    return EXIT_OK


def cmd_df_curve(args) -> int:
    _, train, _, basis = _prepare(args)
    if not 0 <= args.target < train.n_targets:
        raise UsageError(f"--target {args.target} out of range (dataset has {train.n_targets} targets)")
    y = train.targets[:, args.target]
    phi = evaluate(basis, train.features)
    g = compute_gram(phi, y, basis.H)
    wg = whiten(g)
    if args.noise_var is not None:
        s2 = args.noise_var
    else:
        resid = predict_from_features(fit(wg, g, 0.0), phi)[0] - y
        s2 = noise_variance(resid, basis.H)
    curve = df_curve(wg, g, y, args.grid, s2)
    if args.format == "json":
        _emit(_dumps({"lambda": curve.lambdas.tolist(), "df": curve.df.tolist(),
                      "emp_err": curve.emp_err.tolist(), "sure": curve.sure.tolist(),
                      "sigma_tilde_sq": s2}), args.out)
    else:
        buf = io.StringIO()
        curve.write_csv(buf)
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    only = []
    for chunk in args.only or []:
        only.extend(s for s in chunk.split(",") if s)
    if args.theorem6:
        only.append("theorem6")
    unknown = [s for s in only if s not in verify_mod.SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(verify_mod.SUITES)}")
    t0 = time.perf_counter()
    results = verify_mod.run_suites(only or None, args.seed)
    print(f"verify: {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    if args.format == "json":
        _emit(_dumps([r.to_dict() for r in results]), args.out)
    elif args.format == "csv":
        _emit(_rows_csv(["suite", "check", "passed", "detail"],
                        [[r.name, c.name, c.passed, c.detail] for r in results for c in r.checks]), args.out)
    else:
        _emit(verify_mod.format_table(results) + "\n", args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _bench_source(spec: str):
    """``path.csv`` (last column is the target) or ``path.csv:col1,col2``."""
    path, _, cols = spec.partition(":") if not Path(spec).is_file() else (spec, "", "")
    return path, (_parse_targets(cols) if cols else -1)


def cmd_bench(args) -> int:
    protocol = BenchProtocol(args.H, args.M, args.outer_folds, args.inner_folds, args.seed,
                             TuneConfig(xtol=args.xtol, max_iter=args.max_iter))
    rows, failed = [], 0
    for spec in args.data:
        path, targets = _bench_source(spec)
        name = Path(path).stem
        try:
            rows.append(bench_dataset(name, load_csv(path, targets), protocol))
            r = rows[-1]
            print(f"bench [{name}]: sure {r.time_sure[0]:.3f} s, cv {r.time_cv[0]:.3f} s", file=sys.stderr)
        except Exception as exc:  # reported, the remaining datasets still run
            failed += 1
            print(f"error: {name}: {exc}", file=sys.stderr)
    if args.format == "json":
        _emit(_dumps([r.to_dict() for r in rows]), args.out)
    else:
        buf = io.StringIO()
        write_bench_csv(rows, buf)
        _emit(buf.getvalue(), args.out)
    return EXIT_ERROR if failed else EXIT_OK


def cmd_synth(args) -> int:
    s = synthesize(SynthSpec(args.n, args.d, args.mu, args.sigma, args.seed))
    header = list(s.dataset.feature_names) + ["y"] + (["mu"] if args.with_mu else [])
    cols = [s.dataset.features, s.dataset.targets] + ([s.mu_values[:, None]] if args.with_mu else [])
    table = np.hstack(cols)
    if args.format == "json":
        _emit(_dumps({"columns": header, "rows": table.tolist()}), args.out)
    else:
        _emit(_rows_csv(header, [[repr(float(v)) for v in row] for row in table]), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_model_flags(p, with_lambda: bool) -> None:
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--targets", type=_parse_targets, default=[-1],
                   help="target column names or 0-based indices, comma separated (default: last column)")
    p.add_argument("--H", type=_positive_int, default=10, help="basis functions per member")
    p.add_argument("--M", type=_positive_int, default=100, help="ensemble members")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=_positive_float, help="RFF kernel width")
    g.add_argument("--auto-gamma", action="store_true", help="median heuristic (the default)")
    if with_lambda:
        p.add_argument("--lambda", dest="lam", type=_unit_interval, required=True, help="diversity in [0, 1]")


def _add_common(p, formats=("json", "csv"), default="json") -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default: $NCL_SEED or 0)")
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads (currently advisory)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncldof", description="Closed-form NCL ensembles over random Fourier features.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit an ensemble at a fixed lambda")
    _add_model_flags(p, True)
    p.add_argument("--model-out", help="path for the JSON model file")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV containing the model's feature columns")
    _add_common(p, default="csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tune", help="choose lambda by SURE or 5-fold CV")
    _add_model_flags(p, False)
    p.add_argument("--method", choices=("sure", "cv5"), required=True)
    p.add_argument("--xtol", type=_positive_float, default=1e-4)
    p.add_argument("--max-iter", type=_positive_int, default=100)
    p.add_argument("--noise-var", type=float, default=None, help="known noise variance for SURE")
    _add_common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("df-curve", help="df, training error and SURE along a lambda grid")
    _add_model_flags(p, False)
    p.add_argument("--grid", type=_parse_grid, default=default_grid(),
                   help="'default', 'uniform:K', or comma-separated ascending values")
    p.add_argument("--target", type=int, default=0, help="index among the selected targets")
    p.add_argument("--noise-var", type=float, default=None)
    _add_common(p, default="csv")
    p.set_defaults(func=cmd_df_curve)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--only", action="append", help=f"suite(s) to run: {', '.join(verify_mod.SUITES)}")
    p.add_argument("--theorem6", action="store_true", help="shorthand for --only theorem6")
    _add_common(p, formats=("text", "json", "csv"), default="text")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="compare SURE and CV tuning over outer folds")
    p.add_argument("--data", nargs="+", required=True, help="CSV files; 'file.csv:col,...' picks targets")
    p.add_argument("--H", type=_positive_int, default=10)
    p.add_argument("--M", type=_positive_int, default=100)
    p.add_argument("--outer-folds", type=_positive_int, default=5)
    p.add_argument("--inner-folds", type=_positive_int, default=5)
    p.add_argument("--xtol", type=_positive_float, default=1e-4)
    p.add_argument("--max-iter", type=_positive_int, default=100)
    _add_common(p, default="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic regression dataset")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--mu", choices=sorted(MU_FUNCTIONS), default="sinusoid")
    p.add_argument("--with-mu", action="store_true", help="append the noiseless target as a 'mu' column")
    _add_common(p, default="csv")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError, IndexError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
