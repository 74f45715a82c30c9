"""Command-line interface.

Subcommands: simulate, fit, predict, validate, plus the experiment
runners (estimation-curves, k-sweep, mse-curve, concentration,
density-check). Experiment subcommands read an optional JSON config file
(--config) whose fields mirror ExperimentConfig; any flag given on the
command line overrides the corresponding config field.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

import argparse
import sys

import numpy as np

from ._validation import check_positive_int
from .errors import ConfigurationError, NlarForestError
from .experiments import ExperimentConfig, k_schedule, resolve_f, resolve_noise, run_experiment
from .forest import fit_forest, forest_predict_batch, load_forest, save_forest
from .nlar import Dataset, SimulationSpec, simulate_dataset
from .partition import validate_akm
from .tree_builder import BuildConfig

__all__ = ["cli_main", "main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the contract here is 1.
    def error(self, message):
        raise _UsageError(message)


def _parse_noise(text):
    parts = text.split(",")
    kind = parts[0]
    scale = float(parts[1]) if len(parts) > 1 else 1.0
    return {"kind": kind, "scale": scale}


def _parse_int_list(text):
    return [int(v) for v in text.split(",") if v]


def _parse_float_list(text):
    return [float(v) for v in text.split(",") if v]


def _build_parser():
    parser = _Parser(prog="nlarforest",
                     description="Random forests for autoregressive time series")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a path and write its dataset CSV")
    sim.add_argument("--f", default="f1_clipped_linear")
    sim.add_argument("--T", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise", type=_parse_noise, default={"kind": "laplace", "scale": 1.0})
    sim.add_argument("--burn-in", type=int, default=1000)
    sim.add_argument("--out", default=None, help="output CSV (default: stdout)")

    fit = sub.add_parser("fit", help="fit a forest on a dataset CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", required=True, help="forest output directory")
    fit.add_argument("--k", default="auto")
    fit.add_argument("--m", type=int, default=None)
    fit.add_argument("--alpha", type=float, default=0.1)
    fit.add_argument("--rho", type=_parse_float_list, default=None)
    fit.add_argument("--split-rule", default="extratrees")
    fit.add_argument("--B", type=int, default=500)
    fit.add_argument("--seed", type=int, default=0)

    pred = sub.add_parser("predict", help="evaluate a saved forest at query points")
    pred.add_argument("--forest", required=True)
    pred.add_argument("--data", default=None, help="training data CSV (default: stored copy)")
    pred.add_argument("--points", required=True, help="CSV with header x1,...,xp")
    pred.add_argument("--out", default=None, help="output CSV (default: stdout)")
    pred.add_argument("--jobs", type=int, default=1)

    val = sub.add_parser("validate", help="check a saved forest's validity rules")
    val.add_argument("--forest", required=True)
    val.add_argument("--data", default=None)
    val.add_argument("--k", type=int, required=True)
    val.add_argument("--alpha", type=float, required=True)
    val.add_argument("--m", type=int, required=True)

    for name in ("estimation-curves", "k-sweep", "mse-curve",
                 "concentration", "density-check"):
        exp = sub.add_parser(name, help=f"run the {name} experiment")
        exp.add_argument("--config", default=None, help="JSON config file")
        exp.add_argument("--f-name", default=None)
        exp.add_argument("--noise", type=_parse_noise, default=None)
        exp.add_argument("--Ts", type=_parse_int_list, default=None)
        exp.add_argument("--B", type=int, default=None)
        exp.add_argument("--alpha", type=float, default=None)
        exp.add_argument("--rho", type=_parse_float_list, default=None)
        exp.add_argument("--k-override", type=int, default=None)
        exp.add_argument("--ks", type=_parse_int_list, default=None)
        exp.add_argument("--seeds", type=_parse_int_list, default=None)
        exp.add_argument("--burn-in", type=int, default=None)
        exp.add_argument("--split-rule", default=None)
        exp.add_argument("--n-mc", type=int, default=None)
        exp.add_argument("--mc-burn-in", type=int, default=None)
        exp.add_argument("--mc-seed", type=int, default=None)
        exp.add_argument("--n-samples", type=int, default=None)
        exp.add_argument("--n-bins-per-axis", type=int, default=None)
        exp.add_argument("--jobs", type=int, default=None)
        exp.add_argument("--output-dir", default=None)
    return parser


def _cmd_simulate(args):
    f = resolve_f(args.f)
    noise = resolve_noise(args.noise)
    data = simulate_dataset(SimulationSpec(f, noise, T=args.T,
                                           burn_in=args.burn_in, seed=args.seed))
    if args.out is None:
        data.to_csv(sys.stdout)
    else:
        data.to_csv(args.out)
        print(f"wrote {data.T} rows to {args.out}")
    return 0


def _cmd_fit(args):
    data = Dataset.from_csv(args.data)
    k = k_schedule(data.T) if args.k == "auto" else check_positive_int("k", int(args.k))
    config = BuildConfig(k=k, m=args.m, alpha=args.alpha,
                         rho=tuple(args.rho) if args.rho else None,
                         split_rule=args.split_rule, seed=args.seed)
    forest = fit_forest(data, config, args.B, master_seed=args.seed)
    save_forest(forest, args.out)
    print(f"fitted {args.B} trees (k={k}) on T={data.T}; saved to {args.out}")
    return 0


def _read_points(path, p):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        expect = [f"x{j + 1}" for j in range(p)]
        if header != expect:
            raise ConfigurationError(
                f"points file must have header {','.join(expect)}, got {header!r}"
            )
        rows = [[float(v) for v in line.strip().split(",")]
                for line in fh if line.strip()]
    return np.array(rows, dtype=np.float64).reshape(-1, p)


def _cmd_predict(args):
    data = Dataset.from_csv(args.data) if args.data else None
    forest = load_forest(args.forest, data)
    X = _read_points(args.points, forest.data.p)
    preds = forest_predict_batch(forest, X, n_jobs=args.jobs)
    lines = [",".join(f"x{j + 1}" for j in range(forest.data.p)) + ",prediction"]
    for row, pred in zip(X, preds):
        lines.append(",".join(repr(float(v)) for v in row) + "," + repr(float(pred)))
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def _cmd_validate(args):
    data = Dataset.from_csv(args.data) if args.data else None
    forest = load_forest(args.forest, data)
    bad = 0
    infeasible = 0
    for b, tree in enumerate(forest.trees):
        report = validate_akm(tree, forest.data, args.alpha, args.k, args.m)
        infeasible += report.n_infeasible_leaves
        if not report.ok:
            bad += 1
            print(f"tree {b}: "
                  f"must-split violations {report.rule_i_violations}, "
                  f"balance violations {report.rule_iii_violations}, "
                  f"leaf-size violations {report.rule_iv_violations}")
    print(f"checked {forest.B} trees: {forest.B - bad} ok, {bad} invalid, "
          f"{infeasible} infeasible leaves (exempt from the must-split rule)")
    return 0 if bad == 0 else 2


def _run_experiment_command(args, experiment):
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config)
        if cfg.experiment != experiment:
            raise ConfigurationError(
                f"config names experiment {cfg.experiment!r}, "
                f"but the {experiment!r} subcommand was invoked"
            )
    else:
        cfg = ExperimentConfig(experiment=experiment)
    for fld in ("f_name", "noise", "Ts", "B", "alpha", "rho", "k_override", "ks",
                "seeds", "burn_in", "split_rule", "n_mc", "mc_burn_in", "mc_seed",
                "n_samples", "n_bins_per_axis", "jobs", "output_dir"):
        value = getattr(args, fld)
        if value is not None:
            setattr(cfg, fld, value)
    cfg.__post_init__()  # re-validate after overrides
    outputs = run_experiment(cfg)
    for path in outputs:
        print(f"wrote {path}")
    return 0


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "predict":
            return _cmd_predict(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _run_experiment_command(args, args.command.replace("-", "_"))
    except (ConfigurationError, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NlarForestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
