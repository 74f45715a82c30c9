"""Experiment harness: estimation curves, leaf-size sweeps, MSE curves,
concentration ratios and density-bound checks, all driven by one config.

Every experiment writes plot-ready CSVs plus a manifest.json recording the
fully resolved configuration, the library version and wall time; the
manifest suffices to reproduce the CSVs byte-for-byte. Units of work are
(sample size, seed) pairs; they are independent, deterministic, and fanned
out over processes when ``jobs`` > 1 — the output bytes do not depend on
the ``jobs`` setting.
"""

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_positive_int
from .errors import ConfigurationError
from .forest import fit_forest, forest_predict_batch
from .nlar import (
    SimulationSpec,
    builtin_function,
    simulate_dataset,
    zero_function,
)
from .noise import NoiseModel
from .oracle import OracleConfig, concentration_study, density_bound_check
from .tree_builder import EXTRATREES, BuildConfig

__all__ = [
    "k_schedule",
    "ExperimentConfig",
    "GRID_1D",
    "grid_2d",
    "run_experiment",
    "run_simulate",
    "run_estimation_curves",
    "run_k_sweep",
    "run_mse_curve",
    "run_concentration",
    "run_density_check",
]

# Evaluation grids: 0.01 steps on [-2, 2] for curves, the 17x17 quarter-step
# lattice on [-2, 2]^2 for the 2-d error.
GRID_1D = np.arange(-200, 201) / 100.0


def grid_2d():
    axis = np.arange(-8, 9) / 4.0
    a, b = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def k_schedule(T):
    """Minimum leaf count as a slowly growing function of the sample size:
    floor(0.04 * ln(T)^4 * ln(ln(T))), never below 1. Requires T >= 16 so
    the double logarithm is positive."""
    T = check_positive_int("T", T)
    if T < 16:
        raise ConfigurationError(f"k_schedule requires T >= 16, got {T}")
    return max(1, math.floor(0.04 * math.log(T) ** 4 * math.log(math.log(T))))


EXPERIMENTS = (
    "simulate",
    "estimation_curves",
    "k_sweep",
    "mse_curve",
    "concentration",
    "density_check",
)

_DEFAULT_TS = {
    "estimation_curves": [400, 1600, 6400],
    "k_sweep": [1600],
    "mse_curve": [2500, 10000, 40000],
    "concentration": [400, 1600, 6400],
    "simulate": [400],
    "density_check": [400],
}


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; JSON config files mirror these field
    names exactly and CLI flags override them one-to-one (kebab-case)."""

    experiment: str
    f_name: str = "f3_cosine"
    noise: dict = field(default_factory=lambda: {"kind": "laplace", "scale": 1.0})
    Ts: list = None
    B: int = 500
    alpha: float = 0.1
    rho: list = None
    k_override: int = None
    ks: list = field(default_factory=lambda: [40, 160, 640])
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    burn_in: int = 1000
    split_rule: str = EXTRATREES
    n_mc: int = 1_000_000
    mc_burn_in: int = 1000
    mc_seed: int = 999_331
    n_samples: int = 1_000_000
    n_bins_per_axis: int = 50
    jobs: int = 1
    output_dir: str = "."

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if self.Ts is None:
            self.Ts = list(_DEFAULT_TS[self.experiment])
        self.Ts = [int(T) for T in self.Ts]
        self.seeds = [int(s) for s in self.seeds]
        self.ks = [int(k) for k in self.ks]
        if not self.Ts or not self.seeds:
            raise ConfigurationError("Ts and seeds must be nonempty")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigurationError("config must name an experiment")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
        return cls.from_dict(payload)

    def k_for(self, T):
        return self.k_override if self.k_override is not None else k_schedule(T)


def resolve_f(name):
    if name == "zero":
        return zero_function(1)
    if name == "zero2d":
        return zero_function(2)
    return builtin_function(name)


def resolve_noise(spec):
    if isinstance(spec, NoiseModel):
        return spec
    return NoiseModel(spec["kind"], spec.get("scale", 1.0), spec.get("bernstein_c"))


def _float_cell(v):
    return repr(float(v))


def _write_csv(path, header, rows, comment=None):
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append(header)
    lines.extend(",".join(row) for row in rows)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _pmap(fn, args_list, jobs):
    if jobs is None or jobs <= 1 or len(args_list) < 2:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args_list))) as pool:
        return list(pool.map(fn, args_list))


def _build_config(cfg, k):
    rho = tuple(cfg.rho) if cfg.rho is not None else None
    return BuildConfig(k=k, alpha=cfg.alpha, rho=rho, split_rule=cfg.split_rule)


def _fit_unit(cfg, T, k, seed):
    f = resolve_f(cfg.f_name)
    noise = resolve_noise(cfg.noise)
    sim = SimulationSpec(f, noise, T=T, burn_in=cfg.burn_in, seed=seed)
    data = simulate_dataset(sim)
    forest = fit_forest(data, _build_config(cfg, k), cfg.B, master_seed=seed)
    return f, sim, forest


# Unit workers take (cfg, ...) tuples so they can run in worker processes.


def _curves_unit(args):
    cfg, T, seed = args
    f, _, forest = _fit_unit(cfg, T, cfg.k_for(T), seed)
    X = GRID_1D.reshape(-1, 1)
    f_true = f.evaluate_batch(X)
    f_hat = forest_predict_batch(forest, X)
    return [[_float_cell(x), _float_cell(ft), _float_cell(fh), str(T), str(seed)]
            for x, ft, fh in zip(GRID_1D, f_true, f_hat)]


def _ksweep_unit(args):
    cfg, T, k, seed = args
    f, _, forest = _fit_unit(cfg, T, k, seed)
    X = GRID_1D.reshape(-1, 1)
    f_true = f.evaluate_batch(X)
    f_hat = forest_predict_batch(forest, X)
    return [[_float_cell(x), _float_cell(ft), _float_cell(fh),
             str(T), str(k), str(seed)]
            for x, ft, fh in zip(GRID_1D, f_true, f_hat)]


def _mse_unit(args):
    cfg, T, seed = args
    f, _, forest = _fit_unit(cfg, T, cfg.k_for(T), seed)
    X = grid_2d()
    err = forest_predict_batch(forest, X) - f.evaluate_batch(X)
    mse = float(np.mean(err * err))
    return [[str(T), _float_cell(mse), str(seed)]]


def _concentration_unit(args):
    cfg, seed = args
    f = resolve_f(cfg.f_name)
    noise = resolve_noise(cfg.noise)
    sim = SimulationSpec(f, noise, T=max(cfg.Ts), burn_in=cfg.burn_in, seed=seed)
    ocfg = OracleConfig(n_mc=cfg.n_mc, burn_in=cfg.mc_burn_in, seed=cfg.mc_seed)
    template = _build_config(cfg, k=max(cfg.k_for(T) for T in cfg.Ts))
    rows = concentration_study(cfg.Ts, cfg.k_for, sim, template, cfg.B, ocfg)
    return [[str(r.T), str(r.k), _float_cell(r.sup_dev), _float_cell(r.ratio),
             str(r.seed)] for r in rows]


def _require_p(cfg, p, what):
    f = resolve_f(cfg.f_name)
    if f.p != p:
        raise ConfigurationError(f"{what} requires a function with p={p}, "
                                 f"got {cfg.f_name!r} (p={f.p})")
    return f


def _manifest(cfg, outputs, started, extra=None):
    from . import __version__

    payload = {
        "experiment": cfg.experiment,
        "config": asdict(cfg),
        "library_version": __version__,
        "wall_time_seconds": round(time.time() - started, 3),
        "outputs": [os.path.basename(o) for o in outputs],
    }
    if extra:
        payload.update(extra)
    path = os.path.join(cfg.output_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def run_simulate(cfg):
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    f = resolve_f(cfg.f_name)
    noise = resolve_noise(cfg.noise)
    T, seed = cfg.Ts[0], cfg.seeds[0]
    data = simulate_dataset(SimulationSpec(f, noise, T=T, burn_in=cfg.burn_in,
                                           seed=seed))
    out = os.path.join(cfg.output_dir, "dataset.csv")
    data.to_csv(out)
    _manifest(cfg, [out], started)
    return [out]


def run_estimation_curves(cfg):
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    _require_p(cfg, 1, "estimation_curves")
    units = [(cfg, T, seed) for T in cfg.Ts for seed in cfg.seeds]
    chunks = _pmap(_curves_unit, units, cfg.jobs)
    out = _write_csv(
        os.path.join(cfg.output_dir, "estimation_curves.csv"),
        "x,f_true,f_hat,T,seed",
        [row for chunk in chunks for row in chunk],
    )
    _manifest(cfg, [out], started,
              {"k_by_T": {str(T): cfg.k_for(T) for T in cfg.Ts}})
    return [out]


def run_k_sweep(cfg):
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    _require_p(cfg, 1, "k_sweep")
    T = cfg.Ts[0]
    units = [(cfg, T, k, seed) for k in cfg.ks for seed in cfg.seeds]
    chunks = _pmap(_ksweep_unit, units, cfg.jobs)
    out = _write_csv(
        os.path.join(cfg.output_dir, "k_sweep.csv"),
        "x,f_true,f_hat,T,k,seed",
        [row for chunk in chunks for row in chunk],
    )
    _manifest(cfg, [out], started)
    return [out]


def run_mse_curve(cfg):
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    _require_p(cfg, 2, "mse_curve")
    if cfg.rho is None:
        cfg.rho = [0.5, 0.5]  # equal direction weights, recorded in the manifest
    units = [(cfg, T, seed) for T in cfg.Ts for seed in cfg.seeds]
    chunks = _pmap(_mse_unit, units, cfg.jobs)
    out = _write_csv(
        os.path.join(cfg.output_dir, "mse_curve.csv"),
        "T,mse,seed",
        [row for chunk in chunks for row in chunk],
        comment=f"grid: {int(grid_2d().shape[0])} points on [-2,2]^2, step 0.25",
    )
    _manifest(cfg, [out], started,
              {"k_by_T": {str(T): cfg.k_for(T) for T in cfg.Ts}})
    return [out]


def run_concentration(cfg):
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    _require_p(cfg, 1, "concentration")
    units = [(cfg, seed) for seed in cfg.seeds]
    chunks = _pmap(_concentration_unit, units, cfg.jobs)
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (int(r[0]), int(r[4])))
    from .oracle import SUP_SCOPE_NOTE

    out = _write_csv(
        os.path.join(cfg.output_dir, "concentration.csv"),
        "T,k,sup_dev,ratio,seed",
        rows,
        comment=SUP_SCOPE_NOTE,
    )
    _manifest(cfg, [out], started,
              {"k_by_T": {str(T): cfg.k_for(T) for T in cfg.Ts}})
    return [out]


def run_density_check(cfg):
    started = time.time()
    os.makedirs(cfg.output_dir, exist_ok=True)
    f = resolve_f(cfg.f_name)
    noise = resolve_noise(cfg.noise)
    seed = cfg.seeds[0]
    sim = SimulationSpec(f, noise, T=cfg.n_samples, burn_in=cfg.burn_in, seed=seed)
    rep = density_bound_check(sim, cfg.n_samples, cfg.n_bins_per_axis)
    out = _write_csv(
        os.path.join(cfg.output_dir, "density_check.csv"),
        "zeta_bar,zeta,fraction_in_bounds,min_density,max_density,"
        "n_bins,n_samples,seed",
        [[_float_cell(rep.zeta_bar), _float_cell(rep.zeta),
          _float_cell(rep.fraction_in_bounds), _float_cell(rep.min_density),
          _float_cell(rep.max_density), str(rep.n_bins),
          str(rep.n_samples), str(seed)]],
    )
    _manifest(cfg, [out], started)
    return [out]


_RUNNERS = {
    "simulate": run_simulate,
    "estimation_curves": run_estimation_curves,
    "k_sweep": run_k_sweep,
    "mse_curve": run_mse_curve,
    "concentration": run_concentration,
    "density_check": run_density_check,
}


def run_experiment(cfg):
    """Dispatch on cfg.experiment; returns the list of written CSV paths."""
    return _RUNNERS[cfg.experiment](cfg)
