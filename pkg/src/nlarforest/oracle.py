"""Monte-Carlo reference values for fitted trees and forests.

The fitted tree predicts the training average within a leaf; its idealized
counterpart is the true conditional mean E[Y | X in leaf] under the
stationary law. That law has no closed form, so it is estimated here by
simulating a long independent path from the same process and averaging
over the evaluation pairs landing in each leaf. One shared evaluation path
serves every leaf of every tree in a report (deviations are compared, not
assumed independent), and paths are cached in-process by their full
generating key.

Caveat stated in every report: the supremum is taken over the leaves of
the grown trees only. The family of all partitions meeting the minimum
leaf count is uncountable and cannot be enumerated; how close grown trees
come to its worst case is not observable.

The module also hosts the input-transform diagnostics: the two-component
shifted mixture density built from the noise tail ratio, the coordinatewise
CDF map into [0,1]^p, and an empirical check that the transformed input
density is pinned between 1/zeta and zeta.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._validation import check_nonneg_int, check_positive_int, check_positive_real
from .errors import ConfigurationError, EstimationError, ModelError
from .nlar import Dataset, simulate_dataset
from .noise import GAUSSIAN, LAPLACE
from .partition import leaf_of
from .forest import fit_forest

__all__ = [
    "OracleConfig",
    "LeafReport",
    "DeviationReport",
    "ConcentrationRow",
    "oracle_tree_value",
    "leaf_deviation_report",
    "concentration_study",
    "zeta_bar",
    "MixtureDensity",
    "mixture_density",
    "transform_inputs",
    "density_bound_check",
    "DensityBoundReport",
]

SUP_SCOPE_NOTE = (
    "sup taken over the grown forest's leaves only; the full family of "
    "minimum-leaf-count partitions is not enumerable"
)


@dataclass(frozen=True)
class OracleConfig:
    """Length, burn-in and seed of the independent evaluation path."""

    n_mc: int = 1_000_000
    burn_in: int = 1000
    seed: int = 0

    def __post_init__(self):
        check_positive_int("n_mc", self.n_mc)
        check_nonneg_int("burn_in", self.burn_in)
        if self.n_mc < 10_000:
            raise ConfigurationError(
                "n_mc below 10000 leaves the Monte-Carlo noise larger than the "
                "signal being measured"
            )


# Evaluation paths are expensive (sequential recursion); keep the few most
# recent, keyed by everything that determines their bits.
_MC_CACHE = {}
_MC_CACHE_LIMIT = 4


def _mc_key(sim, ocfg):
    return (
        sim.f.id, id(sim.f), sim.noise.kind, sim.noise.scale, sim.f.p,
        sim.initial_data, ocfg.n_mc, ocfg.burn_in, ocfg.seed,
    )


def mc_dataset(sim, ocfg):
    """The evaluation dataset for ``sim``'s process at ``ocfg``'s settings."""
    key = _mc_key(sim, ocfg)
    if key not in _MC_CACHE:
        if len(_MC_CACHE) >= _MC_CACHE_LIMIT:
            _MC_CACHE.pop(next(iter(_MC_CACHE)))
        spec = replace(sim, T=ocfg.n_mc, burn_in=ocfg.burn_in, seed=ocfg.seed)
        _MC_CACHE[key] = simulate_dataset(spec)
    return _MC_CACHE[key]


@dataclass(frozen=True)
class LeafReport:
    """Per-leaf comparison of the training average with its oracle value.

    ``oracle_mean``/``oracle_se``/``deviation`` are None when no evaluation
    point landed in the leaf; ``oracle_se`` is additionally None when only
    one did.
    """

    tree_id: int
    leaf_id: int
    count: int
    sample_mean: float
    oracle_mean: float
    oracle_hits: int
    oracle_se: float
    deviation: float


@dataclass(frozen=True)
class DeviationReport:
    leaf_reports: list
    sup_deviation: float
    n_zero_hit_leaves: int
    n_leaves: int
    note: str = SUP_SCOPE_NOTE

    def abs_deviations(self):
        return np.array([abs(r.deviation) for r in self.leaf_reports
                         if r.deviation is not None])

    def to_csv(self, path_or_buf):
        rows = ["# " + self.note,
                "tree_id,leaf_id,count,sample_mean,oracle_mean,oracle_hits,"
                "oracle_se,deviation"]
        for r in self.leaf_reports:
            rows.append(",".join([
                str(r.tree_id), str(r.leaf_id), str(r.count),
                repr(r.sample_mean),
                "" if r.oracle_mean is None else repr(r.oracle_mean),
                str(r.oracle_hits),
                "" if r.oracle_se is None else repr(r.oracle_se),
                "" if r.deviation is None else repr(r.deviation),
            ]))
        text = "\n".join(rows) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)


def _leaf_mask(X, leaf):
    """Membership of each row of X in the leaf's box; equivalent to routing
    (the leaves of a tree tile R^p with the same comparisons), but cheaper
    when aggregating leaf by leaf. Infinite bounds impose no condition."""
    mask = None
    for j in range(X.shape[1]):
        lo, up = leaf.lower[j], leaf.upper[j]
        if lo != -np.inf:
            c = X[:, j] > lo
            mask = c if mask is None else mask & c
        if up != np.inf:
            c = X[:, j] <= up
            mask = c if mask is None else mask & c
    if mask is None:
        return np.ones(X.shape[0], dtype=bool)
    return mask


def oracle_tree_value(tree, x, sim, ocfg):
    """Estimate E[Y | X in leaf_of(x)] from an independent evaluation path.

    Returns (estimate, standard error). Raises
    :class:`~nlarforest.errors.EstimationError` when no evaluation point
    lands in the leaf (enlarge ``n_mc``).
    """
    mc = mc_dataset(sim, ocfg)
    leaf = leaf_of(tree, x)
    mask = _leaf_mask(mc.X, leaf)
    hits = int(np.count_nonzero(mask))
    if hits == 0:
        raise EstimationError(
            f"no evaluation point landed in leaf with region "
            f"({leaf.lower}, {leaf.upper}]; increase n_mc"
        )
    vals = mc.Y[mask]
    estimate = float(np.mean(vals))
    se = float(vals.std(ddof=1) / math.sqrt(hits)) if hits >= 2 else math.nan
    return estimate, se


def leaf_deviation_report(forest, sim, ocfg, mc_data=None):
    """Compare every leaf's training average against its oracle value.

    One shared evaluation path (from ``mc_dataset``) scores all leaves of
    all trees; zero-hit leaves are reported with absent oracle fields and
    excluded from the supremum. ``mc_data`` substitutes an explicit
    evaluation dataset (diagnostic hook; passing the training data itself
    must reproduce each sample mean exactly).
    """
    mc = mc_dataset(sim, ocfg) if mc_data is None else mc_data
    y = mc.Y
    ysq = y * y
    reports = []
    sup = 0.0
    n_zero = 0
    n_leaves = 0
    for tree_id, tree in enumerate(forest.trees):
        for leaf in tree.leaves:
            n_leaves += 1
            mask = _leaf_mask(mc.X, leaf)
            h = int(np.count_nonzero(mask))
            sample_mean = float(np.mean(forest.data.Y[leaf.sample_indices]))
            if h == 0:
                n_zero += 1
                reports.append(LeafReport(tree_id, leaf.node_id, leaf.count,
                                          sample_mean, None, 0, None, None))
                continue
            om = float(mask @ y) / h
            se = None
            if h >= 2:
                var = max(float(mask @ ysq) / h - om * om, 0.0) * h / (h - 1)
                se = float(math.sqrt(var) / math.sqrt(h))
            dev = sample_mean - om
            sup = max(sup, abs(dev))
            reports.append(LeafReport(tree_id, leaf.node_id, leaf.count,
                                      sample_mean, om, h, se, dev))
    return DeviationReport(reports, sup, n_zero, n_leaves)


@dataclass(frozen=True)
class ConcentrationRow:
    T: int
    k: int
    sup_dev: float
    ratio: float
    seed: int


def concentration_study(Ts, k_for, sim, build_config, B, ocfg, master_seed=None):
    """Fit one forest per sample size and normalize its sup deviation.

    ``k_for`` maps T to the minimum leaf count. The emitted ratio is
    sup_dev * sqrt(k) / (ln T)^2, which should stay bounded as T grows.
    ``build_config`` serves as a template; its k is replaced per T (leave
    its m as None so the default 2k tracks k).
    """
    Ts = [check_positive_int("T", T) for T in Ts]
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ConfigurationError("Ts must be strictly increasing")
    k_lookup = k_for if callable(k_for) else k_for.__getitem__
    rows = []
    for T in Ts:
        k = check_positive_int("k", k_lookup(T))
        cfg = replace(build_config, k=k)
        tsim = replace(sim, T=T)
        data = simulate_dataset(tsim)
        forest = fit_forest(
            data, cfg, B, sim.seed if master_seed is None else master_seed
        )
        rep = leaf_deviation_report(forest, tsim, ocfg)
        ratio = rep.sup_deviation * math.sqrt(k) / math.log(T) ** 2
        rows.append(ConcentrationRow(T, k, rep.sup_deviation, ratio, sim.seed))
    return rows


# ---------------------------------------------------------------------------
# Input transform: tail ratio, shifted mixture, CDF map, density bounds.
# ---------------------------------------------------------------------------


def zeta_bar(noise, M):
    """sup over x of cdf(x + M) / cdf(x - M), for shift M > 0.

    Combines the analytic left-tail limit with a numeric sweep (grid plus
    bounded golden refinement). For the Laplace family the ratio equals
    exp(2M/b) on the whole left tail x <= -M and decreases to 1 beyond it.
    For the Gaussian family the ratio diverges as x -> -inf, so the
    supremum does not exist and :class:`ModelError` is raised.
    """
    M = check_positive_real("M", M)
    if noise.kind == GAUSSIAN:
        raise ModelError(
            "the Gaussian tail ratio cdf(x+M)/cdf(x-M) diverges as x -> -inf; "
            "no finite supremum exists"
        )
    assert noise.kind == LAPLACE
    tail_limit = math.exp(2.0 * M / noise.scale)

    def neg_ratio(x):
        return -noise.cdf(x + M) / noise.cdf(x - M)

    lo = -30.0 * noise.scale - M
    hi = 30.0 * noise.scale + M
    grid = np.linspace(lo, hi, 4001)
    vals = noise.cdf(grid + M) / noise.cdf(grid - M)
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(neg_ratio, bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    best = max(float(vals[i]), float(-res.fun), tail_limit)
    if not math.isfinite(best):
        raise ModelError("tail ratio has no finite supremum for this noise model")
    return best


@dataclass(frozen=True)
class MixtureDensity:
    """Two-component mixture of the noise density shifted by +/- M.

    Weights are (1 - 1/zbar) / (zbar - 1/zbar) on the +M-shifted component
    and (zbar - 1) / (zbar - 1/zbar) on the -M-shifted one, where zbar is
    the noise tail ratio at shift M. By construction the mixture's CDF is
    bracketed as cdf_noise(x + M) / zbar <= cdf(x) <= zbar * cdf_noise(x - M),
    which is what pins the transformed input density (see
    :func:`density_bound_check`).
    """

    noise: object
    M: float
    zbar: float
    w_plus: float
    w_minus: float

    def density(self, y):
        return (self.w_plus * self.noise.density(np.asarray(y) + self.M)
                + self.w_minus * self.noise.density(np.asarray(y) - self.M))

    def cdf(self, y):
        return (self.w_plus * self.noise.cdf(np.asarray(y) + self.M)
                + self.w_minus * self.noise.cdf(np.asarray(y) - self.M))

    def quantile(self, u):
        u_arr = np.asarray(u, dtype=np.float64)
        if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
            raise ValueError("quantile argument must lie strictly inside (0, 1)")
        scalar = u_arr.ndim == 0
        out = np.array([self._quantile_one(v) for v in np.atleast_1d(u_arr)])
        return float(out[0]) if scalar else out

    def _quantile_one(self, u):
        lo = self.noise.quantile(min(u, 0.5)) - self.M - 1.0
        hi = self.noise.quantile(max(u, 0.5)) + self.M + 1.0
        while self.cdf(lo) > u:
            lo = 2.0 * lo - hi
        while self.cdf(hi) < u:
            hi = 2.0 * hi - lo
        return brentq(lambda x: self.cdf(x) - u, lo, hi, xtol=1e-13)


def mixture_density(noise, M):
    """The shifted mixture at shift M, with its tail ratio attached."""
    zbar = zeta_bar(noise, M)
    denom = zbar - 1.0 / zbar
    return MixtureDensity(noise, float(M), zbar,
                          w_plus=(1.0 - 1.0 / zbar) / denom,
                          w_minus=(zbar - 1.0) / denom)


def transform_inputs(data, h):
    """Apply the CDF of ``h`` coordinatewise, mapping inputs into (0,1)^p.

    Strictly monotone per coordinate, so order statistics are preserved.
    """
    Z = np.empty_like(data.X)
    for j in range(data.p):
        Z[:, j] = h.cdf(data.X[:, j])
    return Dataset(Z, data.Y.copy(), data.p)


@dataclass(frozen=True)
class DensityBoundReport:
    zeta: float
    zeta_bar: float
    fraction_in_bounds: float
    n_bins: int
    n_samples: int
    min_density: float
    max_density: float


def density_bound_check(sim, n_samples, n_bins_per_axis):
    """Histogram check that the transformed input density lies in
    [1/(2*zeta), 2*zeta] with zeta = zbar**p.

    The factor 2 absorbs histogram noise and the almost-everywhere nature
    of the underlying bound. Only p in {1, 2} is supported; histogram
    density estimation degrades beyond that.
    """
    p = sim.f.p
    if p not in (1, 2):
        raise ConfigurationError("density_bound_check supports p in {1, 2} only")
    check_positive_int("n_samples", n_samples)
    check_positive_int("n_bins_per_axis", n_bins_per_axis)
    zbar = zeta_bar(sim.noise, sim.f.bound_M)
    h = mixture_density(sim.noise, sim.f.bound_M)
    data = simulate_dataset(replace(sim, T=n_samples))
    Z = transform_inputs(data, h)
    if p == 1:
        counts, _ = np.histogram(Z.X[:, 0], bins=n_bins_per_axis, range=(0.0, 1.0))
    else:
        counts, _, _ = np.histogram2d(
            Z.X[:, 0], Z.X[:, 1], bins=n_bins_per_axis,
            range=[(0.0, 1.0), (0.0, 1.0)],
        )
    counts = counts.ravel()
    volume = (1.0 / n_bins_per_axis) ** p
    dens = counts / (n_samples * volume)
    zeta = zbar**p
    in_bounds = (dens >= 0.5 / zeta) & (dens <= 2.0 * zeta)
    return DensityBoundReport(
        zeta=float(zeta), zeta_bar=float(zbar),
        fraction_in_bounds=float(np.mean(in_bounds)),
        n_bins=int(counts.size), n_samples=int(n_samples),
        min_density=float(dens.min()), max_density=float(dens.max()),
    )
