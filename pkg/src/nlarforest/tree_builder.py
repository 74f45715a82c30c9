"""Growing a single validity-constrained tree on a lagged dataset.

A grown tree obeys, by construction:

* every leaf holds at least ``k`` training points;
* each child of a split holds at least ``max(k, ceil(alpha * n))`` of its
  parent's ``n`` points (no edge splits);
* every node holding at least ``m`` points (default ``2k``) is split,
  unless no admissible split exists on any axis, in which case it becomes
  a leaf carrying an ``infeasible`` flag;
* the split axis is drawn from a categorical over strictly positive
  per-axis probabilities ``rho`` (uniform by default), resampling without
  replacement among the remaining axes when the drawn one admits no split.

Two split rules are provided. ``extratrees`` draws the threshold uniformly
at random from the admissible coordinate range, then snaps it to the
midpoint of the two order statistics it separates, so child counts are
exact. ``variance_reduction`` scans every admissible rank and keeps the
one minimizing the within-child sum of squared deviations of the outputs
(ties break toward the lowest threshold).

Expansion is breadth-first, giving reproducible node numbering; the tree
is a pure function of (data, config, stream state).
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._validation import check_open_fraction, check_positive_int, check_rho
from .errors import ConfigurationError
from .partition import Node, Split, Tree, balanced_min_count

__all__ = [
    "EXTRATREES",
    "VARIANCE_REDUCTION",
    "BuildConfig",
    "admissible_interval",
    "choose_split",
    "grow_tree",
]

EXTRATREES = "extratrees"
VARIANCE_REDUCTION = "variance_reduction"
_SPLIT_RULES = (EXTRATREES, VARIANCE_REDUCTION)


@dataclass(frozen=True)
class BuildConfig:
    """Shared tree-growing parameters.

    ``m`` defaults to ``2k`` (keep splitting for as long as the minimum
    leaf count allows); ``rho`` defaults to uniform over axes; ``seed``
    seeds the growth stream when :func:`grow_tree` is called without one.
    """

    k: int
    m: int = None
    alpha: float = 0.1
    rho: tuple = None
    split_rule: str = EXTRATREES
    seed: int = 0

    def __post_init__(self):
        check_positive_int("k", self.k)
        check_open_fraction("alpha", self.alpha)
        if self.m is not None:
            check_positive_int("m", self.m)
            if self.m < 2 * self.k:
                raise ConfigurationError(
                    f"m must be at least 2k = {2 * self.k}, got {self.m}"
                )
        if self.split_rule not in _SPLIT_RULES:
            raise ConfigurationError(
                f"split_rule must be one of {_SPLIT_RULES}, got {self.split_rule!r}"
            )
        if self.rho is not None:
            rho = tuple(float(v) for v in self.rho)
            if any(v <= 0.0 for v in rho):
                raise ConfigurationError("every entry of rho must be strictly positive")
            object.__setattr__(self, "rho", rho)

    @property
    def resolved_m(self):
        return self.m if self.m is not None else 2 * self.k

    def resolved_rho(self, p):
        if self.rho is None:
            return np.full(p, 1.0 / p)
        return check_rho(self.rho, p)


def _rank_bounds(values_sorted, k, alpha):
    """Admissible left-count range [lo, hi] on one axis, or None.

    A left count r is admissible when both children meet the balance and
    minimum-count rules: r and n - r each at least max(k, ceil(alpha*n)).
    None is returned when the range is empty or when the coordinates are
    tied across the whole band (no threshold can realize any count in it).
    """
    n = values_sorted.shape[0]
    lo = max(k, balanced_min_count(alpha, n))
    hi = n - lo
    if lo > hi or values_sorted[lo - 1] == values_sorted[hi]:
        return None
    return lo, hi


def admissible_interval(node, axis, data, config):
    """Admissible left-count bounds for splitting ``node`` along ``axis``."""
    values = np.sort(data.X[node.sample_indices, axis])
    return _rank_bounds(values, config.k, config.alpha)


def _midpoint_threshold(values_sorted, r):
    """Midpoint between order statistics r and r+1; falls back to the lower
    value when the midpoint is not strictly below the upper one (adjacent
    floats), keeping the closed-left child count exactly r."""
    a = float(values_sorted[r - 1])
    b = float(values_sorted[r])
    t = a + 0.5 * (b - a)
    if not (a <= t < b):
        t = a
    return t


def _nearest_separable_rank(values_sorted, r, lo, hi):
    for step in range(1, hi - lo + 1):
        for cand in (r + step, r - step):
            if lo <= cand <= hi and values_sorted[cand - 1] < values_sorted[cand]:
                return cand
    raise RuntimeError("no separable rank in an interval that was admissible")


def _extratrees_rank(values_sorted, lo, hi, rng):
    c_lo = values_sorted[lo - 1]
    c_hi = values_sorted[hi]
    u = rng.uniform(c_lo, c_hi)
    r = int(np.searchsorted(values_sorted, u, side="right"))
    r = min(max(r, lo), hi)
    if not values_sorted[r - 1] < values_sorted[r]:
        r = _nearest_separable_rank(values_sorted, r, lo, hi)
    return r


def _variance_reduction_rank(values_sorted, y_sorted, lo, hi):
    n = y_sorted.shape[0]
    yc = y_sorted - y_sorted.mean()  # centering for numerical conditioning
    c1 = np.cumsum(yc)
    c2 = np.cumsum(yc * yc)
    r = np.arange(lo, hi + 1)
    total = (
        c2[r - 1] - c1[r - 1] ** 2 / r
        + (c2[-1] - c2[r - 1]) - (c1[-1] - c1[r - 1]) ** 2 / (n - r)
    )
    total[values_sorted[r - 1] >= values_sorted[r]] = np.inf  # ties: unreachable ranks
    return int(r[int(np.argmin(total))])  # first minimum = lowest threshold


def choose_split(node, data, config, rng):
    """Draw an axis from rho and place an admissible split on it.

    Axes whose admissible interval is empty are removed and the draw is
    repeated over the rest with renormalized probabilities; None means
    every axis is exhausted and the node must become an (infeasible) leaf.
    """
    p = data.p
    weights = config.resolved_rho(p).copy()
    available = np.arange(p)
    idx = node.sample_indices
    while available.size:
        j = int(rng.choice(available.size, p=weights / weights.sum()))
        axis = int(available[j])
        order = np.argsort(data.X[idx, axis], kind="stable")
        values = data.X[idx, axis][order]
        bounds = _rank_bounds(values, config.k, config.alpha)
        if bounds is None:
            available = np.delete(available, j)
            weights = np.delete(weights, j)
            continue
        lo, hi = bounds
        if config.split_rule == EXTRATREES:
            r = _extratrees_rank(values, lo, hi, rng)
        else:
            r = _variance_reduction_rank(values, data.Y[idx][order], lo, hi)
        return Split(axis, _midpoint_threshold(values, r))
    return None


def grow_tree(data, config, rng=None):
    """Grow one tree breadth-first; see the module docstring for the rules."""
    config.resolved_rho(data.p)
    if data.T < config.k:
        raise ConfigurationError(
            f"T = {data.T} is below the minimum leaf count k = {config.k}: "
            "even the root violates the leaf-size rule"
        )
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    m = config.resolved_m

    root = Node(
        np.full(data.p, -np.inf),
        np.full(data.p, np.inf),
        np.arange(data.T, dtype=np.int64),
    )
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node.count < m:
            continue
        split = choose_split(node, data, config, rng)
        if split is None:
            node.infeasible = True
            continue
        mask = data.X[node.sample_indices, split.axis] <= split.threshold
        left_upper = node.upper.copy()
        left_upper[split.axis] = split.threshold
        right_lower = node.lower.copy()
        right_lower[split.axis] = split.threshold
        node.split = split
        node.left = Node(node.lower.copy(), left_upper, node.sample_indices[mask])
        node.right = Node(right_lower, node.upper.copy(), node.sample_indices[~mask])
        node.release_sample_indices()  # children carry the partition now
        queue.append(node.left)
        queue.append(node.right)
    return Tree.from_root(root, data.p, config, data)
