"""Full-sample forests: B trees on the same data, averaged predictions.

There is no bootstrap or subsampling of any kind; every tree sees the
entire dataset, and ensemble diversity comes solely from the randomized
split selection. Per-tree randomness is derived from the forest's master
seed by a counter-based scheme (``SeedSequence(master_seed, spawn_key=(b,))``
for tree b), so the fitted forest is a pure function of (data, config, B,
master_seed) regardless of execution order.
"""

import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import as_point_matrix, check_nonneg_int, check_positive_int
from .nlar import Dataset
from .partition import apply_batch, deserialize_tree, leaf_of, serialize_tree, validate_akm
from .tree_builder import BuildConfig, grow_tree

__all__ = [
    "Forest",
    "tree_stream",
    "fit_forest",
    "tree_predict",
    "forest_predict",
    "forest_predict_batch",
    "forest_apply",
    "dataset_fingerprint",
    "save_forest",
    "load_forest",
]


@dataclass
class Forest:
    """B trees grown on one dataset with shared build parameters."""

    trees: list
    data: Dataset
    config: BuildConfig
    B: int
    master_seed: int


def tree_stream(master_seed, b):
    """The independent random stream assigned to tree ``b``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(b,)))


def fit_forest(data, config, B, master_seed, validate=True):
    """Grow B trees with per-tree derived streams; optionally check each
    tree's structural validity (cheap, on by default)."""
    check_positive_int("B", B)
    master_seed = check_nonneg_int("master_seed", master_seed)
    trees = []
    for b in range(B):
        tree = grow_tree(data, config, tree_stream(master_seed, b))
        if validate:
            report = validate_akm(tree, data, config.alpha, config.k, config.resolved_m)
            if not report.ok:
                raise RuntimeError(f"tree {b} failed validity checks: {report}")
        trees.append(tree)
    return Forest(trees, data, config, int(B), master_seed)


def tree_predict(tree, data, x):
    """Arithmetic mean of the outputs in the leaf containing ``x``."""
    leaf = leaf_of(tree, x)
    if leaf.count == 0:
        raise RuntimeError("empty leaf reached; the tree violates its leaf-count rule")
    return float(np.mean(data.Y[leaf.sample_indices]))


def forest_predict(forest, x):
    """Mean over trees of the per-tree leaf averages at ``x``."""
    vals = [tree_predict(tree, forest.data, x) for tree in forest.trees]
    return math.fsum(vals) / forest.B


def _predict_chunk(forest, X):
    vals = np.empty((forest.B, X.shape[0]))
    for b, tree in enumerate(forest.trees):
        vals[b] = tree._leaf_value[apply_batch(tree, X)]
    return np.array([math.fsum(col) / forest.B for col in vals.T])


def forest_predict_batch(forest, xs, n_jobs=1):
    """Elementwise :func:`forest_predict`, order preserved.

    Parallelism chunks the query points; per-query results are independent
    of the chunking (the per-query mean is a compensated sum over trees),
    so any ``n_jobs`` yields bit-identical output.
    """
    X = as_point_matrix(xs, forest.data.p)
    n = X.shape[0]
    if n == 0:
        return np.empty(0)
    if n_jobs is None or n_jobs <= 1 or n < 2:
        return _predict_chunk(forest, X)
    n_jobs = min(n_jobs, n)
    edges = np.linspace(0, n, n_jobs + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        parts = list(pool.map(
            lambda se: _predict_chunk(forest, X[se[0]: se[1]]),
            zip(edges[:-1], edges[1:]),
        ))
    return np.concatenate(parts)


def forest_apply(forest, xs):
    """Leaf node ids per query and tree, shape (n, B)."""
    X = as_point_matrix(xs, forest.data.p)
    out = np.empty((X.shape[0], forest.B), dtype=np.int64)
    for b, tree in enumerate(forest.trees):
        out[:, b] = apply_batch(tree, X)
    return out


# ---------------------------------------------------------------------------
# Persistence: a directory of serialized trees plus a metadata header.
# ---------------------------------------------------------------------------


def dataset_fingerprint(data):
    """SHA-256 of the dataset's canonical CSV form."""
    buf = io.StringIO()
    data.to_csv(buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def _config_to_dict(config):
    return {
        "k": config.k,
        "m": config.m,
        "alpha": config.alpha,
        "rho": list(config.rho) if config.rho is not None else None,
        "split_rule": config.split_rule,
        "seed": config.seed,
    }


def _config_from_dict(d):
    rho = d.get("rho")
    return BuildConfig(
        k=d["k"], m=d.get("m"), alpha=d["alpha"],
        rho=tuple(rho) if rho is not None else None,
        split_rule=d["split_rule"], seed=d.get("seed", 0),
    )


def save_forest(forest, directory, include_data=True):
    """Write metadata.json plus one tree file per tree (and, by default,
    a copy of the training data, which reloading requires)."""
    os.makedirs(directory, exist_ok=True)
    trees_dir = os.path.join(directory, "trees")
    os.makedirs(trees_dir, exist_ok=True)
    from . import __version__

    meta = {
        "format": 1,
        "version": __version__,
        "B": forest.B,
        "master_seed": forest.master_seed,
        "config": _config_to_dict(forest.config),
        "p": forest.data.p,
        "T": forest.data.T,
        "dataset_sha256": dataset_fingerprint(forest.data),
    }
    with open(os.path.join(directory, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for b, tree in enumerate(forest.trees):
        with open(os.path.join(trees_dir, f"tree_{b:05d}.txt"), "w") as fh:
            fh.write(serialize_tree(tree))
    if include_data:
        forest.data.to_csv(os.path.join(directory, "data.csv"))
    return directory


def load_forest(directory, data=None):
    """Reload a persisted forest, rebuilding leaf contents from the data.

    ``data`` defaults to the data.csv stored alongside the trees; either
    way its fingerprint must match the metadata header.
    """
    with open(os.path.join(directory, "metadata.json")) as fh:
        meta = json.load(fh)
    if data is None:
        data_path = os.path.join(directory, "data.csv")
        if not os.path.exists(data_path):
            raise FileNotFoundError(
                "forest directory stores no data.csv; pass the training data explicitly"
            )
        data = Dataset.from_csv(data_path)
    fp = dataset_fingerprint(data)
    if fp != meta["dataset_sha256"]:
        raise ValueError(
            "dataset fingerprint mismatch: this is not the forest's training data"
        )
    config = _config_from_dict(meta["config"])
    trees = []
    for b in range(meta["B"]):
        with open(os.path.join(directory, "trees", f"tree_{b:05d}.txt")) as fh:
            trees.append(deserialize_tree(fh.read(), data, config))
    return Forest(trees, data, config, meta["B"], meta["master_seed"])
