"""Recursive axis-aligned partitions of R^p and their validity checks.

Conventions fixed repo-wide:

* Splits are closed-left: a split (axis, threshold) sends {x : x[axis] <=
  threshold} to the left child and the rest to the right child.
* A node's region is the box prod_j (lower_j, upper_j] with lower bounds
  open and upper bounds closed (infinite bounds open), which makes the two
  children tile their parent exactly.
* Axes are 0-based.

Trees serialize to a line-oriented text format, one node per line in
breadth-first (node_id) order::

    # nlarforest tree v1 p=<p>
    # node_id,parent_id,axis,threshold,count
    0,-1,0,0.03125,400
    1,0,-1,nan,193
    ...

``axis`` is -1 and ``threshold`` is nan for leaves; thresholds are written
in round-trip-exact decimal form, so reloading reproduces the partition
bit-exactly. Among two children of the same parent, the smaller node_id is
the left child. Sample memberships and leaf means are not stored; they are
recomputed by routing the training data through the reloaded splits, and
the stored counts double as an integrity check.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_point, as_point_matrix, check_open_fraction, check_positive_int
from .errors import ConfigurationError

__all__ = [
    "Split",
    "Node",
    "Tree",
    "leaf_of",
    "apply_batch",
    "balanced_min_count",
    "validate_k_valid",
    "validate_akm",
    "KValidReport",
    "AkmReport",
    "serialize_tree",
    "deserialize_tree",
]


@dataclass(frozen=True)
class Split:
    """A closed-left split: x goes left iff x[axis] <= threshold."""

    axis: int
    threshold: float


@dataclass
class Node:
    """One cell of a recursive partition, with its training-sample members.

    ``sample_indices`` is a sorted int64 array of the training rows whose
    inputs fall in the region. Leaves always carry it; the tree builder
    releases it on internal nodes once their children exist (keeping only
    ``n_samples``), since a deep tree would otherwise hold O(T * depth)
    indices. ``infeasible`` marks a leaf that held enough points to require
    a split but admitted none (all coordinates tied across every admissible
    band); such leaves are exempt from the must-split rule in
    :func:`validate_akm`.
    """

    lower: np.ndarray
    upper: np.ndarray
    sample_indices: np.ndarray
    split: Split = None
    left: "Node" = None
    right: "Node" = None
    infeasible: bool = False
    node_id: int = -1
    leaf_value: float = None
    n_samples: int = None

    @property
    def is_leaf(self):
        return self.split is None

    @property
    def count(self):
        if self.sample_indices is not None:
            return int(self.sample_indices.shape[0])
        return int(self.n_samples)

    def contains(self, x):
        return bool(np.all(x > self.lower) and np.all(x <= self.upper))

    def release_sample_indices(self):
        """Drop the index array, keeping its size; used on internal nodes."""
        if self.sample_indices is not None:
            self.n_samples = int(self.sample_indices.shape[0])
            self.sample_indices = None


@dataclass
class Tree:
    """A finalized partition tree: nodes in breadth-first order plus a
    compact array encoding used for batch routing."""

    root: Node
    p: int
    build_params: object
    nodes: list
    leaf_count: int
    _axis: np.ndarray = field(repr=False, default=None)
    _threshold: np.ndarray = field(repr=False, default=None)
    _left: np.ndarray = field(repr=False, default=None)
    _right: np.ndarray = field(repr=False, default=None)
    _leaf_value: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_root(cls, root, p, build_params=None, data=None):
        """Assign breadth-first ids, cache leaf means, build the arrays."""
        nodes = []
        queue = deque([root])
        while queue:
            node = queue.popleft()
            node.node_id = len(nodes)
            nodes.append(node)
            if not node.is_leaf:
                queue.append(node.left)
                queue.append(node.right)
        n = len(nodes)
        axis = np.full(n, -1, dtype=np.int32)
        threshold = np.full(n, np.nan)
        left = np.full(n, -1, dtype=np.int32)
        right = np.full(n, -1, dtype=np.int32)
        leaf_value = np.full(n, np.nan)
        leaf_count = 0
        for node in nodes:
            if node.is_leaf:
                leaf_count += 1
                if data is not None and node.count > 0:
                    node.leaf_value = float(np.mean(data.Y[node.sample_indices]))
                    leaf_value[node.node_id] = node.leaf_value
            else:
                axis[node.node_id] = node.split.axis
                threshold[node.node_id] = node.split.threshold
                left[node.node_id] = node.left.node_id
                right[node.node_id] = node.right.node_id
        return cls(root, p, build_params, nodes, leaf_count,
                   axis, threshold, left, right, leaf_value)

    @property
    def leaves(self):
        return [n for n in self.nodes if n.is_leaf]


def leaf_of(tree, x):
    """Descend from the root by closed-left comparisons; return the leaf."""
    x = as_point(x, tree.p)
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.split.axis] <= node.split.threshold else node.right
    return node


def apply_batch(tree, X):
    """Leaf node_id for every row of X, by level-wise vectorized routing."""
    X = as_point_matrix(X, tree.p)
    node = np.zeros(X.shape[0], dtype=np.int64)
    axis, thr = tree._axis, tree._threshold
    left, right = tree._left, tree._right
    active = axis[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        nd = node[idx]
        go_left = X[idx, axis[nd]] <= thr[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active[idx] = axis[node[idx]] >= 0
    return node


def balanced_min_count(alpha, n):
    """ceil(alpha * n), computed with a small slack so that products like
    0.3 * 100 = 30.000000000000004 do not round up spuriously."""
    return max(0, math.ceil(alpha * n - 1e-9))


# ---------------------------------------------------------------------------
# Validity checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KValidReport:
    ok: bool
    offending_leaves: list
    k: int


def validate_k_valid(tree, data, k):
    """Check that every leaf holds at least k training points."""
    check_positive_int("k", k)
    offending = [n.node_id for n in tree.leaves if n.count < k]
    total = sum(n.count for n in tree.leaves)
    if data is not None and total != data.T:
        raise RuntimeError(
            f"leaf counts sum to {total}, expected T = {data.T}; tree/data mismatch"
        )
    return KValidReport(not offending, offending, int(k))


@dataclass(frozen=True)
class AkmReport:
    """Per-rule findings for the structural validity of one tree.

    rule_i_violations   : leaves with >= m points and no infeasibility flag
    rule_iii_violations : internal nodes with a child below ceil(alpha * n)
    rule_iv_violations  : leaves with fewer than k points
    """

    rule_i_violations: list
    rule_iii_violations: list
    rule_iv_violations: list
    n_infeasible_leaves: int
    alpha: float
    k: int
    m: int

    @property
    def ok(self):
        return not (self.rule_i_violations or self.rule_iii_violations
                    or self.rule_iv_violations)


def validate_akm(tree, data, alpha, k, m):
    """Check the structural split rules on a fitted tree.

    Verified here: leaves with at least m points must carry the builder's
    infeasibility flag (otherwise they should have been split); each child
    of an internal node holds at least ceil(alpha * parent count) points
    and children partition their parent's samples; every leaf holds at
    least k points. The positive-probability-per-axis rule is a property
    of the builder configuration, not of a single tree, and is enforced by
    :class:`~nlarforest.tree_builder.BuildConfig`.
    """
    check_positive_int("k", k)
    check_positive_int("m", m)
    check_open_fraction("alpha", alpha)
    if m < 2 * k:
        raise ConfigurationError(f"m must be at least 2k = {2 * k}, got {m}")

    rule_i, rule_iii, rule_iv = [], [], []
    n_infeasible = 0
    for node in tree.nodes:
        if node.is_leaf:
            if node.infeasible:
                n_infeasible += 1
            elif node.count >= m:
                rule_i.append(node.node_id)
            if node.count < k:
                rule_iv.append(node.node_id)
        else:
            need = balanced_min_count(alpha, node.count)
            if node.left.count < need or node.right.count < need:
                rule_iii.append(node.node_id)
            if node.left.count + node.right.count != node.count:
                raise RuntimeError(
                    f"children of node {node.node_id} do not partition it"
                )
    if data is not None and tree.root.count != data.T:
        raise RuntimeError(
            f"root holds {tree.root.count} samples, expected T = {data.T}"
        )
    return AkmReport(rule_i, rule_iii, rule_iv, n_infeasible,
                     float(alpha), int(k), int(m))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def serialize_tree(tree):
    """Render the split structure in the line format described above."""
    lines = [
        f"# nlarforest tree v{_FORMAT_VERSION} p={tree.p}",
        "# node_id,parent_id,axis,threshold,count",
    ]
    parent = {0: -1}
    for node in tree.nodes:
        if not node.is_leaf:
            parent[node.left.node_id] = node.node_id
            parent[node.right.node_id] = node.node_id
        ax = -1 if node.is_leaf else node.split.axis
        thr = "nan" if node.is_leaf else repr(float(node.split.threshold))
        lines.append(f"{node.node_id},{parent[node.node_id]},{ax},{thr},{node.count}")
    return "\n".join(lines) + "\n"


def deserialize_tree(text, data, build_params=None):
    """Rebuild a tree from its serialized form and its training data.

    Sample memberships, regions and leaf means are reconstructed by
    replaying the splits over ``data``; the stored per-node counts must
    match the recomputed ones or a RuntimeError is raised. When
    ``build_params`` (with attributes k/m/alpha) is given, infeasibility
    flags are re-derived: a leaf with at least m points can only have been
    left unsplit because no admissible split existed.
    """
    rows = []
    p = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "tree v" in line:
                p = int(line.rsplit("p=", 1)[1])
            continue
        nid, parent_id, ax, thr, count = line.split(",")
        rows.append((int(nid), int(parent_id), int(ax), float(thr), int(count)))
    if p is None:
        raise ValueError("missing tree header line")
    if p != data.p:
        raise ValueError(f"tree was built on p={p}, data has p={data.p}")
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError("node ids must be consecutive from 0")

    children = {}
    for nid, parent_id, ax, thr, count in rows:
        if parent_id >= 0:
            children.setdefault(parent_id, []).append(nid)
    for parent_id, kids in children.items():
        if len(kids) != 2:
            raise ValueError(f"node {parent_id} must have exactly two children")
        kids.sort()  # lower id is the left child

    m = None
    if build_params is not None:
        m = getattr(build_params, "m", None) or 2 * build_params.k

    def build(nid, lower, upper, indices):
        _, _, ax, thr, count = rows[nid]
        if count != indices.shape[0]:
            raise RuntimeError(
                f"node {nid}: stored count {count} != recomputed {indices.shape[0]}"
            )
        node = Node(lower, upper, indices)
        if ax >= 0:
            node.split = Split(ax, thr)
            mask = data.X[indices, ax] <= thr
            left_id, right_id = children[nid]
            lu = upper.copy()
            lu[ax] = thr
            rl = lower.copy()
            rl[ax] = thr
            node.left = build(left_id, lower.copy(), lu, indices[mask])
            node.right = build(right_id, rl, upper.copy(), indices[~mask])
            node.release_sample_indices()
        elif m is not None and count >= m:
            node.infeasible = True
        return node

    root = build(0, np.full(p, -np.inf), np.full(p, np.inf),
                 np.arange(data.T, dtype=np.int64))
    return Tree.from_root(root, p, build_params, data)
