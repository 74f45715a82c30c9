"""Nonlinear autoregressive path simulation and dataset assembly.

The process of order p is the recursion

    Y_t = f(X_t) + eps_t,      X_t = (Y_{t-1}, ..., Y_{t-p}),

started from p initial values and driven by i.i.d. noise. Paths are made
approximately stationary by discarding a burn-in prefix (the process is
geometrically ergodic for bounded f and positive noise density, so the
residual initialization bias decays exponentially in the burn-in length).

Lag vectors are ordered most-recent-first everywhere: X_t[0] = Y_{t-1},
and initial/warm-start vectors follow the same convention.
"""

import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import minimize, minimize_scalar

from ._validation import check_nonneg_int, check_positive_int, check_positive_real
from .errors import ConfigurationError, SimulationError
from .noise import NoiseModel

__all__ = [
    "RegressionFunction",
    "SimulationSpec",
    "SimulationDetails",
    "Dataset",
    "builtin_function",
    "zero_function",
    "probe_bound",
    "simulate",
    "simulate_dataset",
    "make_dataset",
    "stationarity_flag",
    "BUILTIN_NAMES",
]


@dataclass(frozen=True)
class RegressionFunction:
    """A regression map R^p -> R with a declared sup-norm bound.

    Parameters
    ----------
    id : str
        Stable identifier (used in manifests and cache keys).
    p : int
        Input dimension.
    evaluator : callable
        Maps a length-p float vector to a float.
    bound_M : float
        Declared bound on |f|; validated by :func:`probe_bound`.
    lipschitz_C : float or None
        Optional Lipschitz constant (metadata; grid estimate for builtins).
    batch_evaluator : callable or None
        Optional vectorized form mapping an (n, p) array to length-n values.
    scalar_evaluator : callable or None
        Optional float -> float form for p == 1; when present it is the
        single source of truth (``evaluator`` delegates to it), which keeps
        the simulation loop and any re-evaluation bit-identical.
    """

    id: str
    p: int
    evaluator: object
    bound_M: float
    lipschitz_C: float = None
    batch_evaluator: object = field(default=None, repr=False)
    scalar_evaluator: object = field(default=None, repr=False)

    def __post_init__(self):
        check_positive_int("p", self.p)
        check_positive_real("bound_M", self.bound_M)
        if self.lipschitz_C is not None:
            check_positive_real("lipschitz_C", self.lipschitz_C)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.p:
            raise ValueError(f"{self.id} expects dimension {self.p}, got {x.shape[0]}")
        if self.scalar_evaluator is not None and self.p == 1:
            return float(self.scalar_evaluator(float(x[0])))
        return float(self.evaluator(x))

    def evaluate_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValueError(f"{self.id} expects an (n, {self.p}) array, got {X.shape}")
        if self.batch_evaluator is not None:
            return np.asarray(self.batch_evaluator(X), dtype=np.float64)
        return np.array([self(row) for row in X], dtype=np.float64)


# ---------------------------------------------------------------------------
# Built-in regression functions.
#
# Scalar forms use the math module; vectorized forms mirror them with numpy.
# Only the scalar forms feed the recursion, so simulated paths never depend
# on which form a caller picked.
# ---------------------------------------------------------------------------


def _f1(x):
    return 0.5 * math.copysign(min(abs(x), 10.0), x)


def _f2(x):
    return -2.0 * x * math.exp(-0.7 * x * x) + 3.0 * x * x * math.exp(-0.95 * x * x)


def _f3(x):
    return math.cos(5.0 * x) * math.exp(-x * x)


def _f4(x):
    a = abs(x)
    return min(a, 0.75) * min(a, 10.0)


def _f5(x1, x2):
    return (
        x1 * math.exp(-0.6 * x1 * x1)
        - 2.0 * (x1 * x1 * math.exp(-0.3 * x1 * x1) + x2 * math.exp(-0.7 * x2 * x2))
        + 3.0 * x2 * x2 * math.exp(-0.95 * x2 * x2)
    )


def _f1_vec(X):
    x = X[:, 0]
    return 0.5 * np.sign(x) * np.minimum(np.abs(x), 10.0)


def _f2_vec(X):
    x = X[:, 0]
    return -2.0 * x * np.exp(-0.7 * x * x) + 3.0 * x * x * np.exp(-0.95 * x * x)


def _f3_vec(X):
    x = X[:, 0]
    return np.cos(5.0 * x) * np.exp(-x * x)


def _f4_vec(X):
    a = np.abs(X[:, 0])
    return np.minimum(a, 0.75) * np.minimum(a, 10.0)


def _f5_vec(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (
        x1 * np.exp(-0.6 * x1 * x1)
        - 2.0 * (x1 * x1 * np.exp(-0.3 * x1 * x1) + x2 * np.exp(-0.7 * x2 * x2))
        + 3.0 * x2 * x2 * np.exp(-0.95 * x2 * x2)
    )


# Padding applied to grid-searched bounds so randomized probing cannot land
# above a bound that is tight only up to grid resolution.
_BOUND_PAD = 1.0 + 1e-10


def _sup_abs_1d(fvec, fscalar, lo=-20.0, hi=20.0, n=2_000_001):
    x = np.linspace(lo, hi, n)
    v = np.abs(fvec(x.reshape(-1, 1)))
    i = int(np.argmax(v))
    a, b = x[max(i - 1, 0)], x[min(i + 1, n - 1)]
    res = minimize_scalar(
        lambda t: -abs(fscalar(t)), bounds=(a, b), method="bounded",
        options={"xatol": 1e-12},
    )
    return max(float(v[i]), float(-res.fun)) * _BOUND_PAD


def _sup_abs_2d(fvec, fscalar2, lo=-20.0, hi=20.0, n=2001):
    g = np.linspace(lo, hi, n)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    v = np.abs(fvec(pts))
    i = int(np.argmax(v))
    res = minimize(
        lambda z: -abs(fscalar2(z[0], z[1])), pts[i], method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14},
    )
    return max(float(v[i]), float(-res.fun)) * _BOUND_PAD


def _max_grad_1d(fvec, lo=-20.0, hi=20.0, n=2_000_001):
    x = np.linspace(lo, hi, n)
    v = fvec(x.reshape(-1, 1))
    return float(np.max(np.abs(np.gradient(v, x)))) * _BOUND_PAD


def _max_grad_2d(fvec, lo=-20.0, hi=20.0, n=2001):
    g = np.linspace(lo, hi, n)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    v = fvec(np.column_stack([X1.ravel(), X2.ravel()])).reshape(n, n)
    g1, g2 = np.gradient(v, g, g)
    return float(np.max(np.hypot(g1, g2))) * _BOUND_PAD


BUILTIN_NAMES = (
    "f1_clipped_linear",
    "f2_expar",
    "f3_cosine",
    "f4_spline",
    "f5_twodim",
)

_BUILTIN_ALIASES = {name.split("_")[0]: name for name in BUILTIN_NAMES}


def builtin_function(name):
    """Return a shipped regression function by name (aliases f1..f5 accepted).

    Sup-norm bounds are exact where the maximum is analytic (f1: 5 at the
    clip, f3: 1 at the origin, f4: 7.5 on the outer plateau) and otherwise
    computed by dense grid search plus local refinement; Lipschitz constants
    are exact for f1 and grid estimates elsewhere. Repeated calls return
    the same object.
    """
    return _builtin_function(_BUILTIN_ALIASES.get(name, name))


@functools.lru_cache(maxsize=None)
def _builtin_function(name):
    if name == "f1_clipped_linear":
        return RegressionFunction(
            name, 1, lambda x: _f1(float(x[0])), bound_M=5.0, lipschitz_C=0.5,
            batch_evaluator=_f1_vec, scalar_evaluator=_f1,
        )
    if name == "f2_expar":
        return RegressionFunction(
            name, 1, lambda x: _f2(float(x[0])),
            bound_M=_sup_abs_1d(_f2_vec, _f2), lipschitz_C=_max_grad_1d(_f2_vec),
            batch_evaluator=_f2_vec, scalar_evaluator=_f2,
        )
    if name == "f3_cosine":
        return RegressionFunction(
            name, 1, lambda x: _f3(float(x[0])),
            bound_M=1.0, lipschitz_C=_max_grad_1d(_f3_vec),
            batch_evaluator=_f3_vec, scalar_evaluator=_f3,
        )
    if name == "f4_spline":
        return RegressionFunction(
            name, 1, lambda x: _f4(float(x[0])),
            bound_M=7.5, lipschitz_C=1.5,
            batch_evaluator=_f4_vec, scalar_evaluator=_f4,
        )
    if name == "f5_twodim":
        return RegressionFunction(
            name, 2, lambda x: _f5(float(x[0]), float(x[1])),
            bound_M=_sup_abs_2d(_f5_vec, _f5), lipschitz_C=_max_grad_2d(_f5_vec),
            batch_evaluator=_f5_vec,
        )
    raise ConfigurationError(f"unknown builtin function {name!r}")


def zero_function(p, bound_M=1e-9):
    """The identically-zero map, useful for pure-noise baselines."""
    return RegressionFunction(
        f"zero_p{p}", p, lambda x: 0.0, bound_M=bound_M,
        batch_evaluator=lambda X: np.zeros(len(X)),
        scalar_evaluator=(lambda x: 0.0) if p == 1 else None,
    )


def probe_bound(f, n_points=100_000, box=50.0, seed=0):
    """Randomized check that |f| <= f.bound_M on [-box, box]^p.

    Returns the largest |f| observed; raises ValueError on violation.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-box, box, size=(n_points, f.p))
    vals = np.abs(f.evaluate_batch(X))
    worst = float(vals.max())
    if worst > f.bound_M:
        i = int(np.argmax(vals))
        raise ValueError(
            f"{f.id}: declared bound {f.bound_M} violated at {X[i]} (|f| = {worst})"
        )
    return worst


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationSpec:
    """Everything needed to reproduce one simulated path bit-exactly.

    ``initial_data`` is (Y_0, Y_{-1}, ..., Y_{1-p}), most recent first;
    it defaults to the zero vector, with the burn-in (default 1000) left
    to wash out the arbitrary start.
    """

    f: RegressionFunction
    noise: NoiseModel
    T: int
    burn_in: int = 1000
    seed: int = 0
    initial_data: tuple = None

    def __post_init__(self):
        check_positive_int("T", self.T)
        check_nonneg_int("burn_in", self.burn_in)
        if self.T < self.f.p + 1:
            raise ConfigurationError(f"T must be at least p + 1 = {self.f.p + 1}")
        init = self.initial_data
        if init is None:
            init = (0.0,) * self.f.p
        init = tuple(float(v) for v in init)
        if len(init) != self.f.p:
            raise ConfigurationError(
                f"initial_data must have length p = {self.f.p}, got {len(init)}"
            )
        object.__setattr__(self, "initial_data", init)


@dataclass(frozen=True)
class SimulationDetails:
    """Diagnostic channel: the retained noise draws and the p values
    immediately preceding the retained path (most recent first)."""

    noise_draws: np.ndarray
    warm_start: np.ndarray


def simulate(spec, return_details=False):
    """Iterate the recursion for burn_in + T steps and return the last T.

    A fixed spec (including seed) yields a bit-identical path. Raises
    :class:`SimulationError` if any step produces a non-finite value,
    which can only happen for user functions violating their bound.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    total = spec.burn_in + spec.T
    draws = np.atleast_1d(spec.noise.sample(rng, size=total))
    p = spec.f.p
    path = np.empty(spec.T, dtype=np.float64)
    warm = np.array(spec.initial_data, dtype=np.float64)

    if p == 1 and spec.f.scalar_evaluator is not None:
        fs = spec.f.scalar_evaluator
        s = spec.initial_data[0]
        for t in range(total):
            if t == spec.burn_in:
                warm = np.array([s])
            y = fs(s) + draws[t]
            if not math.isfinite(y):
                raise SimulationError(f"non-finite value at step {t}", step=t)
            s = y
            if t >= spec.burn_in:
                path[t - spec.burn_in] = y
    else:
        f = spec.f
        state = np.array(spec.initial_data, dtype=np.float64)
        for t in range(total):
            if t == spec.burn_in:
                warm = state.copy()
            y = f(state) + draws[t]
            if not math.isfinite(y):
                raise SimulationError(f"non-finite value at step {t}", step=t)
            for j in range(p - 1, 0, -1):
                state[j] = state[j - 1]
            state[0] = y
            if t >= spec.burn_in:
                path[t - spec.burn_in] = y

    if return_details:
        return path, SimulationDetails(draws[spec.burn_in:].copy(), warm)
    return path


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Input-output pairs (X_t, Y_t), t = 1..T, with X rows most-recent-first."""

    X: np.ndarray
    Y: np.ndarray
    p: int
    source_spec: SimulationSpec = None

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        Y = np.ascontiguousarray(np.asarray(self.Y, dtype=np.float64))
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ValueError(f"X must be (T, {self.p}), got {X.shape}")
        if Y.shape != (X.shape[0],):
            raise ValueError(f"Y must be ({X.shape[0]},), got {Y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def T(self):
        return self.X.shape[0]

    def to_csv(self, path_or_buf):
        """Write "t,y,x1,...,xp" rows; floats in round-trip-exact form."""
        buf = path_or_buf if hasattr(path_or_buf, "write") else io.StringIO()
        header = "t,y," + ",".join(f"x{j + 1}" for j in range(self.p))
        buf.write(header + "\n")
        for t in range(self.T):
            cells = [str(t + 1), repr(float(self.Y[t]))]
            cells.extend(repr(float(v)) for v in self.X[t])
            buf.write(",".join(cells) + "\n")
        if buf is not path_or_buf:
            with open(path_or_buf, "w") as fh:
                fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path_or_buf):
        fh = path_or_buf if hasattr(path_or_buf, "read") else open(path_or_buf)
        try:
            header = fh.readline().strip().split(",")
            if header[:2] != ["t", "y"]:
                raise ValueError(f"unexpected dataset header {header!r}")
            p = len(header) - 2
            ys, xs = [], []
            for line in fh:
                parts = line.strip().split(",")
                if not parts or parts == [""]:
                    continue
                ys.append(float(parts[1]))
                xs.append([float(v) for v in parts[2:]])
            return cls(np.array(xs, dtype=np.float64), np.array(ys), p)
        finally:
            if fh is not path_or_buf:
                fh.close()


def make_dataset(path, p, warm_start, source_spec=None):
    """Group a path into lagged pairs, using warm_start for the first p inputs.

    ``warm_start`` is (Y_0, Y_{-1}, ..., Y_{1-p}) — the p values preceding
    path[0], most recent first.
    """
    path = np.asarray(path, dtype=np.float64)
    warm_start = np.asarray(warm_start, dtype=np.float64)
    if warm_start.shape != (p,):
        raise ValueError(f"warm_start must have length p = {p}, got {warm_start.shape}")
    T = path.shape[0]
    if T < 1:
        raise ValueError("path must be nonempty")
    ext = np.concatenate([warm_start[::-1], path])
    X = sliding_window_view(ext, p)[:T, ::-1].copy()
    return Dataset(X, path.copy(), p, source_spec=source_spec)


def simulate_dataset(spec):
    """Simulate a path and assemble its lagged dataset in one step."""
    path, details = simulate(spec, return_details=True)
    return make_dataset(path, spec.f.p, details.warm_start, source_spec=spec)


def stationarity_flag(path):
    """Rough stationarity diagnostic: halves' means should agree.

    Returns True (flagged) when the two half-sample means differ by more
    than 4 * sd / sqrt(T/2); advisory only, never fatal.
    """
    path = np.asarray(path, dtype=np.float64)
    half = len(path) // 2
    a, b = path[:half], path[half: 2 * half]
    tol = 4.0 * path.std() / math.sqrt(half)
    return abs(a.mean() - b.mean()) > tol
