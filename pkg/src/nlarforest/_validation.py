"""Small input-validation helpers used across modules."""

import numpy as np

from .errors import ConfigurationError


def check_positive_int(name, value):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_nonneg_int(name, value):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 0:
        raise ConfigurationError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_positive_real(name, value):
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ConfigurationError(f"{name} must be a positive finite real, got {value!r}")
    return value


def check_open_fraction(name, value, high=0.5):
    """Require value in the open interval (0, high)."""
    value = float(value)
    if not (0.0 < value < high):
        raise ConfigurationError(f"{name} must lie in (0, {high}), got {value!r}")
    return value


def check_rho(rho, p):
    """Validate split-direction probabilities: length p, all > 0, sum 1."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (p,):
        raise ConfigurationError(f"rho must have length {p}, got shape {rho.shape}")
    if not np.all(rho > 0.0):
        raise ConfigurationError("every entry of rho must be strictly positive")
    if abs(rho.sum() - 1.0) > 1e-9:
        raise ConfigurationError(f"rho must sum to 1, got sum {rho.sum()!r}")
    return rho / rho.sum()


def as_point(x, p):
    """Coerce a single query point to a finite float vector of length p."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (p,):
        raise ValueError(f"query point must have dimension {p}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("query point must have finite coordinates")
    return x


def as_point_matrix(xs, p):
    """Coerce a batch of query points to an (n, p) float matrix."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        if p == 1:
            xs = xs.reshape(-1, 1)
        else:
            xs = xs.reshape(1, -1)
    if xs.ndim != 2 or xs.shape[1] != p:
        raise ValueError(f"query matrix must have {p} columns, got shape {xs.shape}")
    return xs
