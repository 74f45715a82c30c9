"""Mean-zero noise models with exact densities, CDFs, quantiles and sampling.

Two families are shipped, Laplace and Gaussian. Both have a strictly
positive density on all of R, mean zero and finite variance, and both
carry a stored witness ``bernstein_c`` for the moment-growth condition

    E|eps|^m  <=  m! * c^(m-2),    m = 3, 4, ...

(Bernstein's condition, which implies sub-exponential tails). The witness
is metadata: ``bernstein_report`` checks it against closed-form absolute
moments and flags rows where it fails instead of raising.

Sampling is inverse-CDF on uniform draws, one uniform per variate, so a
fixed seed fixes the sampled sequence bit-exactly across platforms.

Tail-ratio note: the Laplace family also satisfies the CDF tail-ratio
condition sup_x F(x+t)/F(x) < inf used by the input-transform diagnostics
in :mod:`nlarforest.oracle` (the ratio is constant on the left tail). The
Gaussian family does not — the ratio diverges as x -> -inf — and the
diagnostics raise :class:`~nlarforest.errors.ModelError` for it.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtri

from ._validation import check_positive_real
from .errors import ConfigurationError

__all__ = ["NoiseModel", "laplace", "gaussian", "bernstein_report", "BernsteinRow"]

LAPLACE = "laplace"
GAUSSIAN = "gaussian"

# Smallest uniform admitted by inverse-CDF sampling; rng.random() can return
# exactly 0.0, which the quantile functions must never see.
_U_FLOOR = 2.0 ** -53


def _default_bernstein_c(kind, scale):
    # Documented witnesses: exact for Laplace(b<=1) via E|eps|^m = m! b^m,
    # and for Gaussian via E|eps|^m = sigma^m 2^(m/2) Gamma((m+1)/2)/sqrt(pi).
    if kind == LAPLACE:
        return scale
    return 2.0 * scale


@dataclass(frozen=True)
class NoiseModel:
    """A mean-zero noise law given by family ``kind`` and a scale parameter.

    Parameters
    ----------
    kind : {"laplace", "gaussian"}
        Distribution family. ``scale`` is the Laplace scale b (variance
        2*b**2) or the Gaussian standard deviation sigma (variance sigma**2).
    scale : float
        Strictly positive scale parameter.
    bernstein_c : float, optional
        Stored witness for the moment-growth condition. Defaults to b for
        Laplace and 2*sigma for Gaussian.
    """

    kind: str
    scale: float
    bernstein_c: float = None

    def __post_init__(self):
        if self.kind not in (LAPLACE, GAUSSIAN):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "scale", check_positive_real("scale", self.scale))
        c = self.bernstein_c
        if c is None:
            c = _default_bernstein_c(self.kind, self.scale)
        object.__setattr__(self, "bernstein_c", check_positive_real("bernstein_c", c))

    @property
    def variance(self):
        if self.kind == LAPLACE:
            return 2.0 * self.scale**2
        return self.scale**2

    def density(self, x):
        """Probability density at ``x`` (scalar or array)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == LAPLACE:
            out = np.exp(-np.abs(x) / self.scale) / (2.0 * self.scale)
        else:
            out = np.exp(-0.5 * (x / self.scale) ** 2) / (self.scale * math.sqrt(2.0 * math.pi))
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        """Cumulative distribution function at ``x`` (scalar or array)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == LAPLACE:
            z = x / self.scale
            out = np.empty_like(z, dtype=np.float64) if z.ndim else None
            neg = z <= 0.0
            if z.ndim == 0:
                out = 0.5 * math.exp(z) if neg else 1.0 - 0.5 * math.exp(-z)
                return float(out)
            out[neg] = 0.5 * np.exp(z[neg])
            out[~neg] = 1.0 - 0.5 * np.exp(-z[~neg])
            return out
        # erfc keeps full precision in the left tail, where 1 - Phi(-x) cancels
        out = 0.5 * erfc(-x / (self.scale * math.sqrt(2.0)))
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, u):
        """Inverse CDF: the unique x with cdf(x) = u, for u in (0, 1)."""
        u_arr = np.asarray(u, dtype=np.float64)
        if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
            raise ValueError("quantile argument must lie strictly inside (0, 1)")
        if self.kind == LAPLACE:
            lower = u_arr <= 0.5
            if u_arr.ndim == 0:
                if lower:
                    return float(self.scale * math.log(2.0 * float(u_arr)))
                return float(-self.scale * math.log(2.0 * (1.0 - float(u_arr))))
            out = np.empty_like(u_arr)
            out[lower] = self.scale * np.log(2.0 * u_arr[lower])
            out[~lower] = -self.scale * np.log(2.0 * (1.0 - u_arr[~lower]))
            return out
        out = self.scale * ndtri(u_arr)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng, size=None):
        """Draw i.i.d. variates via inverse-CDF on ``rng`` uniforms.

        Consumes exactly one uniform per variate, in order, so the draw
        sequence is a pure function of the generator state.
        """
        u = rng.random() if size is None else rng.random(size)
        u = np.maximum(u, _U_FLOOR)
        return self.quantile(u)

    def abs_moment(self, m):
        """Closed-form absolute moment E|eps|^m for integer m >= 1."""
        if m < 1:
            raise ValueError("moment order must be >= 1")
        if self.kind == LAPLACE:
            return math.factorial(m) * self.scale**m
        return (
            self.scale**m * 2.0 ** (m / 2.0) * math.gamma((m + 1) / 2.0) / math.sqrt(math.pi)
        )


def laplace(scale=1.0, bernstein_c=None):
    """Laplace noise with density exp(-|x|/b) / (2b)."""
    return NoiseModel(LAPLACE, scale, bernstein_c)


def gaussian(scale=1.0, bernstein_c=None):
    """Gaussian noise with standard deviation ``scale``."""
    return NoiseModel(GAUSSIAN, scale, bernstein_c)


@dataclass(frozen=True)
class BernsteinRow:
    m: int
    abs_moment: float
    bound: float

    @property
    def ok(self):
        return self.abs_moment <= self.bound


def bernstein_report(model, m_max):
    """Tabulate E|eps|^m against m! * c^(m-2) for m = 3..m_max.

    Rows where the stored witness fails are flagged (``ok`` False), not
    raised: the witness is descriptive metadata, not a precondition.
    ``m_max`` is capped at 20; factorial growth makes larger orders
    numerically meaningless at float64 precision.
    """
    if not 3 <= m_max <= 20:
        raise ConfigurationError(f"m_max must lie in [3, 20], got {m_max!r}")
    rows = []
    for m in range(3, m_max + 1):
        bound = math.factorial(m) * model.bernstein_c ** (m - 2)
        rows.append(BernsteinRow(m, model.abs_moment(m), bound))
    return rows
