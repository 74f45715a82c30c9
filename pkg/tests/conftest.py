import numpy as np
import pytest

from nlarforest import (
    BuildConfig,
    SimulationSpec,
    builtin_function,
    fit_forest,
    laplace,
    simulate_dataset,
)


@pytest.fixture(scope="session")
def laplace1():
    return laplace(1.0)


@pytest.fixture(scope="session")
def f1():
    return builtin_function("f1_clipped_linear")


@pytest.fixture(scope="session")
def f3():
    return builtin_function("f3_cosine")


@pytest.fixture(scope="session")
def f3_data_400(f3, laplace1):
    """A small fitted-size dataset reused across structural tests."""
    return simulate_dataset(SimulationSpec(f3, laplace1, T=400, seed=5))


@pytest.fixture(scope="session")
def small_forest(f3_data_400):
    return fit_forest(f3_data_400, BuildConfig(k=40, seed=3), B=20, master_seed=3)


def ks_distance(samples, cdf):
    """Kolmogorov-Smirnov distance between a sample and a CDF."""
    xs = np.sort(np.asarray(samples))
    n = xs.shape[0]
    F = cdf(xs)
    i = np.arange(1, n + 1)
    return max(float(np.max(F - (i - 1) / n)), float(np.max(i / n - F)))
