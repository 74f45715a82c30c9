"""Random-forest regression for nonlinear autoregressive time series.

Simulate order-p autoregressive processes driven by Laplace or Gaussian
noise, fit full-sample forests whose trees obey explicit minimum-leaf-size
and balance rules, score fitted leaves against Monte-Carlo estimates of
their true conditional means, and reproduce the accompanying simulation
experiments from the command line.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    EstimationError,
    ModelError,
    NlarForestError,
    SimulationError,
)
from .noise import NoiseModel, bernstein_report, gaussian, laplace
from .nlar import (
    Dataset,
    RegressionFunction,
    SimulationSpec,
    builtin_function,
    make_dataset,
    probe_bound,
    simulate,
    simulate_dataset,
    zero_function,
)
from .partition import (
    Node,
    Split,
    Tree,
    apply_batch,
    deserialize_tree,
    leaf_of,
    serialize_tree,
    validate_akm,
    validate_k_valid,
)
from .tree_builder import (
    EXTRATREES,
    VARIANCE_REDUCTION,
    BuildConfig,
    admissible_interval,
    choose_split,
    grow_tree,
)
from .forest import (
    Forest,
    fit_forest,
    forest_predict,
    forest_predict_batch,
    load_forest,
    save_forest,
    tree_predict,
)
from .estimator import NLARForestRegressor
from .oracle import (
    DeviationReport,
    LeafReport,
    OracleConfig,
    concentration_study,
    density_bound_check,
    leaf_deviation_report,
    mixture_density,
    oracle_tree_value,
    transform_inputs,
    zeta_bar,
)
from .experiments import ExperimentConfig, k_schedule, run_experiment

__all__ = [
    "__version__",
    "BuildConfig",
    "ConfigurationError",
    "Dataset",
    "DeviationReport",
    "EstimationError",
    "ExperimentConfig",
    "EXTRATREES",
    "Forest",
    "LeafReport",
    "ModelError",
    "NLARForestRegressor",
    "NlarForestError",
    "Node",
    "NoiseModel",
    "OracleConfig",
    "RegressionFunction",
    "SimulationError",
    "SimulationSpec",
    "Split",
    "Tree",
    "VARIANCE_REDUCTION",
    "admissible_interval",
    "apply_batch",
    "bernstein_report",
    "builtin_function",
    "choose_split",
    "concentration_study",
    "density_bound_check",
    "deserialize_tree",
    "fit_forest",
    "forest_predict",
    "forest_predict_batch",
    "gaussian",
    "grow_tree",
    "k_schedule",
    "laplace",
    "leaf_deviation_report",
    "leaf_of",
    "load_forest",
    "make_dataset",
    "mixture_density",
    "oracle_tree_value",
    "probe_bound",
    "run_experiment",
    "save_forest",
    "serialize_tree",
    "simulate",
    "simulate_dataset",
    "transform_inputs",
    "tree_predict",
    "validate_akm",
    "validate_k_valid",
    "zero_function",
    "zeta_bar",
]
