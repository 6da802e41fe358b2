"""Nonlinear Bayesian update for ensemble data assimilation and inversion.

The core entry points are :func:`nlbu_update` (the nonlinear update) and
:func:`eakf_update` (the linear baseline); the ``harness`` module drives full
twin experiments and the Darcy inversion.
"""

from .config import ExperimentConfig, load_config, preset
from .darcy import PermeabilityParams, darcy_forward, solve_pressure
from .dynamics import OdeModel, lorenz63, lorenz96, propagate_ensemble, rk4_step
from .eki import EkiProblem, EkiTrace, augment, run_eki
from .ensemble import (Ensemble, Moments, StatePartition, ensemble_moments,
                       perturbed_constant_ensemble, split_uv)
from .errors import (DegenerateWeightsError, DivergenceError, InsufficientEnsembleError,
                     NumericalError, UnsupportedConfigurationError)
from .gaussian import (GaussianPosterior, Localization, MeasurementModel, conditional_gaussian,
                       eakf_update, gaspari_cohn_taper, kalman_posterior_moments)
from .harness import (ExperimentRecord, parse_range, run_eki_experiment, run_twin_experiment,
                      sweep_inflation)
from .kde import KdeModel, conditional_weights, nadaraya_watson, sample_conditional, scott_bandwidth
from .locality import (ClusterResult, SubsampleResult, cluster_threshold, mahalanobis_distance,
                       single_linkage_flat_clusters, subsample)
from .update import NlbuConfig, UpdateOutcome, build_posterior_u_ensemble, nlbu_update

__version__ = "0.1.0"

__all__ = [
    "ClusterResult", "DegenerateWeightsError", "DivergenceError", "EkiProblem", "EkiTrace",
    "Ensemble", "ExperimentConfig", "ExperimentRecord", "GaussianPosterior",
    "InsufficientEnsembleError", "KdeModel", "Localization", "MeasurementModel", "Moments",
    "NlbuConfig", "NumericalError", "OdeModel", "PermeabilityParams", "StatePartition",
    "SubsampleResult", "UnsupportedConfigurationError", "UpdateOutcome", "augment",
    "build_posterior_u_ensemble", "cluster_threshold", "conditional_gaussian",
    "conditional_weights", "darcy_forward", "eakf_update", "ensemble_moments",
    "gaspari_cohn_taper", "kalman_posterior_moments", "load_config", "lorenz63", "lorenz96",
    "mahalanobis_distance", "nadaraya_watson", "nlbu_update", "parse_range",
    "perturbed_constant_ensemble", "preset", "propagate_ensemble", "rk4_step", "run_eki",
    "run_eki_experiment", "run_twin_experiment", "sample_conditional", "scott_bandwidth",
    "single_linkage_flat_clusters", "solve_pressure", "split_uv", "subsample", "sweep_inflation",
]
