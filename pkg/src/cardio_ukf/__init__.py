"""Joint state and parameter estimation for a lumped cardiovascular model.

A single-ventricle circulation with a time-varying elastance, a fixed-step
RK4 integrator, a batch-window unscented Kalman filter with the per-sample
filter as a baseline, a synthetic target generator and the ensemble
experiment harness.
"""

from .estimators import ModifiedUKF, OriginalUKF
from .exceptions import CardioUKFError
from .model import NOMINAL, PARAM_NAMES, STATE_NAMES, ClinicalMetrics, InternalState, ObservationSubset, ParameterVector
from .solver import SolverConfig, integrate, run_to_steady_state
from .ukf import FilterSettings, run_modified_ukf, run_original_ukf

__version__ = "0.1.0"

__all__ = [
    "CardioUKFError",
    "ClinicalMetrics",
    "FilterSettings",
    "InternalState",
    "ModifiedUKF",
    "NOMINAL",
    "ObservationSubset",
    "OriginalUKF",
    "PARAM_NAMES",
    "ParameterVector",
    "STATE_NAMES",
    "SolverConfig",
    "integrate",
    "run_modified_ukf",
    "run_original_ukf",
    "run_to_steady_state",
]
