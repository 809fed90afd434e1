"""scikit-learn style wrappers around the two filters.

``fit`` takes the observed signals as an array of shape (n_samples, n_observed),
sampled every ``dt_output`` seconds from the window phase of a steady beat,
and leaves the estimated parameters in ``params_``.

Examples
--------
>>> est = ModifiedUKF(subset="1,4", cycles=50).fit(X)   # doctest: +SKIP
>>> est.params_.to_dict()                                # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.metrics import r2_score
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError
from .model import NOMINAL, InternalState, ObservationSubset, ParameterVector, WINDOW_PHASE
from .solver import SolverConfig, integrate_batch
from .ukf import (
    PARAM_SLICE,
    STATE_SLICE,
    TAU_INDEX,
    FilterSettings,
    FilterTrace,
    run_filter,
)


class _UKFBase(BaseEstimator):
    _kind = "modified"

    def __init__(
        self,
        subset="1,2,3,4",
        cycles=100,
        initial_guess=None,
        alpha=1e-3,
        beta=2.0,
        kappa=0.0,
        r_rel=0.05,
        q_param_rel=1e-3,
        trust_radius=1.0,
        tau_k=1.0,
        window_phase=WINDOW_PHASE,
        dt_output=0.001,
    ):
        self.subset = subset
        self.cycles = cycles
        self.initial_guess = initial_guess
        self.alpha = alpha
        self.beta = beta
        self.kappa = kappa
        self.r_rel = r_rel
        self.q_param_rel = q_param_rel
        self.trust_radius = trust_radius
        self.tau_k = tau_k
        self.window_phase = window_phase
        self.dt_output = dt_output

    def _settings(self) -> FilterSettings:
        return FilterSettings(
            alpha=self.alpha, beta=self.beta, kappa=self.kappa, r_rel=self.r_rel,
            q_param_rel=self.q_param_rel, trust_radius=self.trust_radius, tau_k=self.tau_k,
            window_phase=self.window_phase,
        )

    def _guess(self) -> ParameterVector:
        g = self.initial_guess
        if g is None:
            return NOMINAL
        if isinstance(g, ParameterVector):
            return g
        if isinstance(g, dict):
            return ParameterVector.from_dict(g)
        return ParameterVector.from_array(np.asarray(g, dtype=float))

    def _check_X(self, X, subset):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != len(subset):
            raise DomainError(f"X has {X.shape[1]} columns but subset {subset.label} needs {len(subset)}")
        return X

    def fit(self, X, y=None):
        """Estimate the parameters from observed signals ``X`` of shape (n_samples, |subset|)."""
        subset = ObservationSubset.parse(self.subset)
        X = self._check_X(X, subset)
        solver = SolverConfig(dt_output=self.dt_output)
        if X.shape[0] < solver.steps_for(self.tau_k):
            raise DomainError("X must hold at least one Kalman interval of samples")
        self.subset_ = subset
        self.trace_: FilterTrace = run_filter(self._kind, X, subset, self._settings(), self.cycles,
                                              solver, self._guess())
        self.status_ = self.trace_.status
        self.n_iter_ = len(self.trace_)
        if self.n_iter_ == 0:
            raise DomainError(f"filter stopped before the first interval: {self.trace_.message}")
        final = self.trace_.final
        self.params_ = ParameterVector.from_array(final.mean[PARAM_SLICE])
        self.state_ = InternalState.from_array(final.mean[STATE_SLICE])
        self.covariance_ = final.cov
        self.n_features_in_ = X.shape[1]
        return self

    def simulate(self, n_samples: int) -> np.ndarray:
        """All four signals over ``n_samples`` steps from the fitted end state, shape (n_samples, 4)."""
        check_is_fitted(self, "params_")
        theta = self.params_.to_array()[None, :]
        x = self.state_.to_array()
        y0 = np.array([[x[3], x[1], x[2]]])
        t0 = self.window_phase * theta[0, TAU_INDEX]
        samples, status, fail_t = integrate_batch(theta, y0, int(n_samples), SolverConfig(dt_output=self.dt_output), t0=t0)
        if status[0] != 0:
            raise DomainError(f"simulation from the fitted estimate failed at t={fail_t[0]:.4g}")
        return samples[0, 1:]

    def predict(self, X):
        """Model output for the observed columns, aligned sample-for-sample with ``X``.

        The fitted state sits at the end of an interval, i.e. at the window
        phase, which is where ``X`` starts.
        """
        check_is_fitted(self, "params_")
        X = self._check_X(X, self.subset_)
        return self.simulate(X.shape[0])[:, self.subset_.columns]

    def score(self, X, y=None):
        """Mean R^2 of ``predict(X)`` against ``X`` over the observed signals."""
        X = self._check_X(X, ObservationSubset.parse(self.subset))
        return float(r2_score(X, self.predict(X)))


class ModifiedUKF(_UKFBase):
    """Batch-window UKF: one correction per Kalman interval using every sample in it."""

    _kind = "modified"


class OriginalUKF(_UKFBase):
    """Per-sample UKF baseline. Divergence ends the run and sets ``status_``."""

    _kind = "original"

    def __init__(
        self,
        subset="1,2,3,4",
        cycles=100,
        initial_guess=None,
        alpha=1e-3,
        beta=2.0,
        kappa=0.0,
        r_rel=0.05,
        q_param_rel=1e-3,
        trust_radius=None,
        tau_k=1.0,
        window_phase=WINDOW_PHASE,
        dt_output=0.001,
    ):
        super().__init__(subset, cycles, initial_guess, alpha, beta, kappa, r_rel, q_param_rel,
                         trust_radius, tau_k, window_phase, dt_output)
