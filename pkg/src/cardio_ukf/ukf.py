"""Sigma-point machinery and the two joint state/parameter filters.

``run_modified_ukf`` treats a whole Kalman interval of samples as one filter
step: every sigma point is integrated across the interval and its full sampled
output forms one long observation vector. ``run_original_ukf`` is the classic
per-sample filter kept as a baseline.

The augmented vector is ``[p_lv, p_sa, p_sv, V_lv, tau_es, ..., tau]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _kernels
from .exceptions import (
    CovarianceNotPSD,
    DomainError,
    FilterFailed,
    InnovationNotPSD,
    SigmaPropagationFailed,
)
from .model import (
    N_PARAMS,
    N_STATES,
    NOMINAL,
    PARAM_NAMES,
    STATE_NAMES,
    V0,
    WINDOW_PHASE,
    InternalState,
    ObservationSubset,
    ParameterVector,
)
from .solver import SolverConfig, integrate_batch, steady_state_at

L_AUG = N_STATES + N_PARAMS
AUG_NAMES = STATE_NAMES + PARAM_NAMES
STATE_SLICE = slice(0, N_STATES)
PARAM_SLICE = slice(N_STATES, L_AUG)
TAU_INDEX = PARAM_NAMES.index("tau")


@dataclass(frozen=True)
class UtParams:
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")

    def lam(self, L: int) -> float:
        lam = self.alpha**2 * (L + self.kappa) - L
        if L + lam == 0:
            raise DomainError("L + lambda must be non-zero")
        return lam

    def weights(self, L: int) -> tuple[np.ndarray, np.ndarray]:
        lam = self.lam(L)
        w_mean = np.full(2 * L + 1, 1.0 / (2.0 * (L + lam)))
        w_cov = w_mean.copy()
        w_mean[0] = lam / (L + lam)
        w_cov[0] = lam / (L + lam) + (1.0 - self.alpha**2 + self.beta)
        return w_mean, w_cov


@dataclass(frozen=True)
class NoiseConfig:
    r_rel: float = 0.05
    q_param_rel: float = 1e-3
    jitter: float = 0.0
    # None disables the step limit
    trust_radius: float | None = 1.0

    def __post_init__(self):
        for name in ("r_rel", "q_param_rel", "jitter"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0")
        if self.trust_radius is not None and not self.trust_radius > 0:
            raise DomainError("trust_radius must be > 0 or None")


@dataclass
class AugmentedEstimate:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        L = self.mean.shape[0]
        if self.mean.ndim != 1 or self.cov.shape != (L, L):
            raise DomainError(f"mean {self.mean.shape} and cov {self.cov.shape} do not match")
        if not np.all(np.isfinite(self.mean)):
            raise DomainError("estimate mean is not finite")

    @property
    def params(self) -> np.ndarray:
        return self.mean[PARAM_SLICE]

    @property
    def state(self) -> np.ndarray:
        return self.mean[STATE_SLICE]

    def parameter_vector(self) -> ParameterVector:
        return ParameterVector.from_array(self.params)


@dataclass
class SigmaPointSet:
    points: np.ndarray
    w_mean: np.ndarray
    w_cov: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class TraceEntry:
    iteration: int
    mean: np.ndarray
    cov: np.ndarray
    innovation_norm: float

    def to_record(self) -> dict:
        return {
            "iter": self.iteration,
            "mean": [float(v) for v in self.mean],
            "cov_diag": [float(v) for v in np.diag(self.cov)],
            "innovation_norm": float(self.innovation_norm),
        }


@dataclass
class FilterTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    status: str = "Converged"
    message: str = ""

    def append(self, iteration, est: AugmentedEstimate, innovation_norm: float) -> None:
        self.entries.append(TraceEntry(iteration, est.mean.copy(), est.cov.copy(), float(innovation_norm)))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def final(self) -> TraceEntry:
        return self.entries[-1]

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.entries])

    @property
    def cov_diags(self) -> np.ndarray:
        return np.array([np.diag(e.cov) for e in self.entries])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_record()) + "\n" for e in self.entries)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_records(cls, records, status="Converged", message="") -> "FilterTrace":
        trace = cls(status=status, message=message)
        for r in records:
            trace.entries.append(
                TraceEntry(int(r["iter"]), np.array(r["mean"]), np.diag(r["cov_diag"]), float(r["innovation_norm"]))
            )
        return trace


def psd_cholesky(cov: np.ndarray, jitter: float = 0.0, escalations: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Symmetrize ``cov`` and return ``(repaired_cov, lower_factor)``.

    The factorization runs on the correlation-scaled matrix so the repair ladder
    is scale free: jitter ``1e-12`` is added to the correlation diagonal and
    multiplied by 10 up to ``escalations`` times. ``jitter`` is an absolute
    floor added to every variance before scaling.
    """
    cov = 0.5 * (cov + cov.T)
    if jitter > 0:
        cov = cov + jitter * np.eye(cov.shape[0])
    d = np.diag(cov)
    if not np.all(np.isfinite(cov)) or np.any(d <= 0):
        raise CovarianceNotPSD("covariance has non-finite or non-positive variances")
    s = np.sqrt(d)
    corr = cov / np.outer(s, s)
    eps = 0.0
    for attempt in range(escalations + 2):
        try:
            lc = np.linalg.cholesky(corr + eps * np.eye(len(s)))
        except np.linalg.LinAlgError:
            eps = 1e-12 if eps == 0.0 else eps * 10.0
            continue
        if eps > 0:
            cov = cov + eps * np.diag(d)
        return cov, lc * s[:, None]
    raise CovarianceNotPSD(f"Cholesky failed after jitter escalation to {eps:.1e}")


def sigma_points(est: AugmentedEstimate, ut: UtParams = UtParams(), jitter: float = 0.0) -> SigmaPointSet:
    """2L+1 sigma points around ``est`` with the scaled-UT weights."""
    L = est.mean.shape[0]
    lam = ut.lam(L)
    _, chol = psd_cholesky((L + lam) * est.cov, jitter=(L + lam) * jitter)
    points = np.empty((2 * L + 1, L))
    points[0] = est.mean
    points[1 : L + 1] = est.mean + chol.T
    points[L + 1 :] = est.mean - chol.T
    w_mean, w_cov = ut.weights(L)
    return SigmaPointSet(points, w_mean, w_cov)


def _centered(points: np.ndarray, w_mean: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # deviations are taken from point 0 first; this avoids cancellation when
    # the mean weight of point 0 is large and negative (small alpha)
    D = points - points[0]
    d = w_mean @ D
    return points[0] + d, D - d


def unscented_moments(points, w_mean, w_cov) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=float)
    if points.shape[0] != len(w_mean) or len(w_mean) != len(w_cov):
        raise DomainError("point count and weight counts differ")
    mean, E = _centered(points, w_mean)
    cov = (E.T * w_cov) @ E
    return mean, 0.5 * (cov + cov.T)


def decode_points(points: np.ndarray, nominal: ParameterVector = NOMINAL) -> tuple[np.ndarray, np.ndarray]:
    """Map augmented vectors to integrable ``(theta, y0)`` arrays.

    Parameters are clamped to ``[1e-6, 10 * nominal]``, inverted timing
    fractions are pushed apart, and ventricular volume is kept at >= 1 mL.
    """
    points = np.atleast_2d(points)
    hi = 10.0 * nominal.to_array()
    theta = np.clip(points[:, PARAM_SLICE], 1e-6, hi)
    bad = theta[:, 0] >= theta[:, 1]
    if np.any(bad):
        mid = 0.5 * (theta[bad, 0] + theta[bad, 1])
        theta[bad, 0] = mid - 1e-4
        theta[bad, 1] = mid + 1e-4
        theta[:, 0] = np.maximum(theta[:, 0], 1e-6)
    y0 = np.column_stack([np.maximum(points[:, 3], 1.0), points[:, 1], points[:, 2]])
    return theta, y0


def _windows_from(samples: np.ndarray, columns: list[int]) -> np.ndarray:
    # (n, s, 4) -> (n, |subset| * s), signal-major
    return np.ascontiguousarray(samples[:, :, columns].transpose(0, 2, 1)).reshape(samples.shape[0], -1)


def propagate_interval(
    sp: SigmaPointSet,
    subset: ObservationSubset,
    tau_k: float,
    solver: SolverConfig = SolverConfig(),
    nominal: ParameterVector = NOMINAL,
    phase: float = 0.0,
    v0: float = V0,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate each sigma point over one Kalman interval.

    Every point starts at the same fraction ``phase`` of its own heart cycle,
    i.e. at model time ``phase * tau_i``.

    Returns ``X_pred`` (n, L): end-of-interval states with the parameters
    carried through unchanged, and ``Y_pred`` (n, a): the sampled outputs at
    ``dt, 2 dt, ..., tau_k`` flattened signal-major.
    """
    subset = ObservationSubset.parse(subset)
    s = solver.steps_for(tau_k)
    theta, y0 = decode_points(sp.points, nominal)
    samples, status, fail_t = integrate_batch(theta, y0, s, solver, t0=phase * theta[:, TAU_INDEX], v0=v0)
    failed = np.flatnonzero(status != _kernels.OK)
    if failed.size:
        i = int(failed[0])
        raise SigmaPropagationFailed(
            f"sigma point {i} failed (status {int(status[i])}) at t={fail_t[i]:.4g}", index=i
        )
    X_pred = sp.points.copy()
    X_pred[:, STATE_SLICE] = samples[:, -1, :]
    Y_pred = _windows_from(samples[:, 1:, :], subset.columns)
    return X_pred, Y_pred


def _factor(P_yy: np.ndarray, overwrite: bool):
    try:
        c = linalg.cho_factor(P_yy, lower=True, overwrite_a=overwrite, check_finite=False)
    except linalg.LinAlgError as exc:
        raise InnovationNotPSD(f"innovation covariance is not positive definite: {exc}") from None
    if not np.all(np.isfinite(c[0].diagonal())):
        raise InnovationNotPSD("innovation covariance factor is not finite")
    return c


def kalman_gain(P_xy: np.ndarray, P_yy: np.ndarray, overwrite: bool = False) -> np.ndarray:
    """Solve ``K @ P_yy = P_xy`` through a Cholesky factorization of ``P_yy``."""
    return linalg.cho_solve(_factor(P_yy, overwrite), P_xy.T, check_finite=False).T


def trust_region_scale(Ex, Ey, w_cov, R, innovation, P, radius, max_scale=1e8):
    """Smallest ``s >= 1`` such that the update computed with ``s * R`` moves the
    mean at most ``radius`` prior standard deviations (Mahalanobis length).

    ``P_yy(s) = Ey^T W Ey + s R`` is low rank plus diagonal, so after whitening
    by ``R`` a thin QR and a small eigendecomposition give the step for any
    ``s`` in O(a n^2).
    """
    sr = np.sqrt(R)
    G = Ey / sr  # (n, a)
    Q, T = np.linalg.qr(G.T)  # G^T = Q T
    M = (T * w_cov) @ T.T
    M = 0.5 * (M + M.T)
    mu, V = np.linalg.eigh(M)
    z = V.T @ (Q.T @ (innovation / sr))
    A = (Ex.T * w_cov) @ T.T @ V  # (L, n)
    Pc = linalg.cho_factor(P + 1e-12 * np.trace(P) / len(P) * np.eye(len(P)), lower=True)

    def length(s):
        dx = A @ (z / (mu + s))
        return float(np.sqrt(dx @ linalg.cho_solve(Pc, dx)))

    if length(1.0) <= radius:
        return 1.0
    lo, hi = 1.0, 2.0
    while length(hi) > radius:
        lo, hi = hi, hi * 4.0
        if hi > max_scale:
            return max_scale
    for _ in range(40):
        mid = np.sqrt(lo * hi)
        if length(mid) > radius:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.01:
            break
    return hi


@dataclass
class Correction:
    estimate: AugmentedEstimate
    gain: np.ndarray
    innovation: np.ndarray
    P_xy: np.ndarray
    r_scale: float = 1.0


def correct(
    x_pred: AugmentedEstimate,
    X_pred: np.ndarray,
    Y_pred: np.ndarray,
    y_obs: np.ndarray,
    R: np.ndarray,
    w_mean: np.ndarray,
    w_cov: np.ndarray,
    jitter: float = 0.0,
    details: bool = False,
    trust_radius: float | None = None,
):
    """Kalman measurement update from propagated sigma points.

    ``R`` is the measurement-noise diagonal (1-D) or a diagonal matrix. With
    ``trust_radius`` set, ``R`` is scaled up just enough that the mean moves
    at most that many prior standard deviations; far from the data this
    turns a Gauss-Newton jump into a damped step, near it the scale is 1.
    """
    Y_pred = np.asarray(Y_pred, dtype=float)
    y_obs = np.asarray(getattr(y_obs, "values", y_obs), dtype=float)
    R = np.asarray(R, dtype=float)
    if R.ndim == 2:
        R = np.diag(R)
    a = Y_pred.shape[1]
    if y_obs.shape != (a,) or R.shape != (a,):
        raise DomainError(f"observation size mismatch: Y_pred {Y_pred.shape}, y {y_obs.shape}, R {R.shape}")
    if np.any(R <= 0):
        raise DomainError("R diagonal must be positive")
    _, Ex = _centered(np.asarray(X_pred, dtype=float), w_mean)
    y_hat, Ey = _centered(Y_pred, w_mean)
    WEy = Ey.T * w_cov
    P_xy = (Ex.T * w_cov) @ Ey
    P_yy = WEy @ Ey
    P_yy[np.diag_indices(a)] += R
    del WEy
    innovation = y_obs - y_hat
    scale = 1.0
    if trust_radius is not None and np.isfinite(trust_radius):
        scale = trust_region_scale(Ex, Ey, w_cov, R, innovation, x_pred.cov, trust_radius)
        if scale > 1.0:
            P_yy[np.diag_indices(a)] += (scale - 1.0) * R
    c = _factor(P_yy, overwrite=True)
    K = linalg.cho_solve(c, P_xy.T, check_finite=False).T
    mean = x_pred.mean + K @ innovation
    # K P_yy K^T == P_xy K^T because K P_yy = P_xy
    cov, _ = psd_cholesky(x_pred.cov - P_xy @ K.T, jitter=jitter)
    est = AugmentedEstimate(mean, cov)
    if details:
        return Correction(est, K, innovation, P_xy, scale)
    return est


def measurement_noise(first_window: np.ndarray, n_signals: int, r_rel: float) -> np.ndarray:
    """Diagonal R: ``(r_rel * mean|signal|)**2`` repeated over each signal's samples."""
    w = np.asarray(first_window, dtype=float).reshape(n_signals, -1)
    scale = np.abs(w).mean(axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    return np.repeat((r_rel * scale) ** 2, w.shape[1])


def initial_estimate(
    theta_guess: ParameterVector,
    state_guess: InternalState,
    p0_param_rel: float = 0.2,
    p0_state_rel: float = 0.05,
    p0_state_floor: float = 1.0,
) -> AugmentedEstimate:
    theta = theta_guess.to_array()
    x = state_guess.to_array()
    var_state = np.maximum((p0_state_rel * x) ** 2, p0_state_floor)
    var_param = (p0_param_rel * theta) ** 2
    return AugmentedEstimate(np.concatenate([x, theta]), np.diag(np.concatenate([var_state, var_param])))


def add_parameter_noise(est: AugmentedEstimate, q_rel: float, scale: float = 1.0) -> AugmentedEstimate:
    if q_rel == 0:
        return est
    cov = est.cov.copy()
    idx = np.arange(N_STATES, L_AUG)
    cov[idx, idx] += scale * (q_rel * est.params) ** 2
    return AugmentedEstimate(est.mean, cov)


class ObservationStream:
    """Cyclic source of observation windows from a (N, |subset|) signal array.

    Row ``j`` is the sample at time ``(j + 1) * dt``; window ``k`` holds rows
    ``k*s .. (k+1)*s - 1`` modulo ``N``.
    """

    def __init__(self, signals: np.ndarray, subset: ObservationSubset, samples_per_window: int):
        signals = np.asarray(signals, dtype=float)
        if signals.ndim == 1:
            signals = signals[:, None]
        subset = ObservationSubset.parse(subset)
        if signals.shape[1] != len(subset):
            raise DomainError(f"signals have {signals.shape[1]} columns for subset {subset}")
        if signals.shape[0] < samples_per_window or signals.shape[0] % samples_per_window:
            raise DomainError(
                f"signal length {signals.shape[0]} is not a positive multiple of {samples_per_window}"
            )
        if not np.all(np.isfinite(signals)):
            raise DomainError("observation signals must be finite")
        self.signals = signals
        self.subset = subset
        self.s = samples_per_window
        self.n_windows = signals.shape[0] // samples_per_window

    def window(self, k: int) -> np.ndarray:
        k = k % self.n_windows
        return self.signals[k * self.s : (k + 1) * self.s].T.ravel()

    def sample(self, j: int) -> np.ndarray:
        return self.signals[j % self.signals.shape[0]]


def run_modified_ukf(
    signals: np.ndarray,
    init: AugmentedEstimate,
    ut: UtParams = UtParams(),
    noise: NoiseConfig = NoiseConfig(),
    tau_k: float = 1.0,
    cycles: int = 100,
    subset=(1, 2, 3, 4),
    solver: SolverConfig = SolverConfig(),
    nominal: ParameterVector = NOMINAL,
    phase: float = WINDOW_PHASE,
    callback=None,
) -> FilterTrace:
    """Batch-interval UKF: one correction per Kalman interval of ``tau_k`` seconds.

    Each iteration draws sigma points from the current estimate, integrates
    them across the interval, forms the predicted moments, corrects against the
    next observed window and adds parameter process noise. The state block
    carried into the next interval is the corrected end-of-interval state.
    Each interval starts at cycle fraction ``phase`` (late diastole by default),
    which must match where the observed windows begin. Starting mid-diastole
    puts a contraction onset inside every window, so a period error shows up
    as an onset shift whichever way it points.
    Failures raise ``FilterFailed`` holding the partial trace.
    """
    subset = ObservationSubset.parse(subset)
    stream = ObservationStream(signals, subset, solver.steps_for(tau_k))
    R = measurement_noise(stream.window(0), len(subset), noise.r_rel)
    trace = FilterTrace()
    est = init
    for k in range(cycles):
        try:
            sp = sigma_points(est, ut, jitter=noise.jitter)
            X_pred, Y_pred = propagate_interval(sp, subset, tau_k, solver, nominal, phase=phase)
            prior = AugmentedEstimate(*unscented_moments(X_pred, sp.w_mean, sp.w_cov))
            res = correct(prior, X_pred, Y_pred, stream.window(k), R, sp.w_mean, sp.w_cov,
                          jitter=noise.jitter, details=True, trust_radius=noise.trust_radius)
            est = add_parameter_noise(res.estimate, noise.q_param_rel)
        except (SigmaPropagationFailed, CovarianceNotPSD, InnovationNotPSD, DomainError) as exc:
            trace.status = "Failed"
            trace.message = f"iteration {k}: {exc}"
            raise FilterFailed(trace.message, trace, exc) from exc
        trace.append(k + 1, est, float(np.linalg.norm(res.innovation)))
        if callback is not None:
            callback(k + 1, est)
    return trace


def run_original_ukf(
    signals: np.ndarray,
    init: AugmentedEstimate,
    ut: UtParams = UtParams(),
    noise: NoiseConfig = NoiseConfig(),
    cycles: int = 100,
    subset=(1, 2, 3, 4),
    solver: SolverConfig = SolverConfig(),
    nominal: ParameterVector = NOMINAL,
    tau_k: float = 1.0,
    divergence_bound: float = 1e6,
    phase: float = WINDOW_PHASE,
) -> FilterTrace:
    """Classic UKF correcting at every sample with an ``|subset|``-dimensional observation.

    Parameter process noise is spread over the samples of each interval so
    the variance injected per second matches the batch filter. The trace keeps
    one entry per ``tau_k`` of data. Divergence (non-finite values, failed
    propagation or a parameter variance above ``divergence_bound`` times its
    initial value) ends the run with status ``"Diverged"`` instead of raising.
    The cycle clock follows the same per-interval convention as the batch
    filter. This is the textbook update: ``noise.trust_radius`` is ignored.
    """
    subset = ObservationSubset.parse(subset)
    s = solver.steps_for(tau_k)
    stream = ObservationStream(signals, subset, s)
    R = measurement_noise(stream.window(0), len(subset), noise.r_rel).reshape(len(subset), -1)[:, 0]
    cols = subset.columns
    var0 = np.diag(init.cov)[PARAM_SLICE].copy()
    trace = FilterTrace()
    est = init
    step_cfg = solver
    innov_sq = 0.0
    for j in range(cycles * s):
        try:
            sp = sigma_points(est, ut, jitter=noise.jitter)
            theta, y0 = decode_points(sp.points, nominal)
            samples, status, fail_t = integrate_batch(
                theta, y0, 1, step_cfg, t0=phase * theta[:, TAU_INDEX] + (j % s) * solver.dt_output
            )
            if np.any(status != _kernels.OK):
                raise SigmaPropagationFailed("sigma point propagation failed", int(np.argmax(status != 0)))
            X_pred = sp.points.copy()
            X_pred[:, STATE_SLICE] = samples[:, -1, :]
            Y_pred = samples[:, -1, cols]
            prior = AugmentedEstimate(*unscented_moments(X_pred, sp.w_mean, sp.w_cov))
            res = correct(prior, X_pred, Y_pred, stream.sample(j), R, sp.w_mean, sp.w_cov,
                          jitter=noise.jitter, details=True, trust_radius=None)
            est = add_parameter_noise(res.estimate, noise.q_param_rel, scale=1.0 / s)
            var = np.diag(est.cov)[PARAM_SLICE]
            if not np.all(np.isfinite(est.cov)) or np.any(var > divergence_bound * var0):
                raise FloatingPointError("covariance blow-up")
        except (SigmaPropagationFailed, CovarianceNotPSD, InnovationNotPSD, DomainError,
                FloatingPointError) as exc:
            trace.status = "Diverged"
            trace.message = f"step {j}: {exc}"
            return trace
        innov_sq += float(res.innovation @ res.innovation)
        if (j + 1) % s == 0:
            trace.append((j + 1) // s, est, math.sqrt(innov_sq))
            innov_sq = 0.0
    return trace


@dataclass(frozen=True)
class FilterSettings:
    """Everything either filter needs besides the data, in one flat record."""

    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    r_rel: float = 0.05
    q_param_rel: float = 1e-3
    jitter: float = 0.0
    trust_radius: float | None = 1.0
    tau_k: float = 1.0
    window_phase: float = WINDOW_PHASE
    p0_param_rel: float = 0.2
    p0_state_rel: float = 0.05
    p0_state_floor: float = 1.0
    divergence_bound: float = 1e6

    def __post_init__(self):
        # constructing these runs their checks
        self.ut
        self.noise
        if not self.tau_k > 0:
            raise DomainError(f"tau_k must be > 0, got {self.tau_k}")
        if not 0 <= self.window_phase < 1:
            raise DomainError(f"window_phase must lie in [0, 1), got {self.window_phase}")
        for name in ("p0_param_rel", "p0_state_rel", "p0_state_floor", "divergence_bound"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")

    @property
    def ut(self) -> UtParams:
        return UtParams(self.alpha, self.beta, self.kappa)

    @property
    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.r_rel, self.q_param_rel, self.jitter, self.trust_radius)

    def initial_estimate(self, guess: ParameterVector = NOMINAL, solver: SolverConfig = SolverConfig()) -> AugmentedEstimate:
        """Prior centred on ``guess`` and its steady state at the window phase."""
        state, _ = steady_state_at(guess, self.window_phase, solver)
        return initial_estimate(guess, state, self.p0_param_rel, self.p0_state_rel, self.p0_state_floor)


def run_filter(
    kind: str,
    signals: np.ndarray,
    subset,
    settings: FilterSettings = FilterSettings(),
    cycles: int = 100,
    solver: SolverConfig = SolverConfig(),
    guess: ParameterVector = NOMINAL,
    nominal: ParameterVector = NOMINAL,
) -> FilterTrace:
    """Run the ``"modified"`` or ``"original"`` filter from the default prior around ``guess``."""
    init = settings.initial_estimate(guess, solver)
    common = dict(ut=settings.ut, noise=settings.noise, cycles=cycles, subset=subset, solver=solver,
                  nominal=nominal, phase=settings.window_phase)
    if kind == "modified":
        return run_modified_ukf(signals, init, tau_k=settings.tau_k, **common)
    if kind == "original":
        return run_original_ukf(signals, init, tau_k=settings.tau_k,
                                divergence_bound=settings.divergence_bound, **common)
    raise DomainError(f"unknown filter kind {kind!r}")
