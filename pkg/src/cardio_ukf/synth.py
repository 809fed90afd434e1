"""Synthetic targets: parameter sampling, plausibility gate, labels and noisy observations.

Random streams come from numpy's PCG64 seeded through ``SeedSequence`` with
an entropy tuple ``(seed, purpose, ...)``, so each candidate draw and each
target's noise have an independent, platform-stable stream.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CardioUKFError, DomainError, EnsembleInfeasible
from .model import (
    DEFAULT_INITIAL_STATE,
    NOMINAL,
    PARAM_NAMES,
    WINDOW_PHASE,
    ClinicalMetrics,
    InternalState,
    ObservationSubset,
    ParameterVector,
    derived_metrics,
)
from .solver import SolverConfig, integrate, run_to_steady_state, steady_state_at

log = logging.getLogger(__name__)

PURPOSE_SAMPLE = 0
PURPOSE_NOISE = 1
PURPOSE_RUN = 2


def rng_for(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), purpose, *map(int, keys)])))


def noise_key(sigma: float) -> int:
    """Integer stream key for a noise level (parts per million)."""
    return int(round(sigma * 1e6))


@dataclass(frozen=True)
class SamplingConfig:
    nominal: ParameterVector = NOMINAL
    spread: float = 0.6
    seed: int = 0
    fixed: tuple[str, ...] = ("tau",)

    def __post_init__(self):
        if not 0 <= self.spread < 1:
            raise DomainError(f"spread must lie in [0, 1), got {self.spread}")
        unknown = set(self.fixed) - set(PARAM_NAMES)
        if unknown:
            raise DomainError(f"unknown fixed parameters {sorted(unknown)}")


@dataclass(frozen=True)
class NoiseSpec:
    sigma_noise: float = 0.01
    smoothing_window: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_noise >= 0:
            raise DomainError(f"sigma_noise must be >= 0, got {self.sigma_noise}")
        if int(self.smoothing_window) != self.smoothing_window or self.smoothing_window < 1:
            raise DomainError(f"smoothing_window must be a positive integer, got {self.smoothing_window}")


@dataclass
class TargetCase:
    id: int
    params: ParameterVector
    metrics: ClinicalMetrics
    labels: frozenset = field(default_factory=frozenset)
    seed: int = 0
    draw: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "params": self.params.to_dict(),
            "metrics": self.metrics.to_dict(),
            "labels": sorted(self.labels),
            "seed": self.seed,
            "draw": self.draw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TargetCase":
        return cls(
            id=int(d["id"]),
            params=ParameterVector.from_dict(d["params"]),
            metrics=ClinicalMetrics.from_dict(d["metrics"]),
            labels=frozenset(d.get("labels", ())),
            seed=int(d.get("seed", 0)),
            draw=int(d.get("draw", 0)),
        )


def _truncated_normal(rng: np.random.Generator, mu: float, sigma: float, lo: float, hi: float) -> float:
    while True:
        x = rng.normal(mu, sigma)
        if lo <= x <= hi:
            return float(x)


def sample_target(cfg: SamplingConfig, rng: np.random.Generator | None = None) -> ParameterVector:
    """Draw one parameter vector.

    Each free component is Normal(nominal, (spread/3 * nominal)^2) truncated to
    ``[1 - spread, 1 + spread] * nominal``; components listed in ``cfg.fixed``
    stay at nominal. Draws violating the vector's ordering invariants are
    redrawn whole.
    """
    if rng is None:
        rng = rng_for(cfg.seed, PURPOSE_SAMPLE, 0)
    nominal = cfg.nominal.to_array()
    if cfg.spread == 0:
        return cfg.nominal
    for _ in range(10_000):
        values = nominal.copy()
        for i, name in enumerate(PARAM_NAMES):
            if name in cfg.fixed:
                continue
            mu = nominal[i]
            values[i] = _truncated_normal(
                rng, mu, cfg.spread / 3.0 * mu, (1 - cfg.spread) * mu, (1 + cfg.spread) * mu
            )
        try:
            return ParameterVector.from_array(values)
        except DomainError:
            continue
    raise EnsembleInfeasible("could not draw a parameter vector satisfying the ordering invariants")


#: (metric, lower, upper); ``None`` means unbounded.
PLAUSIBILITY_LIMITS = (
    ("sbp", 60.0, 250.0),
    ("dbp", 30.0, 150.0),
    ("lv_edp", None, 40.0),
    ("sv", 20.0, 180.0),
    ("ef", 0.15, 0.85),
    ("co", 2.0, 12.0),
)

_LIMIT_LABELS = {"sbp": "SBP", "dbp": "DBP", "lv_edp": "LVEDP", "sv": "SV", "ef": "EF", "co": "CO"}


@dataclass(frozen=True)
class PlausibilityResult:
    reasons: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.reasons

    def __bool__(self) -> bool:
        return self.passed


def plausibility_check(metrics: ClinicalMetrics) -> PlausibilityResult:
    """Inclusive bounds gate; the result lists every violated bound."""
    reasons = []
    for name, lo, hi in PLAUSIBILITY_LIMITS:
        v = getattr(metrics, name)
        if not np.isfinite(v):
            reasons.append(f"{_LIMIT_LABELS[name]} non-finite")
            continue
        if lo is not None and v < lo:
            reasons.append(f"{_LIMIT_LABELS[name]} lower")
        if hi is not None and v > hi:
            reasons.append(f"{_LIMIT_LABELS[name]} upper")
    return PlausibilityResult(tuple(reasons))


HYPOTENSION = "Hypotension"
HTN_STAGE_2 = "HTN-Stage-2"
HYPERTENSIVE_CRISIS = "Hypertensive-Crisis"
HFREF = "HFrEF"
WIDE_PULSE_PRESSURE = "Wide-Pulse-Pressure"
LABELS = (HYPOTENSION, HTN_STAGE_2, HYPERTENSIVE_CRISIS, HFREF, WIDE_PULSE_PRESSURE)


def classify_pathophysiology(metrics: ClinicalMetrics) -> frozenset:
    sbp, dbp = metrics.sbp, metrics.dbp
    labels = set()
    if sbp < 90 or dbp < 60:
        labels.add(HYPOTENSION)
    if sbp >= 140 or dbp >= 90:
        labels.add(HTN_STAGE_2)
    if sbp > 200 or dbp > 120:
        labels.add(HYPERTENSIVE_CRISIS)
    if metrics.ef < 0.40:
        labels.add(HFREF)
    if metrics.pulse_pressure > 60:
        labels.add(WIDE_PULSE_PRESSURE)
    return frozenset(labels)


def label_census(cases) -> dict[str, int]:
    return {lab: sum(lab in c.labels for c in cases) for lab in LABELS}


def smooth(y: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average along axis 0, truncating the window at the ends."""
    y = np.asarray(y, dtype=float)
    h = int(window) // 2
    if h == 0:
        return y.copy()
    n = y.shape[0]
    c = np.concatenate([np.zeros((1,) + y.shape[1:]), np.cumsum(y, axis=0)])
    i = np.arange(n)
    lo = np.maximum(0, i - h)
    hi = np.minimum(n - 1, i + h)
    count = (hi - lo + 1).reshape((-1,) + (1,) * (y.ndim - 1))
    return (c[hi + 1] - c[lo]) / count


def corrupt_signal(y_true: np.ndarray, spec: NoiseSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Multiplicative Gaussian noise followed by moving-average smoothing.

    ``y_true`` is (N,) or (N, n_signals); columns are corrupted and smoothed
    independently. Without ``rng`` the draw is seeded from ``spec.seed``.
    """
    y_true = np.asarray(y_true, dtype=float)
    if not np.all(np.isfinite(y_true)):
        raise DomainError("y_true must be finite")
    if rng is None:
        rng = rng_for(spec.seed, PURPOSE_NOISE)
    if spec.sigma_noise > 0:
        y = (1.0 + rng.normal(0.0, spec.sigma_noise, size=y_true.shape)) * y_true
    else:
        y = y_true.copy()
    return smooth(y, spec.smoothing_window)


def evaluate_candidate(
    params: ParameterVector,
    solver: SolverConfig = SolverConfig(),
    init: InternalState = DEFAULT_INITIAL_STATE,
) -> ClinicalMetrics:
    cycle = run_to_steady_state(params, init, solver)
    return derived_metrics(cycle.samples, params)


def build_ensemble(
    cfg: SamplingConfig,
    count: int = 50,
    solver: SolverConfig = SolverConfig(),
    init: InternalState = DEFAULT_INITIAL_STATE,
    max_consecutive_rejections: int = 10_000,
) -> list[TargetCase]:
    """Sample, simulate and gate candidates until ``count`` plausible targets exist.

    Candidate ``i`` is drawn from its own stream ``(seed, sample, i)``, so the
    accepted set depends only on the seed. Solver failures count as rejections.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    if not plausibility_check(evaluate_candidate(cfg.nominal, solver, init)):
        raise EnsembleInfeasible("nominal parameters are not plausible")
    cases: list[TargetCase] = []
    draw = 0
    rejected = 0
    while len(cases) < count:
        params = sample_target(cfg, rng_for(cfg.seed, PURPOSE_SAMPLE, draw))
        try:
            metrics = evaluate_candidate(params, solver, init)
            ok = plausibility_check(metrics).passed
        except CardioUKFError as exc:
            log.debug("draw %d rejected: %s", draw, exc)
            ok = False
        if ok:
            cases.append(
                TargetCase(len(cases) + 1, params, metrics, classify_pathophysiology(metrics), cfg.seed, draw)
            )
            rejected = 0
        else:
            rejected += 1
            if rejected > max_consecutive_rejections:
                raise EnsembleInfeasible(f"{rejected} consecutive rejections after {len(cases)} targets")
        draw += 1
    return cases


def truth_stream(
    params: ParameterVector,
    n_windows: int,
    tau_k: float = 1.0,
    solver: SolverConfig = SolverConfig(),
    init: InternalState = DEFAULT_INITIAL_STATE,
    phase: float = WINDOW_PHASE,
) -> np.ndarray:
    """Noise-free steady-state samples, shape (N, 4).

    The stream starts at cycle fraction ``phase`` and holds the samples at
    ``dt, 2 dt, ..., n_windows * tau_k`` after it.
    """
    start, t0 = steady_state_at(params, phase, solver, init)
    traj = integrate(params, start, n_windows * tau_k, solver, t0=t0)
    return traj.samples[1:]


def observation_signals(
    truth: np.ndarray,
    subset: ObservationSubset,
    spec: NoiseSpec,
    target_id: int,
) -> np.ndarray:
    """Corrupted columns of ``truth`` for ``subset``.

    Noise for a target is drawn for all four signals from the stream
    ``(seed, noise, target_id, level)`` before selecting columns, so a signal's
    realization does not depend on which other signals are observed.
    """
    subset = ObservationSubset.parse(subset)
    rng = rng_for(spec.seed, PURPOSE_NOISE, target_id, noise_key(spec.sigma_noise))
    full = corrupt_signal(truth, spec, rng)
    return full[:, subset.columns]


def write_targets_json(path, cases) -> None:
    with open(path, "w") as fh:
        json.dump([c.to_dict() for c in cases], fh, indent=2)
        fh.write("\n")


def read_targets_json(path) -> list[TargetCase]:
    with open(path) as fh:
        data = json.load(fh)
    return [TargetCase.from_dict(d) for d in data]
