"""Fixed-step RK4 integration with steady-state detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import DomainError, NonPhysiological, NotConverged, SolverDiverged
from .model import (
    DEFAULT_INITIAL_STATE,
    N_STATES,
    V0,
    WINDOW_PHASE,
    InternalState,
    ParameterVector,
    write_trajectory_csv,
)


@dataclass(frozen=True)
class SolverConfig:
    dt_output: float = 0.001
    substeps: int = 1
    max_warmup_cycles: int = 50
    steady_tol: float = 1e-4

    def __post_init__(self):
        if not (math.isfinite(self.dt_output) and self.dt_output > 0):
            raise DomainError(f"dt_output must be > 0, got {self.dt_output}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise DomainError(f"substeps must be a positive integer, got {self.substeps}")
        if int(self.max_warmup_cycles) != self.max_warmup_cycles or self.max_warmup_cycles < 1:
            raise DomainError(f"max_warmup_cycles must be a positive integer, got {self.max_warmup_cycles}")
        if not self.steady_tol > 0:
            raise DomainError(f"steady_tol must be > 0, got {self.steady_tol}")

    def steps_for(self, duration: float) -> int:
        """Number of output intervals covering ``duration``."""
        n = int(round(duration / self.dt_output))
        if n < 1:
            raise DomainError(f"duration {duration} is shorter than dt_output {self.dt_output}")
        return n


@dataclass
class Trajectory:
    """Uniformly sampled states; ``samples`` columns are ``p_lv, p_sa, p_sv, V_lv``."""

    t0: float
    dt: float
    samples: np.ndarray
    warmup_cycles: int | None = field(default=None, compare=False)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def final_state(self) -> InternalState:
        return InternalState.from_array(self.samples[-1])

    def __len__(self) -> int:
        return len(self.samples)

    def to_csv(self, path) -> None:
        write_trajectory_csv(path, self.times, self.samples)


def _status_error(status: int, t: float, row: int | None = None) -> Exception:
    where = "" if row is None else f" (row {row})"
    if status == _kernels.DIVERGED:
        return SolverDiverged(f"non-finite state at t={t:.6g}{where}", t=t)
    return NonPhysiological(f"V_lv <= 0 at t={t:.6g}{where}", t=t)


def integrate_batch(
    theta: np.ndarray,
    y0: np.ndarray,
    n_out: int,
    config: SolverConfig,
    t0: float | np.ndarray = 0.0,
    v0: float = V0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate many parameter sets at once.

    ``theta`` is (n, 10), ``y0`` is (n, 3) holding ``V_lv, p_sa, p_sv``;
    ``t0`` is a start time shared by all rows or one per row.
    Returns ``(samples, status, fail_t)`` without raising; rows that failed are
    only valid up to ``fail_t``.
    """
    theta = np.ascontiguousarray(theta, dtype=float)
    y0 = np.ascontiguousarray(y0, dtype=float)
    n = theta.shape[0]
    samples = np.full((n, n_out + 1, N_STATES), np.nan)
    status = np.zeros(n, dtype=np.int64)
    fail_t = np.full(n, np.nan)
    t0 = np.ascontiguousarray(np.broadcast_to(np.asarray(t0, dtype=float), (n,)))
    _kernels.integrate_batch(
        theta, y0, t0, float(config.dt_output), int(n_out), int(config.substeps),
        float(v0), samples, status, fail_t,
    )
    return samples, status, fail_t


def _ode_state(init: InternalState | np.ndarray) -> np.ndarray:
    a = init.to_array() if isinstance(init, InternalState) else np.asarray(init, dtype=float)
    return np.array([a[3], a[1], a[2]])


def integrate(
    params: ParameterVector,
    init: InternalState,
    duration: float,
    config: SolverConfig = SolverConfig(),
    t0: float = 0.0,
) -> Trajectory:
    """Integrate from ``init`` for ``duration`` seconds, sampling every ``dt_output``.

    ``t0`` is the position within the heart cycle the integration starts at.
    The returned trajectory includes the initial point; its ``p_lv`` entries
    are recomputed from the elastance relation.
    """
    n_out = config.steps_for(duration)
    samples, status, fail_t = integrate_batch(
        params.to_array()[None, :], _ode_state(init)[None, :], n_out, config, t0=t0
    )
    if status[0] != _kernels.OK:
        raise _status_error(int(status[0]), float(fail_t[0]))
    return Trajectory(t0=t0, dt=config.dt_output, samples=samples[0])


def _cycle_extrema(samples: np.ndarray) -> np.ndarray:
    return np.concatenate([samples.min(axis=0), samples.max(axis=0)])


def run_to_steady_state(
    params: ParameterVector,
    init: InternalState,
    config: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Warm the model up beat by beat and return one steady-state cycle.

    A beat spans ``round(tau / dt_output)`` samples and each beat restarts the
    cycle clock, so the returned cycle begins at the onset of contraction.
    Convergence is declared when the largest relative change of the per-beat
    minima and maxima of all four signals falls below ``steady_tol``; the
    number of comparisons needed is stored in ``warmup_cycles``.
    """
    n_cyc = config.steps_for(params.tau)
    theta = params.to_array()[None, :]
    y = _ode_state(init)[None, :]

    def beat(y):
        samples, status, fail_t = integrate_batch(theta, y, n_cyc, config)
        if status[0] != _kernels.OK:
            raise _status_error(int(status[0]), float(fail_t[0]))
        return samples[0]

    prev = beat(y)
    for count in range(1, config.max_warmup_cycles + 1):
        cur = beat(_ode_state(prev[-1])[None, :])
        a, b = _cycle_extrema(prev), _cycle_extrema(cur)
        scale = np.maximum(np.abs(a), 1e-12)
        change = float(np.max(np.abs(b - a) / scale))
        if change < config.steady_tol:
            cycle = beat(_ode_state(cur[-1])[None, :])
            return Trajectory(t0=0.0, dt=config.dt_output, samples=cycle, warmup_cycles=count)
        prev = cur
    raise NotConverged(
        f"no steady state within {config.max_warmup_cycles} cycles (last change {change:.3g})"
    )


def steady_state_at(
    params: ParameterVector,
    phase: float = WINDOW_PHASE,
    config: SolverConfig = SolverConfig(),
    init: InternalState | None = None,
) -> tuple[InternalState, float]:
    """Steady-cycle state at cycle fraction ``phase`` and the model time it sits at."""
    if not 0 <= phase < 1:
        raise DomainError(f"phase must lie in [0, 1), got {phase}")
    cycle = run_to_steady_state(params, DEFAULT_INITIAL_STATE if init is None else init, config)
    i0 = int(round(phase * params.tau / config.dt_output))
    return InternalState.from_array(cycle.samples[i0]), i0 * config.dt_output
