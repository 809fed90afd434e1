"""One-chamber heart with systemic arterial and venous compartments.

The left ventricle is a time-varying elastance coupled to two windkessel
compartments through diode valves. Pressures are in mmHg, volumes in mL,
time in seconds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DomainError

PARAM_NAMES = ("tau_es", "tau_ep", "R_mv", "Z_ao", "R_s", "C_sa", "C_sv", "E_max", "E_min", "tau")
STATE_NAMES = ("p_lv", "p_sa", "p_sv", "V_lv")
N_PARAMS = len(PARAM_NAMES)
N_STATES = len(STATE_NAMES)

#: Unstressed ventricular volume (mL); a model constant, not estimated.
V0 = 10.0
#: cycle fraction at which Kalman intervals and observation windows begin
WINDOW_PHASE = 0.8


@dataclass(frozen=True)
class ParameterVector:
    tau_es: float
    tau_ep: float
    R_mv: float
    Z_ao: float
    R_s: float
    C_sa: float
    C_sv: float
    E_max: float
    E_min: float
    tau: float

    def __post_init__(self):
        values = astuple(self)
        if not all(math.isfinite(v) and v > 0 for v in values):
            bad = [n for n, v in zip(PARAM_NAMES, values) if not (math.isfinite(v) and v > 0)]
            raise DomainError(f"parameters must be finite and strictly positive: {bad}")
        if not self.tau_es < self.tau_ep <= 1.0:
            raise DomainError(
                f"need 0 < tau_es < tau_ep <= 1, got tau_es={self.tau_es}, tau_ep={self.tau_ep}"
            )
        if not self.E_min < self.E_max:
            raise DomainError(f"need E_min < E_max, got {self.E_min} >= {self.E_max}")

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ParameterVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (N_PARAMS,):
            raise DomainError(f"expected {N_PARAMS} parameter values, got {values.shape}")
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterVector":
        unknown = set(data) - set(PARAM_NAMES)
        missing = set(PARAM_NAMES) - set(data)
        if unknown or missing:
            raise DomainError(f"bad parameter keys: unknown={sorted(unknown)} missing={sorted(missing)}")
        return cls(**{k: float(data[k]) for k in PARAM_NAMES})

    def replace(self, **changes) -> "ParameterVector":
        return type(self)(**{**self.to_dict(), **changes})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ParameterVector":
        return cls.from_dict(json.loads(text))


#: Nominal configuration; every sampled target is a perturbation of these values.
NOMINAL = ParameterVector(
    tau_es=0.3,
    tau_ep=0.45,
    R_mv=0.006,
    Z_ao=0.033,
    R_s=1.11,
    C_sa=1.13,
    C_sv=11.0,
    E_max=1.5,
    E_min=0.03,
    tau=1.0,
)


@dataclass(frozen=True)
class InternalState:
    p_lv: float
    p_sa: float
    p_sv: float
    V_lv: float

    def __post_init__(self):
        values = astuple(self)
        if not all(math.isfinite(v) for v in values):
            raise DomainError(f"state entries must be finite: {values}")
        if self.V_lv <= 0:
            raise DomainError(f"V_lv must be positive, got {self.V_lv}")

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "InternalState":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (N_STATES,):
            raise DomainError(f"expected {N_STATES} state values, got {values.shape}")
        return cls(*(float(v) for v in values))


#: Default starting point for warm-up integrations (before steady state).
DEFAULT_INITIAL_STATE = InternalState(p_lv=3.6, p_sa=80.0, p_sv=8.0, V_lv=130.0)


@dataclass(frozen=True)
class ClinicalMetrics:
    sbp: float
    dbp: float
    lv_edp: float
    sv: float
    ef: float
    co: float

    @property
    def pulse_pressure(self) -> float:
        return self.sbp - self.dbp

    def to_dict(self) -> dict[str, float]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["pulse_pressure"] = self.pulse_pressure
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ClinicalMetrics":
        return cls(**{f.name: float(data[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class ObservationSubset:
    """Ordered set of observed signal indices (1: p_lv, 2: p_sa, 3: p_sv, 4: V_lv)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise DomainError("observation subset must be non-empty")
        if list(idx) != sorted(set(idx)):
            raise DomainError(f"subset indices must be sorted and unique, got {idx}")
        if idx[0] < 1 or idx[-1] > N_STATES:
            raise DomainError(f"subset indices must lie in 1..{N_STATES}, got {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def parse(cls, value: "str | Iterable[int] | ObservationSubset") -> "ObservationSubset":
        if isinstance(value, ObservationSubset):
            return value
        if isinstance(value, str):
            parts = [p for p in value.replace(" ", "").split(",") if p]
            try:
                value = [int(p) for p in parts]
            except ValueError:
                raise DomainError(f"cannot parse subset {value!r}") from None
        return cls(tuple(sorted(value)))

    @property
    def label(self) -> str:
        return ",".join(str(i) for i in self.indices)

    @property
    def columns(self) -> list[int]:
        """Zero-based columns into a ``STATE_NAMES``-ordered sample array."""
        return [i - 1 for i in self.indices]

    @property
    def names(self) -> list[str]:
        return [STATE_NAMES[c] for c in self.columns]

    def __len__(self) -> int:
        return len(self.indices)

    def __str__(self) -> str:
        return self.label


def all_subsets() -> list[ObservationSubset]:
    """The 15 non-empty subsets of the four observables, ordered by size then lexically."""
    from itertools import combinations

    return [
        ObservationSubset(c)
        for r in range(1, N_STATES + 1)
        for c in combinations(range(1, N_STATES + 1), r)
    ]


@dataclass(frozen=True)
class ObservationWindow:
    """Flattened signal-major vector of samples plus the subset it was taken from."""

    values: np.ndarray
    subset: ObservationSubset
    dt: float

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def n_samples(self) -> int:
        return self.size // len(self.subset)


def _check_params(params: ParameterVector) -> ParameterVector:
    if not isinstance(params, ParameterVector):
        raise DomainError(f"expected ParameterVector, got {type(params).__name__}")
    return params


def activation(t_cycle: float, T_es: float, T_ep: float) -> float:
    """Double-cosine activation in [0, 1] at time ``t_cycle`` since the start of the beat."""
    if t_cycle < T_es:
        return 0.5 * (1.0 - math.cos(math.pi * t_cycle / T_es))
    if t_cycle < T_ep:
        return 0.5 * (1.0 + math.cos(math.pi * (t_cycle - T_es) / (T_ep - T_es)))
    return 0.0


def elastance(t: float, params: ParameterVector) -> float:
    """Ventricular elastance E(t) in mmHg/mL.

    Rises from ``E_min`` to ``E_max`` over ``tau_es * tau`` seconds, relaxes back
    by ``tau_ep * tau`` and stays at ``E_min`` for the rest of the beat.
    """
    params = _check_params(params)
    if not math.isfinite(t) or t < 0:
        raise DomainError(f"elastance needs finite t >= 0, got {t}")
    t_cycle = t % params.tau
    e = activation(t_cycle, params.tau_es * params.tau, params.tau_ep * params.tau)
    return params.E_min + (params.E_max - params.E_min) * e


def elastance_rate(t: float, params: ParameterVector) -> float:
    """dE/dt in mmHg/(mL s); one-sided at the activation breakpoints."""
    params = _check_params(params)
    T_es, T_ep = params.tau_es * params.tau, params.tau_ep * params.tau
    t_cycle = t % params.tau
    amp = params.E_max - params.E_min
    if t_cycle < T_es:
        return amp * 0.5 * math.pi / T_es * math.sin(math.pi * t_cycle / T_es)
    if t_cycle < T_ep:
        w = T_ep - T_es
        return -amp * 0.5 * math.pi / w * math.sin(math.pi * (t_cycle - T_es) / w)
    return 0.0


def valve_flows(state: InternalState, params: ParameterVector) -> tuple[float, float, float]:
    """Mitral, aortic and systemic flows (mL/s) for ``state``."""
    q_mv = max(0.0, (state.p_sv - state.p_lv) / params.R_mv)
    q_ao = max(0.0, (state.p_lv - state.p_sa) / params.Z_ao)
    q_s = (state.p_sa - state.p_sv) / params.R_s
    return q_mv, q_ao, q_s


def model_rhs(t: float, state: InternalState, params: ParameterVector) -> np.ndarray:
    """Time derivative of ``(p_lv, p_sa, p_sv, V_lv)``.

    Valve flows use ``state.p_lv`` as given. Inside the integrator ``p_lv`` is
    algebraic, ``E(t) * (V_lv - V0)``; the first entry returned here is the time
    derivative of that relation.
    """
    params = _check_params(params)
    q_mv, q_ao, q_s = valve_flows(state, params)
    dV = q_mv - q_ao
    dpsa = (q_ao - q_s) / params.C_sa
    dpsv = (q_s - q_mv) / params.C_sv
    dplv = elastance_rate(t, params) * (state.V_lv - V0) + elastance(t, params) * dV
    return np.array([dplv, dpsa, dpsv, dV])


def lv_pressure(t: float, V_lv: float, params: ParameterVector) -> float:
    return elastance(t, params) * (V_lv - V0)


def stressed_volume(samples: np.ndarray, params: ParameterVector) -> np.ndarray:
    """``V_lv + C_sa p_sa + C_sv p_sv`` per sample; constant along exact trajectories."""
    samples = np.atleast_2d(samples)
    return samples[:, 3] + params.C_sa * samples[:, 1] + params.C_sv * samples[:, 2]


def observe(samples: np.ndarray, subset: ObservationSubset, dt: float) -> ObservationWindow:
    """Flatten selected columns of ``samples`` (n, 4) signal-major into a window."""
    subset = ObservationSubset.parse(subset)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != N_STATES or samples.shape[0] == 0:
        raise DomainError(f"samples must have shape (n>0, {N_STATES}), got {samples.shape}")
    values = samples[:, subset.columns].T.ravel()
    return ObservationWindow(values=values, subset=subset, dt=float(dt))


def derived_metrics(cycle: np.ndarray, params: ParameterVector) -> ClinicalMetrics:
    """Clinical summary of one steady-state cycle sampled uniformly.

    End-diastolic pressure is read where mitral inflow last drops to zero inside
    the cycle, falling back to the sample of maximum volume when the valve never
    opens.
    """
    params = _check_params(params)
    cycle = np.asarray(cycle, dtype=float)
    if cycle.ndim != 2 or cycle.shape[1] != N_STATES or cycle.shape[0] < 2:
        raise DomainError("derived_metrics needs at least 2 samples of the 4 states")
    p_lv, p_sa, p_sv, V = cycle.T
    sbp, dbp = float(p_sa.max()), float(p_sa.min())
    v_max, v_min = float(V.max()), float(V.min())
    sv = v_max - v_min
    q_mv = np.maximum(0.0, (p_sv - p_lv) / params.R_mv)
    closes = np.flatnonzero((q_mv[:-1] > 0) & (q_mv[1:] == 0))
    i_ed = int(closes[-1] + 1) if closes.size else int(np.argmax(V))
    return ClinicalMetrics(
        sbp=sbp,
        dbp=dbp,
        lv_edp=float(p_lv[i_ed]),
        sv=sv,
        ef=sv / v_max,
        co=sv * (60.0 / params.tau) / 1000.0,
    )


TRAJECTORY_HEADER = ("t",) + STATE_NAMES


def write_trajectory_csv(path, t: np.ndarray, samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for ti, row in zip(t, samples):
            writer.writerow([f"{ti:.17g}"] + [f"{v:.17g}" for v in row])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = tuple(next(reader))
        if header != TRAJECTORY_HEADER:
            raise DomainError(f"{path}: unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return data[:, 0], data[:, 1:]
