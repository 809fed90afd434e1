"""Ensemble runs, accuracy bookkeeping, heatmaps, filter comparison and blind state error."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, FilterFailed, SigmaPropagationFailed
from .model import (
    NOMINAL,
    PARAM_NAMES,
    InternalState,
    ObservationSubset,
    ParameterVector,
    all_subsets,
)
from .solver import SolverConfig, integrate, steady_state_at
from .synth import NoiseSpec, TargetCase, noise_key, observation_signals, truth_stream
from .ukf import PARAM_SLICE, STATE_SLICE, TAU_INDEX, FilterSettings, FilterTrace, run_filter

log = logging.getLogger(__name__)

FILTER_KINDS = ("modified", "original")
CONVERGED = "Converged"
DIVERGED = "Diverged"
SOLVER_FAILED = "SolverFailed"


def config_hash(obj) -> str:
    """Short sha256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def accuracy(theta_hat, theta_target) -> np.ndarray:
    """Per-parameter accuracy in percent, ``100 (1 - |err| / target)`` floored at 0."""
    a = theta_hat.to_array() if isinstance(theta_hat, ParameterVector) else np.asarray(theta_hat, float)
    b = theta_target.to_array() if isinstance(theta_target, ParameterVector) else np.asarray(theta_target, float)
    if np.any(b == 0):
        raise DomainError("target components must be non-zero")
    return np.maximum(0.0, 100.0 * (1.0 - np.abs(a - b) / np.abs(b)))


def null_baseline(initial_guess: ParameterVector, targets, threshold: float) -> np.ndarray:
    """Percentage of targets the untouched guess already matches to ``threshold``, per parameter."""
    targets = list(targets)
    if not targets:
        raise DomainError("ensemble is empty")
    hits = np.array([accuracy(initial_guess, _params(t)) >= threshold for t in targets])
    return 100.0 * hits.mean(axis=0)


def _params(t) -> ParameterVector:
    return t.params if isinstance(t, TargetCase) else t


@dataclass(frozen=True)
class RunSpec:
    target_id: int
    subset: ObservationSubset
    noise: NoiseSpec = NoiseSpec()
    filter_kind: str = "modified"
    cycles: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "subset", ObservationSubset.parse(self.subset))
        if self.cycles < 1:
            raise DomainError("cycles must be >= 1")
        if self.filter_kind not in FILTER_KINDS:
            raise DomainError(f"filter_kind must be one of {FILTER_KINDS}")

    @property
    def key(self) -> tuple:
        """Sort and lookup key: (target, subset, noise, filter)."""
        return (self.target_id, self.subset.indices, noise_key(self.noise.sigma_noise), self.filter_kind)

    def to_dict(self) -> dict:
        return {
            "target_id": self.target_id,
            "subset": self.subset.label,
            "noise": asdict(self.noise),
            "filter_kind": self.filter_kind,
            "cycles": self.cycles,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunSpec":
        return cls(
            target_id=int(d["target_id"]),
            subset=ObservationSubset.parse(d["subset"]),
            noise=NoiseSpec(**d["noise"]),
            filter_kind=d["filter_kind"],
            cycles=int(d["cycles"]),
            seed=int(d["seed"]),
        )


@dataclass
class RunRecord:
    """Outcome of one filter run.

    ``final_accuracy`` is None when the run did not finish; such runs count
    as misses in every heatmap cell.
    """

    spec: RunSpec
    trace: FilterTrace
    final_accuracy: np.ndarray | None
    status: str
    wall_time: float = field(default=0.0, compare=False)
    message: str = ""

    @property
    def final_params(self) -> ParameterVector | None:
        if self.final_accuracy is None:
            return None
        return ParameterVector.from_array(self.trace.final.mean[PARAM_SLICE])

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "status": self.status,
            "message": self.message,
            "final_accuracy": None if self.final_accuracy is None else self.final_accuracy.tolist(),
            "wall_time": self.wall_time,
            "trace": [e.to_record() for e in self.trace.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        acc = d.get("final_accuracy")
        trace = FilterTrace.from_records(d.get("trace", []), status=d["status"], message=d.get("message", ""))
        return cls(
            spec=RunSpec.from_dict(d["spec"]),
            trace=trace,
            final_accuracy=None if acc is None else np.asarray(acc, dtype=float),
            status=d["status"],
            wall_time=float(d.get("wall_time", 0.0)),
            message=d.get("message", ""),
        )


def write_records(path, records) -> None:
    with open(path, "w") as fh:
        for r in sorted(records, key=lambda r: r.spec.key):
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_records(path) -> list[RunRecord]:
    """Parse a JSON-lines record file; a malformed line raises ``DomainError`` naming it."""
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(RunRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise DomainError(f"{path}: record {i} is malformed: {exc}") from exc
    return out


@dataclass(frozen=True)
class RunContext:
    """Settings shared by every run of a matrix."""

    settings: FilterSettings = FilterSettings()
    solver: SolverConfig = SolverConfig()
    nominal: ParameterVector = NOMINAL
    initial_guess: ParameterVector = NOMINAL
    obs_cycles: int = 10


_truth_cache: dict = {}


def _truth(case: TargetCase, ctx: RunContext) -> np.ndarray:
    key = (case.params, ctx.obs_cycles, ctx.settings.tau_k, ctx.solver, ctx.settings.window_phase)
    if key not in _truth_cache:
        _truth_cache.clear()
        _truth_cache[key] = truth_stream(
            case.params, ctx.obs_cycles, ctx.settings.tau_k, ctx.solver, phase=ctx.settings.window_phase
        )
    return _truth_cache[key]


def execute_run(spec: RunSpec, case: TargetCase, ctx: RunContext = RunContext()) -> RunRecord:
    """One filter run on one target. Filter failures become the record's status."""
    if spec.target_id != case.id:
        raise DomainError(f"spec is for target {spec.target_id}, got case {case.id}")
    t = time.perf_counter()
    noise = NoiseSpec(spec.noise.sigma_noise, spec.noise.smoothing_window, spec.seed)
    signals = observation_signals(_truth(case, ctx), spec.subset, noise, case.id)
    try:
        trace = run_filter(spec.filter_kind, signals, spec.subset, ctx.settings, spec.cycles,
                           ctx.solver, ctx.initial_guess, ctx.nominal)
    except FilterFailed as exc:
        trace = exc.trace
        status = SOLVER_FAILED if isinstance(exc.cause, SigmaPropagationFailed) else DIVERGED
        return RunRecord(spec, trace, None, status, time.perf_counter() - t, trace.message)
    if trace.status != CONVERGED or len(trace) < spec.cycles:
        return RunRecord(spec, trace, None, DIVERGED, time.perf_counter() - t, trace.message)
    acc = accuracy(trace.final.mean[PARAM_SLICE], case.params)
    return RunRecord(spec, trace, acc, CONVERGED, time.perf_counter() - t)


def _execute(args):
    return execute_run(*args)


def plan_matrix(ensemble, subsets, noise_levels, filter_kind="modified", cycles=100, seed=0,
                smoothing_window=5) -> list[RunSpec]:
    return [
        RunSpec(c.id, ObservationSubset.parse(s), NoiseSpec(float(n), smoothing_window, seed), filter_kind, cycles, seed)
        for c in ensemble
        for s in subsets
        for n in noise_levels
    ]


def run_specs(specs, ensemble, ctx: RunContext = RunContext(), jobs: int = 1, out_dir=None,
              progress=None) -> list[RunRecord]:
    """Execute ``specs``, reusing any matching records already in ``out_dir/records.jsonl``.

    Finished records are appended to ``records.partial.jsonl`` as they arrive,
    so an interrupted matrix resumes where it stopped. The returned list is
    sorted by (target, subset, noise, filter).
    """
    cases = {c.id: c for c in ensemble}
    done: dict[tuple, RunRecord] = {}
    partial = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in ("records.jsonl", "records.partial.jsonl"):
            p = out_dir / name
            if p.exists():
                for r in read_records(p):
                    done[r.spec.key] = r
        partial = open(out_dir / "records.partial.jsonl", "a")
    wanted = {s.key: s for s in specs}
    todo = [s for k, s in wanted.items() if k not in done or done[k].spec != s]
    for s in todo:
        done.pop(s.key, None)
    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(_execute, [(s, cases[s.target_id], ctx) for s in todo])
                for i, rec in enumerate(results):
                    done[rec.spec.key] = rec
                    _persist(partial, rec, progress, i, len(todo))
        else:
            for i, s in enumerate(todo):
                rec = execute_run(s, cases[s.target_id], ctx)
                done[rec.spec.key] = rec
                _persist(partial, rec, progress, i, len(todo))
    finally:
        if partial is not None:
            partial.close()
    records = sorted((done[k] for k in wanted), key=lambda r: r.spec.key)
    if out_dir is not None:
        merged = {r.spec.key: r for r in done.values()}
        write_records(out_dir / "records.jsonl", merged.values())
        (out_dir / "records.partial.jsonl").unlink(missing_ok=True)
    return records


def _persist(fh, rec, progress, i, n):
    if fh is not None:
        fh.write(json.dumps(rec.to_dict()) + "\n")
        fh.flush()
    if progress is not None:
        progress(i + 1, n, rec)


def run_matrix(ensemble, subsets, noise_levels, filter_kind="modified", cycles=100,
               ctx: RunContext = RunContext(), seed=0, jobs=1, out_dir=None, progress=None) -> list[RunRecord]:
    """Every (target x subset x noise) run; individual failures are recorded, never raised."""
    specs = plan_matrix(ensemble, subsets, noise_levels, filter_kind, cycles, seed)
    return run_specs(specs, ensemble, ctx, jobs, out_dir, progress)


def success_rate(records, threshold: float) -> np.ndarray:
    """Percentage of ``records`` whose final accuracy reaches ``threshold``, per parameter."""
    records = list(records)
    if not records:
        return np.full(len(PARAM_NAMES), np.nan)
    hits = np.array([
        r.final_accuracy >= threshold if r.final_accuracy is not None else np.zeros(len(PARAM_NAMES), bool)
        for r in records
    ])
    return 100.0 * hits.mean(axis=0)


def mean_final_accuracy(records) -> np.ndarray:
    """Ensemble mean of final accuracy; unfinished runs count as 0."""
    acc = [r.final_accuracy if r.final_accuracy is not None else np.zeros(len(PARAM_NAMES)) for r in records]
    return np.mean(acc, axis=0)


@dataclass
class HeatmapTable:
    threshold: float
    columns: list[str]
    cells: np.ndarray  # (10, len(columns)); NaN where a subset has no records
    rows: tuple[str, ...] = PARAM_NAMES

    def column(self, label: str) -> np.ndarray:
        return self.cells[:, self.columns.index(label)]

    def to_csv(self, path, config_digest: str = "") -> None:
        with open(path, "w") as fh:
            fh.write(f"# config-hash: {config_digest}\n")
            fh.write("parameter," + ",".join(f'"{c}"' for c in self.columns) + "\n")
            for name, row in zip(self.rows, self.cells):
                fh.write(name + "," + ",".join("" if np.isnan(v) else f"{v:.1f}" for v in row) + "\n")


def heatmap(records, threshold: float, initial_guess: ParameterVector = NOMINAL, targets=None,
            noise: float | None = None, filter_kind: str = "modified") -> HeatmapTable:
    """Identifiability table: success percentage per parameter and subset, plus the null column.

    The denominator of every column is the number of targets, so failed runs
    count against the subset. ``targets`` defaults to the parameters recovered
    from the records' target ids and is needed for the null column.
    """
    records = [r for r in records if r.spec.filter_kind == filter_kind
               and (noise is None or noise_key(r.spec.noise.sigma_noise) == noise_key(noise))]
    subsets = all_subsets()
    cells = np.full((len(PARAM_NAMES), len(subsets) + 1), np.nan)
    n_targets = len(targets) if targets is not None else len({r.spec.target_id for r in records})
    for j, s in enumerate(subsets):
        rs = [r for r in records if r.spec.subset == s]
        if not rs:
            continue
        hits = np.zeros(len(PARAM_NAMES))
        for r in rs:
            if r.final_accuracy is not None:
                hits += r.final_accuracy >= threshold
        cells[:, j] = 100.0 * hits / max(n_targets, len(rs))
    if targets is not None:
        cells[:, -1] = null_baseline(initial_guess, targets, threshold)
    return HeatmapTable(threshold, [s.label for s in subsets] + ["null"], cells)


@dataclass
class ConvergenceSummary:
    """Per-iteration ensemble statistics of ``estimate / target`` for one filter."""

    filter_kind: str
    iterations: np.ndarray
    mean: np.ndarray  # (n_iter, 10)
    std: np.ndarray
    alive: np.ndarray  # runs still contributing at each iteration
    n_runs: int
    n_failed: int

    def to_csv(self, path, config_digest: str = "") -> None:
        with open(path, "w") as fh:
            fh.write(f"# config-hash: {config_digest}\n")
            fh.write(f"# runs: {self.n_runs} failed: {self.n_failed}\n")
            head = ["iter", "alive"] + [f"mean_{p}" for p in PARAM_NAMES] + [f"std_{p}" for p in PARAM_NAMES]
            fh.write(",".join(head) + "\n")
            for i, it in enumerate(self.iterations):
                vals = [f"{v:.6g}" for v in np.concatenate([self.mean[i], self.std[i]])]
                fh.write(f"{it},{self.alive[i]}," + ",".join(vals) + "\n")


def convergence_summary(records, targets, filter_kind: str) -> ConvergenceSummary:
    """Mean and spread across the ensemble of each parameter's relative estimate per iteration."""
    by_id = {t.id: t.params.to_array() for t in targets}
    records = [r for r in records if r.spec.filter_kind == filter_kind]
    n_iter = max((r.spec.cycles for r in records), default=0)
    ratios = np.full((len(records), n_iter, len(PARAM_NAMES)), np.nan)
    for i, r in enumerate(records):
        if len(r.trace):
            m = r.trace.means[:, PARAM_SLICE] / by_id[r.spec.target_id]
            ratios[i, : len(m)] = m[:n_iter]
    alive = np.sum(~np.isnan(ratios[:, :, 0]), axis=0) if len(records) else np.zeros(0, int)
    with warnings.catch_warnings():
        # all-NaN columns once every run has stopped
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(ratios, axis=0)
        std = np.nanstd(ratios, axis=0)
    return ConvergenceSummary(filter_kind, np.arange(1, n_iter + 1), mean, std, alive, len(records),
                              sum(r.status != CONVERGED for r in records))


@dataclass
class FilterComparison:
    summaries: dict
    mean_accuracy: dict  # kind -> (10,) mean final accuracy
    success_98: dict  # kind -> fraction of runs with >= 98% on at least 8 parameters

    @property
    def dominated(self) -> np.ndarray:
        """Parameters where the modified filter's mean final accuracy is strictly higher."""
        return self.mean_accuracy["modified"] > self.mean_accuracy["original"]


def summarize_comparison(records, targets) -> FilterComparison:
    summaries, mean_acc, succ = {}, {}, {}
    for kind in FILTER_KINDS:
        rs = [r for r in records if r.spec.filter_kind == kind]
        summaries[kind] = convergence_summary(rs, targets, kind)
        mean_acc[kind] = mean_final_accuracy(rs) if rs else np.full(len(PARAM_NAMES), np.nan)
        good = [r.final_accuracy is not None and int(np.sum(r.final_accuracy >= 98.0)) >= 8 for r in rs]
        succ[kind] = float(np.mean(good)) if rs else float("nan")
    return FilterComparison(summaries, mean_acc, succ)


def compare_filters(ensemble, subset=(1, 2, 3, 4), sigma_noise: float = 0.05, cycles: int = 100,
                    ctx: RunContext = RunContext(), seed: int = 0, jobs: int = 1, out_dir=None,
                    progress=None) -> FilterComparison:
    """Run both filters on the same noisy data and summarise convergence and final accuracy."""
    specs = []
    for kind in FILTER_KINDS:
        specs += plan_matrix(ensemble, [subset], [sigma_noise], kind, cycles, seed)
    records = run_specs(specs, ensemble, ctx, jobs, out_dir, progress)
    return summarize_comparison(records, ensemble)


@dataclass
class BlindStateResult:
    rmse: float
    pulse_pressure: float
    t: np.ndarray
    psa_true: np.ndarray
    psa_est: np.ndarray

    @property
    def relative(self) -> float:
        """RMSE as a fraction of the true pulse pressure."""
        return self.rmse / self.pulse_pressure

    def to_csv(self, path, config_digest: str = "") -> None:
        with open(path, "w") as fh:
            fh.write(f"# config-hash: {config_digest}\n")
            fh.write("t,p_sa_true,p_sa_est\n")
            for row in zip(self.t, self.psa_true, self.psa_est):
                fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


def blind_state_error(record: RunRecord, target: TargetCase, ctx: RunContext = RunContext()) -> BlindStateResult:
    """RMSE (mmHg) of p_sa simulated from the final estimate against the target's true cycle.

    Both trajectories start at the window phase and cover one true heart
    period. Re-simulation failures propagate.
    """
    if not len(record.trace):
        raise DomainError(f"record for target {record.spec.target_id} has no estimate")
    if 2 in record.spec.subset.indices:
        log.warning("p_sa was observed in this run; the error is not blind")
    phase = ctx.settings.window_phase
    start, t0 = steady_state_at(target.params, phase, ctx.solver)
    duration = target.params.tau
    truth = integrate(target.params, start, duration, ctx.solver, t0=t0)
    mean = record.trace.final.mean
    est_params = ParameterVector.from_array(mean[PARAM_SLICE])
    est = integrate(est_params, InternalState.from_array(mean[STATE_SLICE]), duration, ctx.solver,
                    t0=phase * mean[PARAM_SLICE][TAU_INDEX])
    psa_true, psa_est = truth.samples[:, 1], est.samples[:, 1]
    rmse = float(np.sqrt(np.mean((psa_est - psa_true) ** 2)))
    pp = float(psa_true.max() - psa_true.min())
    return BlindStateResult(rmse, pp, truth.times - truth.t0, psa_true, psa_est)


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)

