"""JSON run configuration with four sections: model, solver, filter, experiment."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .exceptions import CardioUKFError, ConfigError, DomainError
from .model import NOMINAL, ObservationSubset, ParameterVector, all_subsets
from .solver import SolverConfig
from .synth import SamplingConfig
from .ukf import FilterSettings

SECTIONS = ("model", "solver", "filter", "experiment")


@dataclass(frozen=True)
class MatrixBlock:
    """A group of subsets run at each of ``noise_levels``."""

    subsets: tuple[ObservationSubset, ...]
    noise_levels: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"subsets": [s.label for s in self.subsets], "noise_levels": list(self.noise_levels)}


def _default_matrix() -> tuple[MatrixBlock, ...]:
    wide = ObservationSubset.parse("1,2,3,4"), ObservationSubset.parse("1,4")
    return (MatrixBlock(tuple(all_subsets()), (0.01,)), MatrixBlock(wide, (0.05, 0.1)))


@dataclass(frozen=True)
class ExperimentSettings:
    count: int = 50
    spread: float = 0.6
    seed: int = 0
    fixed: tuple[str, ...] = ("tau",)
    noise_levels: tuple[float, ...] = (0.01, 0.05, 0.1)
    smoothing_window: int = 5
    obs_cycles: int = 10
    cycles: int = 100
    filter_kinds: tuple[str, ...] = ("modified",)
    matrix: tuple[MatrixBlock, ...] = field(default_factory=_default_matrix)
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("count must be >= 1")
        if self.cycles < 1 or self.obs_cycles < 1:
            raise DomainError("cycles and obs_cycles must be >= 1")
        if any(not n >= 0 for n in self.noise_levels):
            raise DomainError("noise_levels must be >= 0")
        bad = set(self.filter_kinds) - {"modified", "original"}
        if bad:
            raise DomainError(f"unknown filter kinds {sorted(bad)}")


@dataclass(frozen=True)
class RunConfig:
    nominal: ParameterVector = NOMINAL
    solver: SolverConfig = SolverConfig()
    filter: FilterSettings = FilterSettings()
    experiment: ExperimentSettings = ExperimentSettings()

    @property
    def sampling(self) -> SamplingConfig:
        e = self.experiment
        return SamplingConfig(self.nominal, e.spread, e.seed, e.fixed)

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, experiment=dataclasses.replace(self.experiment, seed=int(seed)))

    def to_dict(self) -> dict:
        e = dataclasses.asdict(self.experiment)
        e["fixed"] = list(self.experiment.fixed)
        e["noise_levels"] = list(self.experiment.noise_levels)
        e["filter_kinds"] = list(self.experiment.filter_kinds)
        e["matrix"] = [b.to_dict() for b in self.experiment.matrix]
        return {
            "model": {"nominal": self.nominal.to_dict()},
            "solver": dataclasses.asdict(self.solver),
            "filter": dataclasses.asdict(self.filter),
            "experiment": e,
        }

    def digest(self) -> str:
        from .experiments import config_hash

        return config_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(d, SECTIONS, "")
        model = d.get("model", {})
        _reject_unknown(model, ("nominal",), "model")
        nominal = _build("model.nominal", lambda: ParameterVector.from_dict({**NOMINAL.to_dict(), **model.get("nominal", {})}))
        solver = _section(SolverConfig, d.get("solver", {}), "solver")
        filt = _section(FilterSettings, d.get("filter", {}), "filter")
        exp = dict(d.get("experiment", {}))
        _reject_unknown(exp, [f.name for f in dataclasses.fields(ExperimentSettings)], "experiment")
        for key in ("fixed", "noise_levels", "filter_kinds"):
            if key in exp:
                exp[key] = tuple(exp[key])
        if "matrix" in exp:
            exp["matrix"] = _build("experiment.matrix", lambda: tuple(_block(b) for b in exp["matrix"]))
        experiment = _section(ExperimentSettings, exp, "experiment", check=False)
        cfg = cls(nominal, solver, filt, experiment)
        _build("experiment", lambda: cfg.sampling)
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _block(b) -> MatrixBlock:
    _reject_unknown(b, ("subsets", "noise_levels"), "experiment.matrix[]")
    subs = b["subsets"]
    subsets = tuple(all_subsets()) if subs == "all" else tuple(ObservationSubset.parse(s) for s in subs)
    return MatrixBlock(subsets, tuple(float(n) for n in b["noise_levels"]))


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")


def _build(where, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (CardioUKFError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _section(cls, d, where, check=True):
    if check:
        _reject_unknown(d, [f.name for f in dataclasses.fields(cls)], where)
    return _build(where, lambda: cls(**d))


def load_config(path=None, env=None) -> RunConfig:
    """Read a config file (defaults if ``path`` is None); ``UKF_SEED`` overrides the seed."""
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        cfg = RunConfig.from_dict(data)
    env = os.environ if env is None else env
    if env.get("UKF_SEED"):
        try:
            cfg = cfg.with_seed(int(env["UKF_SEED"]))
        except ValueError as exc:
            raise ConfigError(f"UKF_SEED must be an integer, got {env['UKF_SEED']!r}") from exc
    return cfg
