"""Command-line entry point: ``cardio-ukf generate | run | report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import RunConfig, load_config
from .exceptions import CardioUKFError, ConfigError, EnsembleInfeasible
from .model import STATE_NAMES, ObservationSubset
from .synth import (
    NoiseSpec,
    build_ensemble,
    corrupt_signal,
    label_census,
    read_targets_json,
    rng_for,
    PURPOSE_NOISE,
    noise_key,
    truth_stream,
    write_targets_json,
)

log = logging.getLogger("cardio_ukf")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, like config errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class DataError(CardioUKFError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _subset(text: str) -> ObservationSubset:
    try:
        return ObservationSubset.parse(text)
    except CardioUKFError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cardio-ukf", description="Parameter estimation for a lumped cardiovascular model with a batch-window UKF.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON run config (defaults when omitted)")
        sp.add_argument("--out", help="output directory (overrides experiment.output_dir)")

    g = sub.add_parser("generate", help="build the target ensemble and noisy observation files")
    common(g)
    g.add_argument("--count", type=int, help="number of targets (overrides experiment.count)")

    r = sub.add_parser("run", help="run filters over the configured matrix or a single case")
    common(r)
    r.add_argument("--subset", type=_subset, help="observed signals, e.g. 1,4")
    r.add_argument("--noise", type=float, help="relative noise level, e.g. 0.01")
    r.add_argument("--filter", choices=ex.FILTER_KINDS, help="filter kind")
    r.add_argument("--target-id", type=int, help="run only this target")
    r.add_argument("--cycles", type=int, help="filter iterations per run")
    r.add_argument("--jobs", type=int, default=ex.default_jobs(), help="worker processes (default: available cores)")

    rep = sub.add_parser("report", help="write heatmap, convergence and blind-state CSVs")
    common(rep)
    rep.add_argument("--records", help="records file (default: <out>/records.jsonl)")
    rep.add_argument("--threshold", type=_floats, default=[98.0, 95.0, 90.0], help="accuracy thresholds, e.g. 98,95,90")
    return p


def _out_dir(cfg: RunConfig, args) -> Path:
    return Path(args.out or cfg.experiment.output_dir)


def _targets(out: Path):
    path = out / "targets.json"
    if not path.exists():
        raise DataError(f"{path} not found; run 'generate' first")
    try:
        return read_targets_json(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def _context(cfg: RunConfig) -> ex.RunContext:
    return ex.RunContext(cfg.filter, cfg.solver, cfg.nominal, cfg.nominal, cfg.experiment.obs_cycles)


def cmd_generate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    count = args.count if args.count is not None else cfg.experiment.count
    if count < 1:
        raise ConfigError("--count must be >= 1")
    log.info("building %d targets (seed %d)", count, cfg.experiment.seed)
    cases = build_ensemble(cfg.sampling, count, cfg.solver)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    write_targets_json(out / "targets.json", cases)
    e = cfg.experiment
    for c in cases:
        truth = truth_stream(c.params, e.obs_cycles, cfg.filter.tau_k, cfg.solver, phase=cfg.filter.window_phase)
        t = cfg.solver.dt_output * np.arange(1, len(truth) + 1)
        for level in e.noise_levels:
            spec = NoiseSpec(level, e.smoothing_window, e.seed)
            obs = corrupt_signal(truth, spec, rng_for(e.seed, PURPOSE_NOISE, c.id, noise_key(level)))
            path = out / f"target_{c.id}_obs_{level:g}.csv"
            np.savetxt(path, np.column_stack([t, obs]), delimiter=",", fmt="%.10g",
                       header=f"config-hash: {cfg.digest()}\n" + ",".join(("t",) + STATE_NAMES), comments="# ")
        log.info("target %d: %s", c.id, ", ".join(sorted(c.labels)) or "normal")
    print("label,count")
    for label, n in label_census(cases).items():
        print(f"{label},{n}")
    return EXIT_OK


def _progress(i, n, rec):
    s = rec.spec
    log.info("[%d/%d] target %d subset %s noise %g %s: %s (%.1fs)", i, n, s.target_id, s.subset.label,
             s.noise.sigma_noise, s.filter_kind, rec.status, rec.wall_time)


def cmd_run(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    cases = _targets(out)
    e = cfg.experiment
    cycles = args.cycles if args.cycles is not None else e.cycles
    if cycles < 1:
        raise ConfigError("--cycles must be >= 1")
    if args.target_id is not None:
        cases = [c for c in cases if c.id == args.target_id]
        if not cases:
            raise DataError(f"target {args.target_id} not in targets.json")
    kinds = [args.filter] if args.filter else list(e.filter_kinds)
    specs = []
    for kind in kinds:
        if args.subset is not None or args.noise is not None:
            subsets = [args.subset] if args.subset is not None else sorted(
                {s for b in e.matrix for s in b.subsets}, key=lambda s: (len(s), s.indices))
            noises = [args.noise] if args.noise is not None else sorted({n for b in e.matrix for n in b.noise_levels})
            specs += ex.plan_matrix(cases, subsets, noises, kind, cycles, e.seed, e.smoothing_window)
        else:
            for b in e.matrix:
                specs += ex.plan_matrix(cases, b.subsets, b.noise_levels, kind, cycles, e.seed, e.smoothing_window)
    log.info("%d runs, %d jobs", len(specs), args.jobs)
    records = ex.run_specs(specs, cases, _context(cfg), max(1, args.jobs), out, _progress)
    failed = sum(r.status != ex.CONVERGED for r in records)
    log.info("done: %d records, %d not converged", len(records), failed)
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    path = Path(args.records) if args.records else out / "records.jsonl"
    if not path.exists():
        raise DataError(f"{path} not found")
    records = ex.read_records(path)
    if not records:
        raise DataError(f"{path} holds no records")
    cases = _targets(out)
    by_id = {c.id: c for c in cases}
    missing = {r.spec.target_id for r in records} - set(by_id)
    if missing:
        raise DataError(f"records refer to unknown targets {sorted(missing)}")
    digest = cfg.digest()
    ctx = _context(cfg)
    # compute everything before writing so a failure leaves no partial output
    outputs = []
    kinds = sorted({r.spec.filter_kind for r in records})
    used = [by_id[i] for i in sorted({r.spec.target_id for r in records})]
    for kind in kinds:
        suffix = "" if kind == "modified" else f"_{kind}"
        for n in sorted({r.spec.noise.sigma_noise for r in records if r.spec.filter_kind == kind}):
            for thr in args.threshold:
                table = ex.heatmap(records, thr, cfg.nominal, used, noise=n, filter_kind=kind)
                outputs.append((f"heatmap_{thr:g}_{n:g}{suffix}.csv", table))
        rs = [r for r in records if r.spec.filter_kind == kind]
        outputs.append((f"convergence_{kind}.csv", ex.convergence_summary(rs, used, kind)))
    blind = ObservationSubset.parse("1,4")
    blind_runs = [r for r in records if r.spec.subset == blind and r.spec.filter_kind == "modified"]
    low = min((r.spec.noise.sigma_noise for r in blind_runs), default=None)
    for r in blind_runs:
        if r.spec.noise.sigma_noise == low and r.status == ex.CONVERGED:
            try:
                res = ex.blind_state_error(r, by_id[r.spec.target_id], ctx)
            except CardioUKFError as exc:
                log.warning("target %d: p_sa re-simulation failed: %s", r.spec.target_id, exc)
                continue
            outputs.append((f"psa_run_{r.spec.target_id}.csv", res))
    for name, obj in outputs:
        obj.to_csv(out / name, digest)
        log.info("wrote %s", out / name)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnsembleInfeasible as exc:
        print(f"infeasible ensemble: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, CardioUKFError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
