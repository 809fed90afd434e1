"""Acceptance checks at desk scale.

Each criterion prints one ``ACCEPTANCE <n> PASS|FAIL`` line. The ensemble runs
are cached under ``.acceptance_cache/<source digest>/`` so a re-run only
recomputes what changed; delete the directory to force a full rebuild
(about two hours on one core).
"""

from __future__ import annotations

import ast
import hashlib
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import cardio_ukf
from cardio_ukf import experiments as ex
from cardio_ukf.model import PARAM_NAMES, ObservationSubset
from cardio_ukf.synth import NoiseSpec, SamplingConfig, build_ensemble, observation_signals, truth_stream
from cardio_ukf.ukf import FilterSettings, ObservationStream, correct, measurement_noise, propagate_interval, sigma_points, unscented_moments, AugmentedEstimate

ROOT = Path(__file__).resolve().parents[1]

# pinned protocol
SEED = 0
N_TARGETS = 20
CYCLES = 100
FULL = ObservationSubset.parse("1,2,3,4")
PAIR = ObservationSubset.parse("1,4")
WELL = [PARAM_NAMES.index(p) for p in ("tau_es", "tau_ep", "R_mv", "Z_ao", "R_s", "C_sa", "C_sv", "tau")]
ELAST = [PARAM_NAMES.index(p) for p in ("E_max", "E_min")]
PAIR_GOOD = [PARAM_NAMES.index(p) for p in ("tau_es", "tau_ep", "R_s", "C_sa", "tau")]
PAIR_NULLISH = [PARAM_NAMES.index(p) for p in ("C_sv", "R_mv")]

C1_RATE = 75.0  # % of runs at >= 98 %
C3_RATE = 70.0  # % of runs at >= 95 %
C3_NULL_GAP = 15.0  # percentage points
C4_RATE = 45.0  # % of runs at >= 95 %
C5_ORIG_RATE = 25.0  # % of runs with >= 8 parameters at >= 98 %
C5_DOMINATE = 8  # parameters
C6_RUNS, C6_MIN_OK, C6_REL = 12, 9, 0.05
C7_BUDGET = 60.0  # s
C8_RANGE = (8.0, 32.0)


def _code_only(source: str) -> str:
    # comments and docstrings do not invalidate cached runs
    tree = ast.parse(source)
    for node in ast.walk(tree):
        body = getattr(node, "body", None)
        if isinstance(body, list) and body and isinstance(body[0], ast.Expr) \
                and isinstance(getattr(body[0], "value", None), ast.Constant) and isinstance(body[0].value.value, str):
            node.body = body[1:] or [ast.Pass()]
    return ast.dump(tree)


def _digest() -> str:
    h = hashlib.sha256()
    for p in sorted((ROOT / "src" / "cardio_ukf").glob("*.py")):
        if p.name in ("cli.py", "estimators.py", "config.py", "__init__.py"):
            continue
        h.update(p.name.encode())
        h.update(_code_only(p.read_text()).encode())
    h.update(repr((SEED, N_TARGETS, CYCLES)).encode())
    return h.hexdigest()[:12]


CACHE = ROOT / ".acceptance_cache" / _digest()


def report(request, n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line, flush=True)
    request.config._acceptance_lines = getattr(request.config, "_acceptance_lines", []) + [line]


def _progress(i, n, rec):
    s = rec.spec
    print(f"  [{i}/{n}] target {s.target_id} {s.subset.label} {s.noise.sigma_noise:g} {s.filter_kind}: "
          f"{rec.status} {rec.wall_time:.0f}s", file=sys.stderr, flush=True)


@pytest.fixture(scope="module")
def ensemble():
    return build_ensemble(SamplingConfig(seed=SEED), N_TARGETS)


def _records(ensemble, name, subset, sigma, kind="modified"):
    specs = ex.plan_matrix(ensemble, [subset], [sigma], kind, CYCLES, SEED)
    return ex.run_specs(specs, ensemble, ex.RunContext(), 1, CACHE / name, _progress)


def _fmt(values) -> str:
    return "[" + " ".join(f"{v:.0f}" for v in values) + "]"


@pytest.fixture(scope="module")
def full_1pct(ensemble):
    return _records(ensemble, "full_1pct", FULL, 0.01)


@pytest.fixture(scope="module")
def pair_1pct(ensemble):
    return _records(ensemble, "pair_1pct", PAIR, 0.01)


@pytest.mark.slow
def test_criterion_1_headline_identifiability(request, full_1pct):
    rate = ex.success_rate(full_1pct, 98.0)
    ok = bool(np.all(rate[WELL] >= C1_RATE))
    report(request, 1, ok, f"98%-rates of 8 parameters {_fmt(rate[WELL])} each >= {C1_RATE:g}%")
    assert ok


@pytest.mark.slow
def test_criterion_2_elastance_gap(request, ensemble, full_1pct):
    rate = ex.success_rate(full_1pct, 98.0)
    null = ex.null_baseline(cardio_ukf.NOMINAL, ensemble, 98.0)
    upper = rate[WELL].min()
    ok = bool(all(null[i] < rate[i] < upper for i in ELAST))
    report(request, 2, ok, f"E_max/E_min 98%-rates {_fmt(rate[ELAST])} vs null {_fmt(null[ELAST])} "
                           f"and lowest well-identified rate {upper:.0f}")
    assert ok


@pytest.mark.slow
def test_criterion_3_two_observables(request, ensemble, pair_1pct):
    rate = ex.success_rate(pair_1pct, 95.0)
    null = ex.null_baseline(cardio_ukf.NOMINAL, ensemble, 95.0)
    good = bool(np.all(rate[PAIR_GOOD] >= C3_RATE))
    gap = np.abs(rate[PAIR_NULLISH] - null[PAIR_NULLISH])
    near = bool(np.all(gap <= C3_NULL_GAP))
    ok = good and near
    report(request, 3, ok, f"95%-rates tau_es,tau_ep,R_s,C_sa,tau {_fmt(rate[PAIR_GOOD])} >= {C3_RATE:g}% ({good}); "
                           f"C_sv,R_mv {_fmt(rate[PAIR_NULLISH])} vs null {_fmt(null[PAIR_NULLISH])} "
                           f"within {C3_NULL_GAP:g} pp ({near})")
    assert ok


@pytest.mark.slow
def test_criterion_4_noise_robustness(request, ensemble):
    recs = _records(ensemble, "full_10pct", FULL, 0.10)
    rate = ex.success_rate(recs, 95.0)
    ok = bool(np.all(rate >= C4_RATE))
    report(request, 4, ok, f"95%-rates at 10% noise {_fmt(rate)} each >= {C4_RATE:g}%")
    assert ok


@pytest.mark.slow
def test_criterion_5_baseline_breakdown(request, ensemble):
    orig = _records(ensemble, "full_5pct_original", FULL, 0.05, "original")
    mod = _records(ensemble, "full_5pct", FULL, 0.05)
    cmp = ex.summarize_comparison(orig + mod, ensemble)
    orig_rate = 100.0 * cmp.success_98["original"]
    wins = int(np.sum(cmp.dominated))
    ok = orig_rate < C5_ORIG_RATE and wins >= C5_DOMINATE
    report(request, 5, ok, f"original: {orig_rate:.0f}% of runs with >=8 params at 98% (< {C5_ORIG_RATE:g}%), "
                           f"{sum(r.status != ex.CONVERGED for r in orig)} stopped early; modified wins on mean "
                           f"accuracy for {wins}/10 (>= {C5_DOMINATE}); means mod {_fmt(cmp.mean_accuracy['modified'])} "
                           f"orig {_fmt(cmp.mean_accuracy['original'])}")
    assert ok


@pytest.mark.slow
def test_criterion_6_blind_state(request, ensemble, pair_1pct):
    by_id = {c.id: c for c in ensemble}
    runs = pair_1pct[:C6_RUNS]
    rel = []
    for r in runs:
        try:
            rel.append(ex.blind_state_error(r, by_id[r.spec.target_id]).relative)
        except Exception:  # failed run or failed re-simulation both count as misses
            rel.append(np.inf)
    n_ok = int(np.sum(np.asarray(rel) < C6_REL))
    ok = n_ok >= C6_MIN_OK
    report(request, 6, ok, f"{n_ok}/{len(runs)} runs with p_sa RMSE < {100 * C6_REL:g}% of pulse pressure "
                           f"(need {C6_MIN_OK}); worst {100 * max(rel):.1f}%")
    assert ok


def test_criterion_7_property_suites(request):
    t = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(ROOT / "tests" / "properties")],
                          capture_output=True, text=True, cwd=ROOT)
    elapsed = time.perf_counter() - t
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0 and elapsed < C7_BUDGET
    report(request, 7, ok, f"property suites: {summary} in {elapsed:.1f}s (< {C7_BUDGET:g}s)")
    assert ok, proc.stdout[-3000:]


def _iteration_time(case, subset, repeats=3):
    truth = truth_stream(case.params, 2)
    signals = observation_signals(truth, subset, NoiseSpec(0.01, 5, SEED), case.id)
    settings = FilterSettings()
    est = settings.initial_estimate()
    stream = ObservationStream(signals, subset, 1000)
    R = measurement_noise(stream.window(0), len(subset), settings.r_rel)
    times = []
    for _ in range(repeats + 1):
        t = time.perf_counter()
        sp = sigma_points(est, settings.ut)
        X, Y = propagate_interval(sp, subset, 1.0, phase=settings.window_phase)
        prior = AugmentedEstimate(*unscented_moments(X, sp.w_mean, sp.w_cov))
        correct(prior, X, Y, stream.window(0), R, sp.w_mean, sp.w_cov, trust_radius=settings.trust_radius)
        times.append(time.perf_counter() - t)
    return float(np.median(times[1:]))


def test_criterion_8_cost_scaling(request, ensemble):
    case = ensemble[0]
    t4 = _iteration_time(case, FULL)
    t1 = _iteration_time(case, ObservationSubset.parse("1"))
    ratio = t4 / t1
    ok = C8_RANGE[0] <= ratio <= C8_RANGE[1]
    report(request, 8, ok, f"per-iteration time {{1,2,3,4}} {t4 * 1e3:.0f} ms / {{1}} {t1 * 1e3:.0f} ms = {ratio:.1f}x "
                           f"(in [{C8_RANGE[0]:g}, {C8_RANGE[1]:g}])")
    assert ok
