import numpy as np
import pytest

from cardio_ukf.exceptions import NonPhysiological, NotConverged, SolverDiverged, SolverError
from cardio_ukf.model import DEFAULT_INITIAL_STATE, NOMINAL, InternalState, stressed_volume
from cardio_ukf.solver import SolverConfig, integrate, integrate_batch, run_to_steady_state, steady_state_at


def test_sample_count_includes_start():
    assert len(integrate(NOMINAL, DEFAULT_INITIAL_STATE, 1.0)) == 1001


def test_closed_valves_one_step():
    state = InternalState(p_lv=0.0, p_sa=90.0, p_sv=5.0, V_lv=50.0)
    # at t=0.2, E(V - V0) is about 45 mmHg: above p_sv, below p_sa
    traj = integrate(NOMINAL, state, 0.001, t0=0.2)
    assert 5.0 < traj.samples[0, 0] < 90.0
    assert traj.samples[-1, 3] == 50.0


def test_conservation_against_finer_reintegration():
    coarse = integrate(NOMINAL, DEFAULT_INITIAL_STATE, 20.0)
    fine = integrate(NOMINAL, DEFAULT_INITIAL_STATE, 20.0, SolverConfig(substeps=10))
    v0 = stressed_volume(coarse.samples[:1], NOMINAL)[0]
    last = slice(-1000, None)
    assert np.max(np.abs(stressed_volume(coarse.samples[last], NOMINAL) / v0 - 1)) < 1e-3
    assert np.max(np.abs(stressed_volume(fine.samples[last], NOMINAL) / v0 - 1)) < 1e-3


def test_steady_state_convergence_and_monotone_metric():
    cyc = run_to_steady_state(NOMINAL, DEFAULT_INITIAL_STATE)
    assert cyc.warmup_cycles <= 50
    assert len(cyc) == 1001
    # long reference run: the per-beat change keeps falling until it drops below tolerance
    traj = integrate(NOMINAL, DEFAULT_INITIAL_STATE, 60.0)
    beats = traj.samples[1:].reshape(60, 1000, 4)
    ext = np.concatenate([beats.min(axis=1), beats.max(axis=1)], axis=1)
    change = np.max(np.abs(np.diff(ext, axis=0)) / np.abs(ext[:-1]), axis=1)
    below = np.flatnonzero(change < 1e-4)
    assert below.size and below[0] <= 50
    assert np.all(np.diff(change[: below[0] + 1]) <= 1e-12 + 0.05 * change[: below[0]])


def test_steady_start_needs_one_comparison():
    cyc = run_to_steady_state(NOMINAL, DEFAULT_INITIAL_STATE)
    again = run_to_steady_state(NOMINAL, cyc.final_state)
    assert again.warmup_cycles == 1


def test_collapsed_resistance_is_reported():
    p = NOMINAL.replace(R_s=1e-6)
    with pytest.raises(SolverError):
        run_to_steady_state(p, DEFAULT_INITIAL_STATE, SolverConfig(max_warmup_cycles=5))


def test_error_types():
    with pytest.raises(NotConverged):
        run_to_steady_state(NOMINAL, DEFAULT_INITIAL_STATE, SolverConfig(max_warmup_cycles=1, steady_tol=1e-15))
    theta = NOMINAL.to_array()[None, :]
    _, status, fail_t = integrate_batch(theta, np.array([[np.nan, 80.0, 8.0]]), 10, SolverConfig())
    assert status[0] != 0 and np.isfinite(fail_t[0])
    with pytest.raises((SolverDiverged, NonPhysiological)):
        integrate(NOMINAL.replace(E_max=50.0, Z_ao=1e-5), InternalState(3.6, 80, 8, 11.0), 2.0,
                  SolverConfig(dt_output=0.01))


def test_steady_state_at_phase():
    state, t0 = steady_state_at(NOMINAL, 0.8)
    assert t0 == pytest.approx(0.8)
    cyc = run_to_steady_state(NOMINAL, DEFAULT_INITIAL_STATE)
    assert np.array_equal(state.to_array(), cyc.samples[800])
