import numpy as np

from cardio_ukf.model import NOMINAL
from cardio_ukf.solver import SolverConfig, integrate, steady_state_at


def _end(state, t0, dt, substeps, duration=0.3):
    cfg = SolverConfig(dt_output=dt, substeps=substeps)
    return integrate(NOMINAL, state, duration, cfg, t0=t0).samples[-1]


def test_rk4_fourth_order():
    # the valve max() kinks cap the order of any step straddling a valve
    # event, so the check runs over a stretch of filling with both valves fixed
    state, t0 = steady_state_at(NOMINAL, 0.5)
    dt = 0.002
    ref = _end(state, t0, dt, 16)
    e1 = np.max(np.abs(_end(state, t0, dt, 1) - ref))
    e2 = np.max(np.abs(_end(state, t0, dt, 2) - ref))
    assert 14.0 <= e1 / e2 <= 18.0


def test_integration_bit_identical():
    state, t0 = steady_state_at(NOMINAL, 0.8)
    a = integrate(NOMINAL, state, 2.0, SolverConfig(), t0=t0).samples
    b = integrate(NOMINAL, state, 2.0, SolverConfig(), t0=t0).samples
    assert a.tobytes() == b.tobytes()
