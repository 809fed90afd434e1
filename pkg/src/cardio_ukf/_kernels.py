"""Compiled RK4 integration of the circulation for a batch of parameter sets.

The ODE state is ``(V_lv, p_sa, p_sv)``; ``p_lv`` is recovered from the
elastance at each output sample. Output columns follow ``STATE_NAMES``.
"""

import math

import numpy as np
from numba import njit

OK = 0
DIVERGED = 1
NONPHYSIOLOGICAL = 2

# column indices into the parameter array, in ParameterVector order
_TES, _TEP, _RMV, _ZAO, _RS, _CSA, _CSV, _EMAX, _EMIN, _TAU = range(10)


@njit(cache=True)
def _elastance(t, th):
    tau = th[_TAU]
    t_es = th[_TES] * tau
    t_ep = th[_TEP] * tau
    tc = t % tau
    if tc < t_es:
        e = 0.5 * (1.0 - math.cos(math.pi * tc / t_es))
    elif tc < t_ep:
        e = 0.5 * (1.0 + math.cos(math.pi * (tc - t_es) / (t_ep - t_es)))
    else:
        e = 0.0
    return th[_EMIN] + (th[_EMAX] - th[_EMIN]) * e


@njit(cache=True)
def _rhs(t, V, psa, psv, th, v0, out):
    plv = _elastance(t, th) * (V - v0)
    q_mv = (psv - plv) / th[_RMV]
    if q_mv < 0.0:
        q_mv = 0.0
    q_ao = (plv - psa) / th[_ZAO]
    if q_ao < 0.0:
        q_ao = 0.0
    q_s = (psa - psv) / th[_RS]
    out[0] = q_mv - q_ao
    out[1] = (q_ao - q_s) / th[_CSA]
    out[2] = (q_s - q_mv) / th[_CSV]


@njit(cache=True)
def integrate_batch(theta, y0, t0, dt_out, n_out, substeps, v0, samples, status, fail_t):
    """Integrate every row of ``theta`` from ``y0`` (V, p_sa, p_sv) starting at time ``t0[row]``.

    ``samples`` has shape (n, n_out + 1, 4) and receives the initial point plus
    ``n_out`` outputs spaced ``dt_out``. ``status``/``fail_t`` report per row.
    """
    n = theta.shape[0]
    h = dt_out / substeps
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    for r in range(n):
        th = theta[r]
        t_start = t0[r]
        V = y0[r, 0]
        psa = y0[r, 1]
        psv = y0[r, 2]
        status[r] = OK
        fail_t[r] = np.nan
        samples[r, 0, 0] = _elastance(t_start, th) * (V - v0)
        samples[r, 0, 1] = psa
        samples[r, 0, 2] = psv
        samples[r, 0, 3] = V
        if V <= 0.0:
            status[r] = NONPHYSIOLOGICAL
            fail_t[r] = t_start
            continue
        for j in range(n_out):
            t_base = t_start + j * dt_out
            for s in range(substeps):
                t = t_base + s * h
                _rhs(t, V, psa, psv, th, v0, k1)
                _rhs(t + 0.5 * h, V + 0.5 * h * k1[0], psa + 0.5 * h * k1[1], psv + 0.5 * h * k1[2], th, v0, k2)
                _rhs(t + 0.5 * h, V + 0.5 * h * k2[0], psa + 0.5 * h * k2[1], psv + 0.5 * h * k2[2], th, v0, k3)
                _rhs(t + h, V + h * k3[0], psa + h * k3[1], psv + h * k3[2], th, v0, k4)
                V = V + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
                psa = psa + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
                psv = psv + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            t_next = t_start + (j + 1) * dt_out
            if not (math.isfinite(V) and math.isfinite(psa) and math.isfinite(psv)):
                status[r] = DIVERGED
                fail_t[r] = t_next
                break
            if V <= 0.0:
                status[r] = NONPHYSIOLOGICAL
                fail_t[r] = t_next
                break
            samples[r, j + 1, 0] = _elastance(t_next, th) * (V - v0)
            samples[r, j + 1, 1] = psa
            samples[r, j + 1, 2] = psv
            samples[r, j + 1, 3] = V
