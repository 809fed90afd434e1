"""Hypothesis strategies shared by the property suites."""

import numpy as np
from hypothesis import strategies as st

from cardio_ukf.model import NOMINAL, InternalState, ParameterVector


@st.composite
def parameter_vectors(draw):
    """Vectors inside the sampling box, with the ordering constraints kept."""
    nom = NOMINAL.to_array()
    f = [draw(st.floats(0.4, 1.6)) for _ in nom]
    v = nom * np.array(f)
    if v[0] >= v[1]:
        v[0], v[1] = v[1], v[0]
    if v[0] == v[1]:
        v[1] += 1e-3
    v[1] = min(v[1], 1.0)
    return ParameterVector.from_array(v)


@st.composite
def internal_states(draw):
    return InternalState(
        p_lv=draw(st.floats(0.0, 250.0)),
        p_sa=draw(st.floats(5.0, 250.0)),
        p_sv=draw(st.floats(0.0, 40.0)),
        V_lv=draw(st.floats(11.0, 300.0)),
    )


@st.composite
def spd_matrices(draw, n):
    """Random SPD matrix with condition number at most ~1e6."""
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eig = 10.0 ** rng.uniform(-3, 3, size=n)
    return (q * eig) @ q.T
