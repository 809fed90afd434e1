import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cardio_ukf import experiments as ex
from cardio_ukf.model import NOMINAL, all_subsets
from cardio_ukf.synth import NoiseSpec, SamplingConfig, build_ensemble, sample_target, rng_for
from cardio_ukf.ukf import FilterTrace

SUBSETS = all_subsets()


@st.composite
def record_sets(draw):
    n_targets = draw(st.integers(1, 6))
    subsets = draw(st.lists(st.sampled_from(SUBSETS), min_size=1, max_size=4, unique=True))
    recs = []
    for tid in range(1, n_targets + 1):
        for s in subsets:
            failed = draw(st.booleans()) and draw(st.booleans())
            acc = None if failed else np.array(draw(st.lists(st.floats(0, 100), min_size=10, max_size=10)))
            status = ex.DIVERGED if failed else ex.CONVERGED
            recs.append(ex.RunRecord(ex.RunSpec(tid, s), FilterTrace(), acc, status))
    targets = [sample_target(SamplingConfig(), rng_for(0, 0, i)) for i in range(n_targets)]
    return recs, targets


@given(record_sets())
def test_heatmap_monotone_in_threshold(data):
    recs, targets = data
    cells = [ex.heatmap(recs, thr, NOMINAL, targets).cells for thr in (98.0, 95.0, 90.0)]
    for tight, loose in zip(cells, cells[1:]):
        m = ~np.isnan(tight)
        assert np.array_equal(m, ~np.isnan(loose))
        assert np.all(tight[m] <= loose[m])
        assert np.all((loose[m] >= 0) & (loose[m] <= 100))


@given(st.lists(st.floats(0.01, 100), min_size=10, max_size=10),
       st.lists(st.floats(0.01, 100), min_size=10, max_size=10), st.floats(1e-3, 1e3))
def test_accuracy_scale_invariant(est, target, c):
    a = ex.accuracy(np.array(est), np.array(target))
    b = ex.accuracy(c * np.array(est), c * np.array(target))
    assert np.allclose(a, b, atol=1e-9)


def test_full_run_bit_identical():
    case = build_ensemble(SamplingConfig(seed=0), 1)[0]
    spec = ex.RunSpec(case.id, "1", NoiseSpec(0.01, 5, 0), "modified", 100, 0)
    a = ex.execute_run(spec, case)
    b = ex.execute_run(spec, case)
    assert a.status == ex.CONVERGED and len(a.trace) == 100
    assert a.trace.means.tobytes() == b.trace.means.tobytes()
    assert a.trace.cov_diags.tobytes() == b.trace.cov_diags.tobytes()
    assert a.final_accuracy.tobytes() == b.final_accuracy.tobytes()
