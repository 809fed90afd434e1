import numpy as np
import pytest

from cardio_ukf import experiments as ex
from cardio_ukf.exceptions import DomainError, FilterFailed, SigmaPropagationFailed
from cardio_ukf.model import NOMINAL, PARAM_NAMES
from cardio_ukf.solver import steady_state_at
from cardio_ukf.synth import NoiseSpec, SamplingConfig, build_ensemble
from cardio_ukf.ukf import AugmentedEstimate, FilterTrace

TAU = PARAM_NAMES.index("tau")


@pytest.fixture(scope="module")
def ensemble():
    return build_ensemble(SamplingConfig(seed=0), 3)


def test_accuracy_examples():
    t = NOMINAL.to_array()
    assert np.all(ex.accuracy(t, t) == 100.0)
    assert ex.accuracy(1.02 * t, t) == pytest.approx(np.full(10, 98.0))
    assert np.all(ex.accuracy(2.2 * t, t) == 0.0)
    with pytest.raises(DomainError):
        ex.accuracy(t, np.zeros(10))


def test_null_baseline(ensemble):
    null = ex.null_baseline(NOMINAL, ensemble, 98.0)
    assert null[TAU] == 100.0
    assert np.all(ex.null_baseline(NOMINAL, ensemble, 0.0) == 100.0)
    with pytest.raises(DomainError):
        ex.null_baseline(NOMINAL, [], 98.0)


def test_matrix_cardinality_and_resume(ensemble, tmp_path):
    recs = ex.run_matrix(ensemble, ["1", "4"], [0.01], cycles=2, out_dir=tmp_path)
    assert len(recs) == 6
    assert [r.spec.key for r in recs] == sorted(r.spec.key for r in recs)
    again = ex.run_matrix(ensemble, ["1", "4"], [0.01], cycles=2, out_dir=tmp_path)
    assert [r.to_dict() for r in again] == [r.to_dict() for r in recs]
    back = ex.read_records(tmp_path / "records.jsonl")
    assert [r.spec for r in back] == [r.spec for r in recs]
    assert all(np.array_equal(a.final_accuracy, b.final_accuracy) for a, b in zip(back, recs))


def test_failed_run_is_recorded(ensemble, monkeypatch):
    def boom(*args, **kw):
        tr = FilterTrace()
        tr.status, tr.message = "Failed", "iteration 0: sigma point 3 failed"
        raise FilterFailed(tr.message, tr, SigmaPropagationFailed("x", index=3))

    monkeypatch.setattr(ex, "run_filter", boom)
    rec = ex.execute_run(ex.RunSpec(ensemble[0].id, "1", cycles=2), ensemble[0])
    assert rec.status == ex.SOLVER_FAILED and rec.final_accuracy is None and rec.message
    assert ex.RunRecord.from_dict(rec.to_dict()).status == ex.SOLVER_FAILED


def test_seed_isolation(ensemble):
    a = ex.execute_run(ex.RunSpec(1, "1", NoiseSpec(0.05, 5, 0), cycles=2), ensemble[0])
    b = ex.execute_run(ex.RunSpec(1, "1", NoiseSpec(0.05, 5, 0), cycles=2), ensemble[0])
    c = ex.execute_run(ex.RunSpec(1, "1", NoiseSpec(0.05, 5, 9), cycles=2, seed=9), ensemble[0])
    assert np.array_equal(a.trace.means, b.trace.means)
    assert not np.array_equal(a.trace.means, c.trace.means)


def test_malformed_records_name_the_line(tmp_path):
    path = tmp_path / "records.jsonl"
    path.write_text('{"spec": {}}\n')
    with pytest.raises(DomainError, match="record 1"):
        ex.read_records(path)


def _fake(tid, subset, acc, kind="modified"):
    status = ex.CONVERGED if acc is not None else ex.DIVERGED
    acc = None if acc is None else np.full(10, float(acc))
    return ex.RunRecord(ex.RunSpec(tid, subset, filter_kind=kind), FilterTrace(), acc, status)


def test_heatmap_layout_and_denominator(ensemble, tmp_path):
    recs = [_fake(1, "1", 99), _fake(2, "1", 96), _fake(3, "1", None)]
    table = ex.heatmap(recs, 98.0, NOMINAL, ensemble)
    assert len(table.columns) == 16 and table.columns[-1] == "null"
    assert table.column("1")[0] == pytest.approx(100 / 3)
    assert np.isnan(table.column("1,4")).all()
    path = tmp_path / "h.csv"
    table.to_csv(path, "abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config-hash: abc" and lines[1].startswith('parameter,"1","2"')
    assert [l.split(",")[0] for l in lines[2:]] == list(PARAM_NAMES)


def test_success_rate_counts_failures():
    recs = [_fake(1, "1", 99), _fake(2, "1", None)]
    assert ex.success_rate(recs, 98.0)[0] == 50.0
    assert ex.mean_final_accuracy(recs)[0] == pytest.approx(49.5)


def test_comparison_summary(ensemble):
    recs = [_fake(i, "1,2,3,4", 99) for i in (1, 2)] + [_fake(i, "1,2,3,4", 50, "original") for i in (1, 2)]
    cmp = ex.summarize_comparison(recs, ensemble)
    assert cmp.success_98 == {"modified": 1.0, "original": 0.0}
    assert cmp.dominated.all()


def test_blind_state_zero_for_truth(ensemble):
    case = ensemble[0]
    state, _ = steady_state_at(case.params, 0.8)
    # the estimate sits at the end of a whole number of beats, i.e. back at the window phase
    mean = np.concatenate([state.to_array(), case.params.to_array()])
    tr = FilterTrace()
    tr.append(1, AugmentedEstimate(mean, np.eye(14)), 0.0)
    rec = ex.RunRecord(ex.RunSpec(case.id, "1,4", cycles=1), tr, np.full(10, 100.0), ex.CONVERGED)
    res = ex.blind_state_error(rec, case)
    assert res.rmse == pytest.approx(0.0, abs=1e-9)
    assert len(res.t) == int(round(case.params.tau / 0.001)) + 1


def test_convergence_summary(ensemble, tmp_path):
    recs = ex.run_matrix(ensemble[:2], ["1"], [0.01], cycles=3)
    s = ex.convergence_summary(recs, ensemble, "modified")
    assert s.mean.shape == (3, 10) and s.alive.tolist() == [2, 2, 2]
    s.to_csv(tmp_path / "c.csv", "x")
    assert (tmp_path / "c.csv").read_text().startswith("# config-hash: x")


def test_config_hash_stable():
    assert ex.config_hash({"a": 1, "b": [1, 2]}) == ex.config_hash({"b": [1, 2], "a": 1})
