import numpy as np
import pytest

from idtdetect.baselines import MLDensity
from idtdetect.idt import TreeConfig
from idtdetect.pipeline import (
    StreamError,
    StreamRecord,
    ThresholdConfig,
    TreeMixtureDensity,
    density_trace,
    feedback_mask,
    make_records,
    read_outputs_csv,
    run_detector,
    write_outputs_csv,
)
from idtdetect.threshold import ANOMALY, NORMAL


def normal_stream(n, seed=0, feedback=True):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    labels = np.where(rng.random(n) < 0.1, ANOMALY, NORMAL)
    return make_records(X, labels, 1.0 if feedback else 0.0, seed)


def test_one_round():
    model = TreeMixtureDensity(2)
    out = run_detector(normal_stream(1), model)
    assert len(out) == 1 and model.n_nodes == 1
    assert out[0].t == 1


def test_sixteen_rounds_nine_nodes():
    model = TreeMixtureDensity(2, TreeConfig(beta=2.0))
    run_detector(normal_stream(16), model)
    assert model.n_nodes == 9


def test_no_feedback_keeps_threshold():
    out = run_detector(normal_stream(200, feedback=False), TreeMixtureDensity(2))
    assert {o.tau for o in out} == {0.5}


def test_round_fields():
    recs = normal_stream(50, seed=3)
    out = run_detector(recs, MLDensity(2))
    for rec, o in zip(recs, out):
        assert o.p_hat == pytest.approx(np.exp(o.log_p_hat))
        assert o.decision == (ANOMALY if o.p_hat < o.tau else NORMAL)
        assert (o.log_loss is None) == (rec.true_label == ANOMALY)
        assert o.zero_one is not None


def test_revealed_anomalies_are_not_learned():
    X = np.array([[0.0, 0.0], [50.0, 50.0], [0.1, 0.0]])
    recs = make_records(X, [NORMAL, ANOMALY, NORMAL])
    model = TreeMixtureDensity(2, TreeConfig(beta=100.0))
    run_detector(recs, model)
    assert model.tree.root.estimator.count == 2


def test_unrevealed_anomalies_are_learned():
    X = np.array([[0.0, 0.0], [50.0, 50.0], [0.1, 0.0]])
    recs = make_records(X, [NORMAL, ANOMALY, NORMAL], feedback_prob=0.0)
    model = TreeMixtureDensity(2, TreeConfig(beta=100.0))
    run_detector(recs, model)
    assert model.tree.root.estimator.count == 3


def test_dimension_mismatch():
    recs = [StreamRecord(np.zeros(2)), StreamRecord(np.zeros(3))]
    with pytest.raises(StreamError) as err:
        run_detector(recs, MLDensity(2))
    assert err.value.t == 2


def test_non_finite():
    recs = [StreamRecord(np.zeros(2)), StreamRecord(np.array([np.nan, 0.0]))]
    with pytest.raises(StreamError):
        run_detector(recs, MLDensity(2))


def test_feedback_requires_label():
    with pytest.raises(ValueError):
        StreamRecord(np.zeros(2), None, True)


def test_feedback_mask():
    assert feedback_mask(10, 1.0, 0).all()
    m = feedback_mask(10_000, 0.3, 5)
    assert abs(m.mean() - 0.3) < 0.02
    np.testing.assert_array_equal(m, feedback_mask(10_000, 0.3, 5))


def test_trace_matches_detector():
    recs = normal_stream(300, seed=4)
    out = run_detector(recs, TreeMixtureDensity(2))
    trace = density_trace(recs, TreeMixtureDensity(2))
    np.testing.assert_array_equal(trace, [o.log_p_hat for o in out])


def test_batch_log_density_matches_single():
    model = TreeMixtureDensity(2)
    run_detector(normal_stream(100, seed=2), model)
    X = np.random.default_rng(9).normal(size=(20, 2))
    np.testing.assert_allclose(model.log_density(X), [model.log_density(x) for x in X], rtol=1e-12)


def test_log_space_threshold():
    cfg = ThresholdConfig(lo=-10.0, hi=0.0, log_space=True)
    out = run_detector(normal_stream(100, seed=1), MLDensity(2), cfg)
    assert out[0].tau == -5.0
    assert all(-10.0 <= o.tau <= 0.0 for o in out)


def test_csv_round_trip(tmp_path):
    out = run_detector(normal_stream(40, seed=7), MLDensity(2))
    path = tmp_path / "rounds.csv"
    write_outputs_csv(out, path, {"algo": "ml", "seed": 7})
    assert path.read_text().startswith("# algo=ml\n# seed=7\n")
    back = read_outputs_csv(path)
    for a, b in zip(out, back):
        assert (a.t, a.p_hat, a.tau, a.decision, a.true_label, a.log_loss, a.zero_one) == \
               (b.t, b.p_hat, b.tau, b.decision, b.true_label, b.log_loss, b.zero_one)
