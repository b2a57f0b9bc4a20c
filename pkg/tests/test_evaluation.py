import math

import numpy as np
import pytest

from idtdetect.data import Dataset, gen_gauss_mixture_stream, gen_sine_stream
from idtdetect.evaluation import (
    COST_GRID,
    RunConfig,
    auc,
    avg_log_loss_curve,
    evaluate,
    experiment_defaults,
    final_log_loss,
    roc_point,
    roc_sweep,
    roc_sweep_reference,
    run_once,
    sweep_scores,
)
from idtdetect.pipeline import RoundOutput
from idtdetect.threshold import ANOMALY, NORMAL


def outputs(losses):
    return [RoundOutput(t, 0.5, 0.5, NORMAL, NORMAL if v is not None else ANOMALY, v)
            for t, v in enumerate(losses, start=1)]


class TestLossCurve:
    def test_constant(self):
        np.testing.assert_allclose(avg_log_loss_curve(outputs([1.0, 1.0, 1.0])), [1, 1, 1])

    def test_anomalous_round_counts_zero(self):
        np.testing.assert_allclose(avg_log_loss_curve(outputs([2.0, None, 4.0])), [2, 1, 2])

    def test_single_round(self):
        np.testing.assert_allclose(avg_log_loss_curve(outputs([3.5])), [3.5])

    def test_trace_form(self):
        log_p = np.array([-2.0, -9.0, -4.0])
        labels = np.array([NORMAL, ANOMALY, NORMAL])
        assert final_log_loss(log_p, labels) == pytest.approx(2.0)


class TestAUC:
    def test_diagonal(self):
        assert auc([(0.3, 0.3), (0.7, 0.7)]) == pytest.approx(0.5)

    def test_perfect_corner(self):
        assert auc([(0.0, 1.0)]) == pytest.approx(1.0)

    def test_two_points(self):
        # trapezoids through (0,0), (0.2,0.6), (0.5,0.9), (1,1)
        assert auc([(0.5, 0.9), (0.2, 0.6)]) == pytest.approx(0.76)

    def test_ignores_nan_and_duplicates(self):
        assert auc([(0.2, 0.6), (0.2, 0.6), (math.nan, 0.3)]) == pytest.approx(auc([(0.2, 0.6)]))

    def test_roc_point(self):
        dec = np.array([ANOMALY, ANOMALY, NORMAL, NORMAL, ANOMALY])
        lab = np.array([ANOMALY, NORMAL, NORMAL, ANOMALY, ANOMALY])
        assert roc_point(dec, lab) == pytest.approx((0.5, 2 / 3))


class TestSweep:
    def test_fast_sweep_matches_full_runs(self):
        ds = gen_gauss_mixture_stream(3, 150)
        costs = np.array([0.0, 0.1, 0.35, 0.6, 0.99])
        for cfg in (RunConfig(algo="itan", seed=3), RunConfig(algo="wkde", seed=3),
                    RunConfig(algo="ml", seed=3, feedback_prob=0.5)):
            fast = roc_sweep(ds, cfg, costs)
            ref = roc_sweep_reference(ds, cfg, costs)
            np.testing.assert_array_equal(np.column_stack([fast.fpr, fast.tpr]), ref)

    def test_free_false_alarms_raise_fpr(self):
        ds = gen_gauss_mixture_stream(1, 1000)
        res = roc_sweep(ds, RunConfig())
        assert res.fpr[0] == res.fpr.max()
        assert res.fpr[0] > np.median(res.fpr)

    def test_random_scorer_is_chance(self):
        aucs = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            labels = np.where(rng.random(1000) < 0.1, ANOMALY, NORMAL)
            scores = rng.uniform(size=1000)
            dec = sweep_scores(scores, labels, np.ones(1000, bool), COST_GRID, 1.0, 0.0, 1.0)
            aucs.append(auc([roc_point(row, labels) for row in dec]))
        assert np.mean(aucs) == pytest.approx(0.5, abs=0.05)

    def test_separable_scores(self):
        rng = np.random.default_rng(0)
        labels = np.where(rng.random(500) < 0.1, ANOMALY, NORMAL)
        # early steps are large enough to throw tau across G, so the classes
        # sit at its ends; with free false alarms tau then never errs
        scores = np.where(labels == ANOMALY, 0.0, 1.0)
        dec = sweep_scores(scores, labels, np.ones(500, bool), COST_GRID, 1.0, 0.0, 1.0)
        assert auc([roc_point(row, labels) for row in dec]) == pytest.approx(1.0)

    def test_sweep_shape(self):
        res = roc_sweep(gen_sine_stream(1, 100), RunConfig(algo="ml"))
        assert res.fpr.shape == res.tpr.shape == (100,)
        assert len(res.sorted_points()) == 100


class TestConfig:
    def test_feasible_sets(self):
        assert RunConfig().feasible_set() == (0.0, 1.0)
        assert RunConfig(log_space_threshold=True).feasible_set() == (-10.0, 0.0)
        assert RunConfig(g_lo=0.0, g_hi=0.5).feasible_set() == (0.0, 0.5)

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            RunConfig(algo="svm")

    def test_vehicle_defaults(self):
        cfg = RunConfig(**experiment_defaults("vehicle"))
        assert cfg.standardize == "running" and cfg.log_space_threshold
        assert experiment_defaults("gauss") == {}


def test_evaluate_summary():
    data = [gen_sine_stream(s, 120) for s in (1, 2)]
    res = evaluate(data, RunConfig(algo="wkde"))
    assert len(res["aucs"]) == 2 and len(res["roc"]) == 100 and len(res["loss_curve"]) == 120
    assert res["auc_mean"] == pytest.approx(np.mean(res["aucs"]))


def test_run_once_replays_bit_identically():
    ds = gen_gauss_mixture_stream(8, 300)
    a, _ = run_once(ds, RunConfig(feedback_prob=0.5, seed=8))
    b, _ = run_once(ds, RunConfig(feedback_prob=0.5, seed=8))
    assert [(o.p_hat, o.tau, o.decision) for o in a] == [(o.p_hat, o.tau, o.decision) for o in b]


def test_standardized_run():
    ds = Dataset(np.random.default_rng(0).normal(100, 30, size=(80, 3)),
                 np.full(80, NORMAL))
    out, _ = run_once(ds, RunConfig(standardize="running", log_space_threshold=True))
    assert all(np.isfinite(o.log_p_hat) for o in out)
