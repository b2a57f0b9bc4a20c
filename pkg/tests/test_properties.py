"""Generative checks of the invariants each module promises."""

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from idtdetect.data import gen_gauss_mixture_stream
from idtdetect.evaluation import RunConfig, run_once, tree_config
from idtdetect.exp_family import SufficientStatsAccumulator, fit_moment_match, stat_dim, sufficient_stats
from idtdetect.idt import IncrementalTree, TreeConfig
from idtdetect.mixture import eg_update, mixture_log_density, redistribute_on_split
from idtdetect.pipeline import TreeMixtureDensity, make_records, run_detector
from idtdetect.threshold import ANOMALY, NORMAL, CostPair, logistic_grad, logistic_loss, project

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
samples = st.integers(1, 4).flatmap(
    lambda d: arrays(np.float64, st.tuples(st.integers(d + 2, 40), st.just(d)), elements=finite))


@settings(max_examples=60, deadline=None)
@given(samples)
def test_moment_matching_equals_sample_moments(X):
    acc = SufficientStatsAccumulator(stat_dim(X.shape[1]))
    for x in X:
        acc.accumulate(sufficient_stats(x))
    cov = np.atleast_2d(np.cov(X.T, bias=True))
    assume(np.linalg.eigvalsh(cov).min() > 1e-6)
    m = fit_moment_match(acc, reg=0.0)
    scale = 1.0 + np.abs(X).max() ** 2
    np.testing.assert_allclose(m.mean, X.mean(axis=0), atol=1e-9 * scale)
    np.testing.assert_allclose(m.covariance, cov, atol=1e-8 * scale)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_eg_stays_on_simplex(n, seed, theta):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n))
    for _ in range(250):
        f = rng.exponential(size=n) * (rng.random(n) < 0.8)
        p = float(w @ f)
        if p <= 0:
            continue
        w = eg_update(w, f, p, theta)
        assert abs(w.sum() - 1.0) <= 1e-9 and np.all(w >= 0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(0, 1)), st.integers(0, 3), st.floats(0.0, 1.0))
def test_redistribution_conserves_weight(raw, parent, xi):
    w = np.concatenate([raw[:4], [0.0, 0.0]])
    out = redistribute_on_split(w, parent, (4, 5), xi)
    assert abs(out.sum() - w.sum()) <= 1e-12 and np.all(out >= 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_tree_split_conserves_weight_and_partitions(seed, leaves_only, seeded):
    rng = np.random.default_rng(seed)
    tree = IncrementalTree(2, TreeConfig(split_leaves_only=leaves_only, seed_child_centroids=seeded))
    for t in range(1, 130):
        tree.observe(rng.normal(size=2) * 2)
        before = tree.weights().sum()
        tree.maybe_grow(t)
        assert abs(tree.weights().sum() - before) <= 1e-12
    g = np.linspace(-6, 6, 61)
    grid = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    for node in tree.nodes.values():
        inside = np.array([node.contains(x) for x in grid])
        for left, right in node.children:
            in_l = np.array([tree.nodes[left].contains(x) for x in grid[inside]])
            in_r = np.array([tree.nodes[right].contains(x) for x in grid[inside]])
            assert np.all(in_l ^ in_r)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([2.0, 3.0]), st.integers(1, 300), st.integers(0, 1000))
def test_node_count_follows_schedule(beta, T, seed):
    rng = np.random.default_rng(seed)
    tree = IncrementalTree(2, TreeConfig(beta=beta))
    for t in range(1, T + 1):
        tree.observe(rng.normal(size=2))
        tree.maybe_grow(t)
    k = int(math.floor(math.log(T, beta) + 1e-9))
    assert len(tree) == 1 + 2 * k


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([ANOMALY, NORMAL]),
       st.floats(0.05, 5), st.floats(0.05, 5))
def test_logistic_gradient_matches_finite_differences(tau, p, d, c1, c_1):
    costs = CostPair(c1, c_1)
    h = 1e-6
    fd = (logistic_loss(tau + h, p, d, costs) - logistic_loss(tau - h, p, d, costs)) / (2 * h)
    an = logistic_grad(tau, p, d, costs)
    assert abs(fd - an) <= 1e-5 * max(abs(an), 1e-3)


@given(arrays(np.float64, 20, elements=finite), st.floats(-5, 0), st.floats(0.1, 5))
def test_projection_idempotent(x, lo, width):
    hi = lo + width
    once = project(x, lo, hi)
    np.testing.assert_array_equal(project(once, lo, hi), once)
    assert np.all((once >= lo) & (once <= hi))


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000))
def test_mixture_integrates_to_one(seed):
    ds = gen_gauss_mixture_stream(seed, 2000)
    normal = ds.X[ds.labels == NORMAL][:500]
    model = TreeMixtureDensity(2, tree_config(RunConfig()), RunConfig().theta, RunConfig().cov_reg)
    run_detector(make_records(normal, np.full(len(normal), NORMAL)), model)
    g = np.linspace(-7, 7, 561)
    grid = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    mass = np.exp(model.log_density(grid)).sum() * (g[1] - g[0]) ** 2
    assert abs(mass - 1.0) <= 0.02


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["itan", "wgmm", "wkde", "ml"]), st.floats(0.1, 1.0))
def test_replay_is_bit_identical(seed, algo, fb):
    ds = gen_gauss_mixture_stream(seed, 150)
    cfg = RunConfig(algo=algo, seed=seed, feedback_prob=fb)
    a, _ = run_once(ds, cfg)
    b, _ = run_once(ds, cfg)
    assert [(o.p_hat, o.tau, o.decision) for o in a] == [(o.p_hat, o.tau, o.decision) for o in b]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(0, 1)),
       arrays(np.float64, 4, elements=st.floats(-800, 50)))
def test_mixture_log_density_finite(w, log_f):
    if w.sum() == 0:
        return
    assert np.isfinite(mixture_log_density(w / w.sum(), log_f))
