import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from ehrsig.explain import (
    INERT,
    PROTECTIVE,
    ROOT_CAUSE,
    ShapExplanation,
    global_importance,
    importance_distribution,
    linear_shap,
    root_cause_report,
    shap_matrix,
    waterfall_data,
)
from ehrsig.supervised import LogisticModel, fit_enet_logistic


def model(w, b=0.0):
    w = np.asarray(w, dtype=float)
    return LogisticModel(w, b, tuple(f"f{j}" for j in range(w.size)))


def explanation(phi):
    phi = np.asarray(phi, dtype=float)
    return ShapExplanation(0.0, phi, np.zeros_like(phi), float(phi.sum()), tuple(f"f{j}" for j in range(phi.size)),
                           np.sign(phi).astype(int))


def test_linear_shap_examples():
    e = linear_shap(model([2.0, -1.0]), [1.0, 1.0], [0.0, 0.0])
    np.testing.assert_array_equal(e.phi, [2.0, -1.0])
    mu = np.array([0.3, -0.7])
    e = linear_shap(model([2.0, -1.0], 0.4), mu, mu)
    assert np.all(e.phi == 0) and e.output == e.base_value
    with pytest.raises(ValueError):
        linear_shap(model([1.0]), [1.0, 2.0], [0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10_000))
def test_local_accuracy(d, seed):
    rng = np.random.default_rng(seed)
    m = model(rng.standard_normal(d) * (rng.random(d) < 0.6), rng.standard_normal())
    x, mu = rng.standard_normal(d) * 3, rng.standard_normal(d)
    e = linear_shap(m, x, mu)
    np.testing.assert_allclose(e.phi, m.weights * (x - mu), rtol=0, atol=0)
    assert abs(e.base_value + e.phi.sum() - m.decision_function(x[None, :])[0]) <= 1e-10


def test_global_importance():
    m = model([1.0, 0.0, -2.0])
    X = np.array([[1.0, 5.0, 0.0], [-1.0, -3.0, 1.0]])
    imp = global_importance(m, X, [0.0, 0.0, 0.5])
    assert imp[0] == 1.0 and imp[1] == 0.0 and imp[2] == 1.0
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 3))
    mu = X.mean(axis=0)
    brute = np.mean([np.abs(linear_shap(m, x, mu).phi) for x in X], axis=0)
    np.testing.assert_allclose(global_importance(m, X, mu), brute, atol=1e-12)
    np.testing.assert_allclose(shap_matrix(m, X, mu)[5], linear_shap(m, X[5], mu).phi)


def test_importance_distribution_constant_train_fn():
    m = model([1.0, -1.0])
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 2))
    y = rng.integers(0, 2, 50)
    dist = importance_distribution(lambda Xb, yb: m, (X, y), X[:10], B=20, seed=0)
    # the background is the resample mean, so only the refit is constant here
    assert dist.samples.shape == (20, 2)
    fixed = importance_distribution(lambda Xb, yb: m, (np.ones((50, 2)), y), np.ones((10, 2)), B=20)
    assert np.all(fixed.samples == 0)
    assert dist.to_dict()["B"] == 20


def test_importance_distribution_dominant_feature_and_determinism():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((300, 5))
    y = (rng.random(300) < 1 / (1 + np.exp(-2.5 * X[:, 0]))).astype(int)

    def train(Xb, yb):
        return fit_enet_logistic(Xb, yb, 0.05, 0.01)

    a = importance_distribution(train, (X, y), X[:50], B=100, seed=3)
    b = importance_distribution(train, (X, y), X[:50], B=100, seed=3)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.nonzero_frequency[0] >= 0.95


def test_importance_distribution_skips_and_fails():
    m = model([1.0])
    X = np.arange(40.0)[:, None]
    y = np.r_[np.zeros(20), np.ones(20)]
    calls = {"n": 0}

    def flaky(Xb, yb):
        calls["n"] += 1
        if calls["n"] % 20 == 0:
            raise ValueError("boom")
        return m

    dist = importance_distribution(flaky, (X, y), X, B=40, seed=0)
    assert dist.skipped == 2 and dist.samples.shape[0] == 38

    def broken(Xb, yb):
        raise ValueError("always")

    with pytest.raises(RuntimeError, match="failed"):
        importance_distribution(broken, (X, y), X, B=20)


def test_root_cause_classification():
    rep = root_cause_report(explanation([0.5, -0.2, 0.0]))
    assert [r.classification for r in rep] == [ROOT_CAUSE, PROTECTIVE, INERT]
    assert all(r.classification == INERT for r in root_cause_report(explanation([0, 0, 0])))
    phi = np.array([0.1, -0.4, 0.3, -0.05])
    a = root_cause_report(explanation(phi))
    b = root_cause_report(explanation(2 * phi))
    assert [(r.feature, r.classification) for r in a] == [(r.feature, r.classification) for r in b]
    assert [r.feature for r in a] == ["f1", "f2", "f0", "f3"]
    banded = root_cause_report(explanation(phi), tau_inert=0.08)
    assert banded[-1].classification == INERT and banded[-2].classification == ROOT_CAUSE


def test_waterfall():
    e = explanation([3.0, 0.1, -0.1])
    steps = waterfall_data(e, top_m=1)
    assert steps[0][:3] == ("f0", 3.0, 3.0)
    assert steps[1][1] == pytest.approx(0.0, abs=1e-15)
    full = waterfall_data(e, top_m=5)
    assert len(full) == 3 and full[-1][2] == e.output
    with pytest.raises(ValueError):
        waterfall_data(e, top_m=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 25), st.integers(0, 1000))
def test_waterfall_ends_at_log_odds(d, top_m, seed):
    rng = np.random.default_rng(seed)
    m = model(rng.standard_normal(d) * 5, rng.standard_normal())
    x, mu = rng.standard_normal(d) * 10, rng.standard_normal(d)
    steps = waterfall_data(linear_shap(m, x, mu), top_m)
    p = m.predict_proba(x[None, :])[0]
    assert expit(steps[-1][2]) == pytest.approx(p, rel=1e-14, abs=1e-300)
    # the logit of a rounded p is only accurate to ~eps / min(p, 1 - p)
    if 1e-5 < p < 1 - 1e-5:
        assert abs(steps[-1][2] - np.log(p / (1 - p))) <= 1e-10 * max(1.0, abs(steps[-1][2]))
    assert steps[-1][2] == m.decision_function(x[None, :])[0]
