import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from ehrsig.evaluation import (
    DegenerateWarning,
    auroc,
    bootstrap_pivot_ci,
    calibration_curve_loess,
    cross_entropy,
    delong_ci_logistic,
    delong_paired,
    delong_paired_test,
    delong_variance,
    evaluation_report,
    ici,
    point_metrics,
)


def naive_components(scores, labels):
    """O(n^2) placement values by explicit pair comparison."""
    s, y = np.asarray(scores, float), np.asarray(labels)
    pos, neg = s[y == 1], s[y == 0]
    psi = (pos[:, None] > neg[None, :]) + 0.5 * (pos[:, None] == neg[None, :])
    return psi.mean(axis=1), psi.mean(axis=0)


def naive_variance(scores, labels):
    v10, v01 = naive_components(scores, labels)
    return np.var(v10, ddof=1) / v10.size + np.var(v01, ddof=1) / v01.size


def gaussian_scores(n, delta, rng):
    y = np.r_[np.zeros(n // 2), np.ones(n - n // 2)].astype(int)
    return rng.standard_normal(n) + delta * y, y


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auroc([0.9, 0.2, 0.8, 0.1], [1, 0, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 500), st.integers(0, 10_000), st.booleans())
def test_fast_variance_matches_pairwise_oracle(n, seed, ties):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    y[2:4] = [0, 1]
    s = rng.standard_normal(n) + y
    if ties:
        s = np.round(s, 1)
    v10, _ = naive_components(s, y)
    assert auroc(s, y) == pytest.approx(v10.mean(), abs=1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        assert abs(delong_variance(s, y) - naive_variance(s, y)) <= 1e-12


def test_perfect_separation_has_zero_variance():
    with pytest.warns(DegenerateWarning):
        assert delong_variance([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 0.0


def test_duplicated_data_halves_variance():
    rng = np.random.default_rng(0)
    s, y = gaussian_scores(200, 1.0, rng)
    v1 = delong_variance(s, y)
    v2 = delong_variance(np.r_[s, s], np.r_[y, y])
    assert v2 == pytest.approx(v1 / 2, rel=0.25)
    assert v2 == pytest.approx(naive_variance(np.r_[s, s], np.r_[y, y]), abs=1e-12)


def test_logistic_ci_symmetry_and_nesting():
    s = np.array([1, 2, 3, 4, 1, 2, 3, 4], float)
    y = np.array([1, 0, 1, 0, 0, 1, 0, 1])
    ci = delong_ci_logistic(s, y)
    assert ci.point == 0.5
    assert 0.5 - ci.lower == pytest.approx(ci.upper - 0.5, abs=1e-6)
    rng = np.random.default_rng(1)
    s, y = gaussian_scores(100, 0.8, rng)
    wide, narrow = delong_ci_logistic(s, y, 0.95), delong_ci_logistic(s, y, 0.80)
    assert wide.lower < narrow.lower < narrow.point < narrow.upper < wide.upper


def test_boundary_auroc_falls_back_to_wald():
    with pytest.warns(DegenerateWarning):
        ci = delong_ci_logistic([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert ci.method == "wald" and ci.note
    assert 0 <= ci.lower <= ci.point <= ci.upper <= 1


@pytest.mark.slow
def test_logistic_ci_coverage():
    delta = 1.0
    true = norm.cdf(delta / math.sqrt(2))
    rng = np.random.default_rng(2)
    covered = 0
    for _ in range(1000):
        s, y = gaussian_scores(200, delta, rng)
        ci = delong_ci_logistic(s, y)
        covered += ci.lower <= true <= ci.upper
    assert 930 <= covered <= 970


def test_paired_identical_and_monotone_transform():
    rng = np.random.default_rng(3)
    s, y = gaussian_scores(80, 0.5, rng)
    assert delong_paired_test(s, s, y) == 1.0
    t = delong_paired(s, np.exp(3 * s), y)
    assert t.auroc_a == t.auroc_b and t.p_value == 1.0


def test_paired_zero_variance_nonzero_difference():
    y = np.array([1, 1, 0, 0])
    with pytest.warns(DegenerateWarning):
        t = delong_paired([0.9, 0.8, 0.2, 0.1], [0.1, 0.2, 0.8, 0.9], y)
    assert t.p_value == 0.0


@pytest.mark.slow
def test_paired_type_one_error():
    rng = np.random.default_rng(4)
    rejections = 0
    for _ in range(1000):
        y = rng.integers(0, 2, 200)
        a = y + rng.standard_normal(200)
        b = y + rng.standard_normal(200)
        rejections += delong_paired_test(a, b, y) < 0.05
    assert 30 <= rejections <= 70


def test_ici_examples():
    rng = np.random.default_rng(5)
    q = rng.uniform(0.1, 0.9, 5000)
    y = (rng.random(5000) < q).astype(int)
    assert ici(q, y) < 0.02
    assert ici(1 - q, y) > 0.3
    assert ici(np.full(100, 0.5), np.r_[np.zeros(50), np.ones(50)]) < 0.02
    with pytest.raises(ValueError):
        ici(np.full(9, 0.5), np.r_[np.zeros(4), np.ones(5)])


def test_loess_matches_direct_local_linear_fit():
    # tricube-weighted local linear regression at each point, nearest
    # ceil(frac * n) neighbours, computed directly
    rng = np.random.default_rng(6)
    p = np.sort(rng.random(60))
    y = (rng.random(60) < p).astype(float)
    frac = 0.75
    r = int(math.ceil(frac * p.size))
    ref = np.empty(p.size)
    for i, x0 in enumerate(p):
        d = np.abs(p - x0)
        h = np.sort(d)[r - 1]
        w = np.clip(1 - (d / h) ** 3, 0, None) ** 3
        Z = np.column_stack([np.ones_like(p), p - x0])
        beta = np.linalg.lstsq(Z * np.sqrt(w)[:, None], y * np.sqrt(w), rcond=None)[0]
        ref[i] = beta[0]
    np.testing.assert_allclose(calibration_curve_loess(p, y, frac), ref, atol=1e-8)


def test_cross_entropy_examples():
    assert cross_entropy(np.full(10, 0.5), np.r_[np.zeros(5), np.ones(5)]) == pytest.approx(math.log(2), abs=1e-12)
    assert cross_entropy([1.0, 0.0], [1, 0]) <= 1e-13
    assert cross_entropy([0.8, 0.4], [1, 0]) == pytest.approx((-math.log(0.8) - math.log(0.6)) / 2, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=50), st.integers(0, 1000))
def test_cross_entropy_non_negative(ps, seed):
    y = np.random.default_rng(seed).integers(0, 2, len(ps))
    assert cross_entropy(ps, y) >= 0


def test_pivot_degenerate_and_deterministic():
    ci = bootstrap_pivot_ci(lambda s, y: 0.7, np.arange(20.0), np.r_[np.zeros(10), np.ones(10)], B=200)
    assert ci.lower == ci.point == ci.upper == 0.7
    rng = np.random.default_rng(7)
    s, y = gaussian_scores(60, 1.0, rng)
    a = bootstrap_pivot_ci(auroc, s, y, B=300, seed=9, bounds=(0, 1), needs_both_classes=True)
    b = bootstrap_pivot_ci(auroc, s, y, B=300, seed=9, bounds=(0, 1), needs_both_classes=True)
    assert a == b
    assert 0 <= a.lower <= a.upper <= 1


def test_pivot_interval_formula():
    # replays the resampling stream to recompute the basic interval by hand
    rng = np.random.default_rng(8)
    s = rng.random(40)
    y = rng.integers(0, 2, 40)
    ci = bootstrap_pivot_ci(cross_entropy, s, y, B=500, seed=1)
    stats = []
    g = np.random.default_rng(1)
    for _ in range(500):
        idx = g.integers(0, 40, 40)
        stats.append(cross_entropy(s[idx], y[idx]))
    lo, hi = np.quantile(stats, [0.025, 0.975])
    assert ci.lower == pytest.approx(2 * ci.point - hi, abs=1e-15)
    assert ci.upper == pytest.approx(2 * ci.point - lo, abs=1e-15)


@pytest.mark.slow
def test_pivot_coverage_for_cross_entropy():
    def h(q):
        return -(q * math.log(q) + (1 - q) * math.log(1 - q))

    true = quad(h, 0.1, 0.9)[0] / 0.8  # expected CE of calibrated U(0.1, 0.9) predictions
    rng = np.random.default_rng(9)
    covered = 0
    for r in range(500):
        q = rng.uniform(0.1, 0.9, 500)
        y = (rng.random(500) < q).astype(int)
        ci = bootstrap_pivot_ci(cross_entropy, q, y, B=1000, seed=r, bounds=(0, math.inf))
        covered += ci.lower <= true <= ci.upper
    assert 460 <= covered <= 490


def test_point_metrics_examples():
    pm = point_metrics([0.9, 0.6, 0.4, 0.1], [1, 0, 1, 0], 0.5)
    assert (pm.recall, pm.specificity, pm.precision) == (0.5, 0.5, 0.5)
    pm = point_metrics([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0], 0.5)
    assert (pm.recall, pm.specificity, pm.precision) == (1, 1, 1)
    pm = point_metrics([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0], 0.05)
    assert (pm.recall, pm.specificity) == (1, 0)
    pm = point_metrics([0.1, 0.2], [1, 0], 0.5)
    assert not pm.precision_defined and math.isnan(pm.precision)


def test_evaluation_report_shape():
    rng = np.random.default_rng(10)
    y = rng.integers(0, 2, 120)
    preds = {"a": 1 / (1 + np.exp(-(2 * y - 1 + rng.standard_normal(120)))), "b": rng.random(120)}
    rep = evaluation_report(preds, y, B=200, seed=3, external={"rule": (y == 1).astype(float)})
    assert set(rep["models"]) == {"a", "b"}
    assert rep["delong_pvalues"]["matrix"][0][0] == 1.0
    assert rep["models"]["a"]["auroc_delong"]["point"] > rep["models"]["b"]["auroc_delong"]["point"]
    assert rep["external"]["rule"]["recall"] == 1.0
    assert evaluation_report(preds, y, B=200, seed=3) == evaluation_report(preds, y, B=200, seed=3)
