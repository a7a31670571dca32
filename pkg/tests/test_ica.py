import numpy as np
import pytest

from ehrsig.ica import ICAModel, express, fit_ica, reconstruct, source_matrix
from ehrsig.synthgen import recovery_score

LAPLACE = 1 / np.sqrt(2)


def _mixture(p, k, n, seed):
    rng = np.random.default_rng(seed)
    S = rng.laplace(0, LAPLACE, size=(k, n))
    A = rng.standard_normal((p, k))
    return A @ S, S, A


@pytest.fixture(scope="module")
def fitted():
    X, S, _ = _mixture(10, 3, 20000, 0)
    return fit_ica(X, k=3, seed=0), X, S


def test_three_laplace_sources_recovered(fitted):
    model, X, S = fitted
    assert model.converged
    R = source_matrix(model, X)
    C = np.abs(np.corrcoef(R, S)[:3, 3:])
    assert np.all(C.max(axis=1) >= 0.99)
    assert recovery_score(R, S) >= 0.99


def test_matches_reference_fastica(fitted):
    sklearn = pytest.importorskip("sklearn.decomposition")
    model, X, _ = fitted
    ref = sklearn.FastICA(n_components=3, whiten="unit-variance", fun="logcosh", random_state=0,
                          max_iter=1000, tol=1e-4).fit_transform(X.T).T
    assert recovery_score(source_matrix(model, X), ref) >= 0.999


def test_single_replicated_source():
    rng = np.random.default_rng(1)
    s = rng.laplace(0, 1, 5000)
    X = np.outer([1.0, 2.0, -0.5, 3.0], s)
    model = fit_ica(X, k=1)
    assert abs(np.corrcoef(source_matrix(model, X)[0], s)[0, 1]) >= 0.999


def test_gaussian_sources_stay_finite():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((6, 3)) @ rng.standard_normal((3, 2000))
    model = fit_ica(X, k=3, max_iter=5)
    assert np.all(np.isfinite(model.mixing)) and np.all(np.isfinite(model.unmixing))
    assert model.n_iter <= 5


def test_non_convergence_is_flagged(caplog):
    X, _, _ = _mixture(8, 4, 3000, 3)
    model = fit_ica(X, k=4, max_iter=1, tol=1e-12)
    assert not model.converged
    assert "did not converge" in caplog.text


def test_k_above_rank_is_an_error():
    X, _, _ = _mixture(10, 3, 1000, 4)
    with pytest.raises(ValueError, match="rank"):
        fit_ica(X, k=4)
    with pytest.raises(ValueError):
        fit_ica(X, k=11)


def test_projection_identities(fitted):
    model, _, _ = fitted
    rng = np.random.default_rng(5)
    s0 = rng.standard_normal(3)
    np.testing.assert_allclose(express(model, reconstruct(model, s0)), s0, atol=1e-8)
    np.testing.assert_allclose(express(model, model.row_means), 0, atol=1e-12)
    np.testing.assert_allclose(reconstruct(model, np.zeros(3)), model.row_means, atol=0)
    x = rng.standard_normal(10)
    Q, _ = np.linalg.qr(model.mixing)
    proj = Q @ (Q.T @ (x - model.row_means))
    np.testing.assert_allclose(model.mixing @ express(model, x), proj, atol=1e-8)


def test_dimension_mismatch(fitted):
    model, _, _ = fitted
    with pytest.raises(ValueError):
        express(model, np.zeros(9))
    with pytest.raises(ValueError):
        reconstruct(model, np.zeros(2))


def test_reconstruction_error_bounded_by_svd_truncation():
    rng = np.random.default_rng(6)
    X, _, _ = _mixture(12, 4, 4000, 6)
    X = X + 0.3 * rng.standard_normal(X.shape)
    model = fit_ica(X, k=4)
    Xc = X - X.mean(axis=1, keepdims=True)
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    trunc = np.linalg.norm(Xc - (U[:, :4] * s[:4]) @ Vt[:4]) / np.linalg.norm(Xc)
    Xh = reconstruct(model, source_matrix(model, X))
    err = np.linalg.norm(X - Xh) / np.linalg.norm(Xc)
    assert err <= trunc + 1e-6


def test_sources_uncorrelated_on_fitting_data(fitted):
    model, X, _ = fitted
    C = np.corrcoef(source_matrix(model, X))
    assert np.max(np.abs(C - np.diag(np.diag(C)))) < 0.05


def test_source_matrix_columnwise(fitted):
    model, X, _ = fitted
    cols = X[:, :50]
    perm = np.random.default_rng(7).permutation(50)
    np.testing.assert_allclose(source_matrix(model, cols[:, perm]), source_matrix(model, cols)[:, perm])
    np.testing.assert_allclose(source_matrix(model, X[:, 0])[:, 0], express(model, X[:, 0]))


def test_largest_loading_positive(fitted):
    model, _, _ = fitted
    top = np.argmax(np.abs(model.mixing), axis=0)
    assert np.all(model.mixing[top, np.arange(model.k)] > 0)


def test_seed_determinism_and_persistence(tmp_path, fitted):
    model, X, _ = fitted
    again = fit_ica(X, k=3, seed=0)
    np.testing.assert_array_equal(model.mixing, again.mixing)
    model.save(tmp_path / "m")
    loaded = ICAModel.load(tmp_path / "m")
    np.testing.assert_array_equal(loaded.unmixing, model.unmixing)
    assert loaded.converged == model.converged and loaded.k == 3
