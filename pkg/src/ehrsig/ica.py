"""Linear ICA (``X = A S``) with the symmetric fixed-point FastICA iteration.

Whitening keeps the top ``k`` principal directions, so the unmixing matrix
``W K`` acts as the pseudoinverse of the mixing matrix on centred data.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import atomic_write_bytes, atomic_write_text

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ICAModel:
    mixing: np.ndarray  # p x k, columns are signatures
    unmixing: np.ndarray  # k x p
    row_means: np.ndarray
    n_iter: int = 0
    final_tol: float = float("nan")
    converged: bool = True
    seed: int = 0
    tol: float = 1e-4

    @property
    def k(self) -> int:
        return self.mixing.shape[1]

    @property
    def p(self) -> int:
        return self.mixing.shape[0]

    def save(self, path) -> None:
        """``<path>.npz`` with the matrices and a ``<path>.json`` manifest."""
        path = Path(path)
        buf = io.BytesIO()
        np.savez(buf, mixing=self.mixing, unmixing=self.unmixing, row_means=self.row_means)
        atomic_write_bytes(path.with_suffix(".npz"), buf.getvalue())
        manifest = {
            "k": self.k, "p": self.p, "seed": self.seed, "tol": self.tol,
            "n_iter": self.n_iter, "final_tol": self.final_tol, "converged": self.converged,
        }
        atomic_write_text(path.with_suffix(".json"), json.dumps(manifest, indent=1))

    @classmethod
    def load(cls, path) -> "ICAModel":
        path = Path(path)
        with np.load(path.with_suffix(".npz")) as z:
            mixing, unmixing, means = z["mixing"], z["unmixing"], z["row_means"]
        m = json.loads(path.with_suffix(".json").read_text())
        return cls(mixing, unmixing, means, m["n_iter"], m["final_tol"], m["converged"], m["seed"], m["tol"])


def _sym_decorrelate(W):
    s, u = np.linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ W


def fit_ica(X_std, k: int = 50, seed: int = 0, tol: float = 1e-4, max_iter: int = 1000) -> ICAModel:
    """FastICA with log-cosh contrast and symmetric decorrelation.

    Parameters
    ----------
    X_std : array, shape (p, n)
        Standardized cross-sections, one column per sample.
    k : int
        Number of sources; must not exceed the numerical rank of X.
    """
    X = np.asarray(getattr(X_std, "data", X_std), dtype=np.float64)
    p, n = X.shape
    if k < 1 or k > min(p, n):
        raise ValueError(f"k={k} must be in [1, min(p, n)={min(p, n)}]")
    means = X.mean(axis=1)
    Xc = X - means[:, None]
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    rank = int(np.sum(s > s[0] * max(p, n) * np.finfo(float).eps)) if s[0] > 0 else 0
    if k > rank:
        raise ValueError(f"k={k} exceeds the rank of X ({rank})")
    Uk, sk = U[:, :k], s[:k]
    K = (np.sqrt(n) / sk)[:, None] * Uk.T
    Z = K @ Xc

    rng = np.random.default_rng(seed)
    W = _sym_decorrelate(rng.standard_normal((k, k)))
    lim = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        G = np.tanh(W @ Z)
        g_prime = (1.0 - G * G).mean(axis=1)
        W1 = _sym_decorrelate(G @ Z.T / n - g_prime[:, None] * W)
        lim = float(np.max(np.abs(np.abs(np.einsum("ij,ij->i", W1, W)) - 1.0)))
        W = W1
        if lim < tol:
            break
    converged = lim < tol
    if not converged:
        log.warning("FastICA did not converge in %d iterations (tol reached %.2e)", max_iter, lim)

    unmix = W @ K
    mixing = (Uk * (sk / np.sqrt(n))) @ W.T
    # orient each signature so its largest loading is positive
    top = np.argmax(np.abs(mixing), axis=0)
    sign = np.sign(mixing[top, np.arange(k)])
    sign[sign == 0] = 1.0
    mixing = mixing * sign[None, :]
    unmix = unmix * sign[:, None]
    if not (np.all(np.isfinite(mixing)) and np.all(np.isfinite(unmix))):
        raise FloatingPointError("ICA produced non-finite values")
    return ICAModel(mixing, unmix, means, it, lim, bool(converged), seed, tol)


def express(model: ICAModel, x_std) -> np.ndarray:
    """Source expressions of standardized cross-section(s) ``x_std``."""
    x = np.asarray(x_std, dtype=np.float64)
    if x.shape[0] != model.p:
        raise ValueError(f"expected {model.p} channels, got {x.shape[0]}")
    if x.ndim == 1:
        return model.unmixing @ (x - model.row_means)
    return model.unmixing @ (x - model.row_means[:, None])


def reconstruct(model: ICAModel, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape[0] != model.k:
        raise ValueError(f"expected {model.k} sources, got {s.shape[0]}")
    out = model.mixing @ s
    return out + (model.row_means if s.ndim == 1 else model.row_means[:, None])


def source_matrix(model: ICAModel, X_std) -> np.ndarray:
    """Columnwise :func:`express`, shape (k, n)."""
    X = np.asarray(getattr(X_std, "data", X_std), dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return express(model, X)
