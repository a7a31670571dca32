"""Linear SHAP attributions, bootstrap importance and root-cause reports.

For a model linear in log-odds with independent features the Shapley
value of feature ``i`` is ``w_i * (x_i - mu_i)``, where ``mu`` are the
background means. A positive value marks the feature (for the signatures
representation: the latent source) as a root cause of the positive label,
a negative value as protective.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._util import derive_rng
from .supervised import LogisticModel

log = logging.getLogger(__name__)

ROOT_CAUSE = "root_cause"
PROTECTIVE = "protective"
INERT = "inert"


@dataclass(frozen=True)
class ShapExplanation:
    base_value: float
    phi: np.ndarray
    feature_values: np.ndarray
    output: float
    feature_ids: tuple
    coef_sign: np.ndarray
    representation: str = "channels"

    def to_dict(self) -> dict:
        return {
            "representation": self.representation,
            "base_value": self.base_value,
            "output": self.output,
            "features": [
                {"id": f, "phi": float(p), "value": float(v), "coef_sign": int(s)}
                for f, p, v, s in zip(self.feature_ids, self.phi, self.feature_values, self.coef_sign)
            ],
        }


def linear_shap(model: LogisticModel, x, background_means) -> ShapExplanation:
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(background_means, dtype=np.float64)
    if x.shape != model.weights.shape or mu.shape != model.weights.shape:
        raise ValueError("dimension mismatch between model, instance and background")
    phi = model.weights * (x - mu)
    base = float(model.intercept + model.weights @ mu)
    output = float(model.intercept + model.weights @ x)
    return ShapExplanation(base, phi, x, output, model.feature_ids, np.sign(model.weights).astype(int),
                           model.representation)


def shap_matrix(model: LogisticModel, X, background_means) -> np.ndarray:
    """Attributions for every row of ``X`` (n x d)."""
    X = np.asarray(X, dtype=np.float64)
    return (X - np.asarray(background_means)[None, :]) * model.weights[None, :]


def global_importance(model: LogisticModel, X_test, background_means) -> np.ndarray:
    """Mean |phi| per feature over the test rows, in log-odds units."""
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_test.ndim != 2 or X_test.shape[0] == 0:
        raise ValueError("X_test must be a non-empty (n, d) matrix")
    return np.abs(shap_matrix(model, X_test, background_means)).mean(axis=0)


@dataclass
class ImportanceDistribution:
    feature_ids: tuple
    samples: np.ndarray  # B x d
    skipped: int = 0

    @property
    def nonzero_frequency(self) -> np.ndarray:
        return (self.samples > 0).mean(axis=0)

    def to_dict(self) -> dict:
        freq = self.nonzero_frequency
        return {
            "B": int(self.samples.shape[0]),
            "skipped": self.skipped,
            "features": [
                {
                    "id": f,
                    "nonzero_frequency": float(freq[j]),
                    "mean": float(self.samples[:, j].mean()),
                    "median": float(np.median(self.samples[:, j])),
                    "q05": float(np.quantile(self.samples[:, j], 0.05)),
                    "q95": float(np.quantile(self.samples[:, j], 0.95)),
                }
                for j, f in enumerate(self.feature_ids)
            ],
            "samples": self.samples.tolist(),
        }


def importance_distribution(
    train_fn: Callable,
    train_data,
    X_test,
    B: int = 500,
    seed: int = 0,
    background: str = "train",
) -> ImportanceDistribution:
    """Bootstrap distribution of global importance.

    ``train_fn(X, y)`` must return a :class:`LogisticModel`. Each replicate
    refits on a resample of ``train_data = (X, y)`` and scores mean |phi|
    on the fixed ``X_test``, with the background means taken from the
    resample.
    """
    if B < 10:
        raise ValueError("B must be >= 10")
    X, y = (np.asarray(a) for a in train_data)
    n = X.shape[0]
    rows = []
    skipped = 0
    feature_ids = None
    for b in range(B):
        rng = derive_rng(seed, "importance", b)
        idx = rng.integers(0, n, size=n)
        try:
            model = train_fn(X[idx], y[idx])
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            skipped += 1
            log.debug("bootstrap refit %d failed: %s", b, exc)
            continue
        feature_ids = model.feature_ids
        rows.append(global_importance(model, X_test, X[idx].mean(axis=0)))
    if skipped > 0.1 * B:
        raise RuntimeError(f"{skipped} of {B} bootstrap refits failed")
    return ImportanceDistribution(tuple(feature_ids), np.vstack(rows), skipped)


@dataclass(frozen=True)
class RootCause:
    feature: str
    phi: float
    classification: str
    value: float
    coef_sign: int


def root_cause_report(explanation: ShapExplanation, tau_inert: float = 0.0) -> list:
    """Features ordered by |phi|, each classified as root cause, protective
    or inert; ties keep feature order."""
    out = []
    for j in np.argsort(-np.abs(explanation.phi), kind="stable"):
        phi = float(explanation.phi[j])
        if phi > tau_inert:
            cls = ROOT_CAUSE
        elif phi < -tau_inert:
            cls = PROTECTIVE
        else:
            cls = INERT
        out.append(RootCause(explanation.feature_ids[j], phi, cls, float(explanation.feature_values[j]),
                             int(explanation.coef_sign[j])))
    return out


def waterfall_data(explanation: ShapExplanation, top_m: int = 10) -> list:
    """Steps from the base value to the output: ``top_m`` largest |phi| then
    one residual step. Each entry is ``(feature, phi, cumulative, value)``."""
    if top_m < 1:
        raise ValueError("top_m must be >= 1")
    order = np.argsort(-np.abs(explanation.phi), kind="stable")
    shown = order[:top_m]
    rest = order[top_m:]
    steps = []
    cum = explanation.base_value
    for j in shown:
        cum += float(explanation.phi[j])
        steps.append((explanation.feature_ids[j], float(explanation.phi[j]), cum,
                      float(explanation.feature_values[j])))
    if rest.size:
        resid = float(explanation.phi[rest].sum())
        steps.append((f"{rest.size} other features", resid, cum + resid, float("nan")))
    # absorb summation-order rounding so the chart ends at the model output
    if steps:
        name, phi, _, val = steps[-1]
        steps[-1] = (name, phi, explanation.output, val)
    return steps
