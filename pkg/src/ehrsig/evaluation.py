"""Discrimination and calibration statistics.

AUROC uses the tie-aware Mann-Whitney estimator; its variance and the
paired comparison use DeLong's structural components computed from
midranks (Sun & Xu's fast algorithm).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm, rankdata


class DegenerateWarning(UserWarning):
    """A statistic fell back to a degenerate special case."""


@dataclass(frozen=True)
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels)
        if s.shape != y.shape or s.ndim != 1:
            raise ValueError("scores and labels must be 1-D and of equal length")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be binary")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.int64))


@dataclass(frozen=True)
class MetricCI:
    point: float
    lower: float
    upper: float
    level: float
    method: str  # delong_logistic | wald | bootstrap_pivot
    note: str = ""

    def to_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper,
                "level": self.level, "method": self.method, "note": self.note}


def _split(scores, labels):
    ss = ScoredSet(scores, labels)
    pos = ss.scores[ss.labels == 1]
    neg = ss.scores[ss.labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes must be present")
    return pos, neg


def placement_values(scores, labels):
    """DeLong structural components ``(V10, V01)`` via midranks.

    ``V10[i]`` is the fraction of negatives ranked below positive ``i``
    (ties count one half); ``V01[j]`` the fraction of positives above
    negative ``j``.
    """
    pos, neg = _split(scores, labels)
    m, n = pos.size, neg.size
    r_all = rankdata(np.concatenate([pos, neg]))
    v10 = (r_all[:m] - rankdata(pos)) / n
    v01 = 1.0 - (r_all[m:] - rankdata(neg)) / m
    return v10, v01


def auroc(scores, labels) -> float:
    v10, _ = placement_values(scores, labels)
    return float(v10.mean())


def delong_variance(scores, labels) -> float:
    v10, v01 = placement_values(scores, labels)
    m, n = v10.size, v01.size
    if m < 2 or n < 2:
        raise ValueError("DeLong variance needs at least two instances per class")
    var = float(np.var(v10, ddof=1) / m + np.var(v01, ddof=1) / n)
    if var == 0.0:
        warnings.warn("AUROC variance is zero (perfect separation or full ties)", DegenerateWarning, stacklevel=2)
    return var


def wald_ci(point: float, se: float, level: float = 0.95, bounds=(0.0, 1.0), note: str = "") -> MetricCI:
    z = norm.ppf(0.5 + level / 2)
    lo, hi = point - z * se, point + z * se
    if bounds is not None:
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    return MetricCI(float(point), float(lo), float(hi), level, "wald", note)


def delong_ci_logistic(scores, labels, level: float = 0.95) -> MetricCI:
    """DeLong CI built on the logit scale and mapped back into (0, 1)."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    a = auroc(scores, labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        var = delong_variance(scores, labels)
    if a <= 0.0 or a >= 1.0:
        warnings.warn("AUROC at the boundary; using a clipped Wald interval", DegenerateWarning, stacklevel=2)
        return wald_ci(a, math.sqrt(var), level, note="auroc at boundary, wald fallback")
    z = norm.ppf(0.5 + level / 2)
    se = math.sqrt(var) / (a * (1 - a))
    centre = logit(a)
    return MetricCI(a, float(expit(centre - z * se)), float(expit(centre + z * se)), level, "delong_logistic")


@dataclass(frozen=True)
class PairedTest:
    auroc_a: float
    auroc_b: float
    z: float
    p_value: float
    note: str = ""


def delong_paired(scores_a, scores_b, labels) -> PairedTest:
    """Two-sided DeLong z-test for two correlated AUROCs."""
    va10, va01 = placement_values(scores_a, labels)
    vb10, vb01 = placement_values(scores_b, labels)
    m, n = va10.size, va01.size
    if m < 2 or n < 2:
        raise ValueError("DeLong test needs at least two instances per class")
    diff = va10.mean() - vb10.mean()
    d10 = va10 - vb10
    d01 = va01 - vb01
    var = np.var(d10, ddof=1) / m + np.var(d01, ddof=1) / n
    a, b = float(va10.mean()), float(vb10.mean())
    if var <= 0.0:
        if diff == 0.0:
            return PairedTest(a, b, 0.0, 1.0, "zero variance, zero difference")
        warnings.warn("zero variance with nonzero AUROC difference", DegenerateWarning, stacklevel=2)
        return PairedTest(a, b, math.copysign(math.inf, diff), 0.0, "zero variance, nonzero difference")
    z = diff / math.sqrt(var)
    return PairedTest(a, b, float(z), float(2 * norm.sf(abs(z))))


def delong_paired_test(scores_a, scores_b, labels) -> float:
    return delong_paired(scores_a, scores_b, labels).p_value


def calibration_curve_loess(probs, labels, frac: float = 0.75) -> np.ndarray:
    """Locally weighted linear fit of outcome on predicted probability
    (tricube weights, no robustness iterations), evaluated at each input."""
    from statsmodels.nonparametric.smoothers_lowess import lowess

    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if np.ptp(p) == 0:
        return np.full(p.shape, y.mean())
    return lowess(y, p, frac=frac, it=0, delta=0.0, return_sorted=False)


def ici(probs, labels, frac: float = 0.75) -> float:
    """Integrated calibration index: mean |smoothed(p) - p|."""
    p = np.asarray(probs, dtype=np.float64)
    if p.size < 10:
        raise ValueError("ICI needs at least 10 instances")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    smooth = calibration_curve_loess(p, labels, frac)
    return float(np.mean(np.abs(smooth - p)))


def cross_entropy(probs, labels, eps: float = 1e-15) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), eps, 1 - eps)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def bootstrap_pivot_ci(
    metric_fn: Callable,
    scores,
    labels,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    bounds=(-math.inf, math.inf),
    needs_both_classes: bool = False,
) -> MetricCI:
    """Basic (pivot) bootstrap interval ``[2t - q_hi, 2t - q_lo]``.

    Resamples containing a single class are redrawn when
    ``needs_both_classes`` is set, up to ``10 * B`` draws in total.
    """
    if B < 100:
        raise ValueError("B must be >= 100")
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n = s.size
    point = float(metric_fn(s, y))
    rng = np.random.default_rng(seed)
    stats = []
    draws = 0
    while len(stats) < B:
        draws += 1
        if draws > 10 * B:
            raise RuntimeError("too many single-class bootstrap resamples")
        idx = rng.integers(0, n, size=n)
        yb = y[idx]
        if needs_both_classes and (yb.min() == yb.max()):
            continue
        stats.append(metric_fn(s[idx], yb))
    stats = np.asarray(stats, dtype=np.float64)
    alpha = 1 - level
    q_lo, q_hi = np.quantile(stats, [alpha / 2, 1 - alpha / 2])
    lo = min(max(2 * point - q_hi, bounds[0]), bounds[1])
    hi = min(max(2 * point - q_lo, bounds[0]), bounds[1])
    return MetricCI(point, float(lo), float(hi), level, "bootstrap_pivot")


@dataclass(frozen=True)
class PointMetrics:
    recall: float
    specificity: float
    precision: float
    precision_defined: bool = True

    def to_dict(self) -> dict:
        return {"recall": self.recall, "specificity": self.specificity,
                "precision": self.precision, "precision_defined": self.precision_defined}


def point_metrics(scores, labels, threshold: float) -> PointMetrics:
    """Recall, specificity and precision with ``score >= threshold`` positive."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    tn = int(np.sum(~pred & ~y))
    fn = int(np.sum(~pred & y))
    recall = tp / (tp + fn) if tp + fn else math.nan
    spec = tn / (tn + fp) if tn + fp else math.nan
    if tp + fp == 0:
        return PointMetrics(recall, spec, math.nan, False)
    return PointMetrics(recall, spec, tp / (tp + fp), True)


def evaluation_report(
    predictions: dict,
    labels,
    B: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    threshold: float = 0.5,
    external: dict | None = None,
) -> dict:
    """Table-style report over several models scored on the same instances.

    ``predictions`` maps model name to predicted probabilities. ``external``
    optionally maps names to binary predictions from other algorithms, for
    which only point metrics are reported.
    """
    y = np.asarray(labels).astype(np.int64)
    names = list(predictions)
    models = {}
    for i, name in enumerate(names):
        p = np.asarray(predictions[name], dtype=np.float64)
        models[name] = {
            "auroc_delong": delong_ci_logistic(p, y, level).to_dict(),
            "auroc_bootstrap": bootstrap_pivot_ci(auroc, p, y, B, level, seed + 3 * i,
                                                  bounds=(0, 1), needs_both_classes=True).to_dict(),
            "ici": bootstrap_pivot_ci(ici, p, y, B, level, seed + 3 * i + 1, bounds=(0, 1)).to_dict(),
            "cross_entropy": bootstrap_pivot_ci(cross_entropy, p, y, B, level, seed + 3 * i + 2,
                                                bounds=(0, math.inf)).to_dict(),
            "point_metrics": point_metrics(p, y, threshold).to_dict(),
        }
    pmat = [[delong_paired_test(predictions[a], predictions[b], y) for b in names] for a in names]
    report = {
        "n": int(y.size),
        "n_positive": int(y.sum()),
        "level": level,
        "bootstrap_samples": B,
        "threshold": threshold,
        "models": models,
        "delong_pvalues": {"models": names, "matrix": pmat},
    }
    if external:
        report["external"] = {
            k: point_metrics(np.asarray(v, dtype=np.float64), y, 0.5).to_dict() for k, v in external.items()
        }
    return report
