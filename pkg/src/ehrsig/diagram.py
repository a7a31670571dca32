"""Signature description diagrams.

Expressions of a source are rescaled to standard deviation 0.5 (so about
95% fall in [-1, 1] for near-Gaussian sources) and the signature loadings
are rescaled reciprocally, leaving ``A S`` unchanged. Each top loading is
reported together with its effect in the original channel units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from html import escape

import numpy as np

from .ica import ICAModel
from .sampler import Standardizer, Transform

EXPRESSION_SD = 0.5
HIST_BINS = 50


@dataclass(frozen=True)
class Effect:
    """Change in original units for ``expression`` units of a source."""

    kind: str  # factor | additive | probability
    per_unit: float
    expression: float
    total: float

    def describe(self) -> str:
        if self.kind == "factor":
            return f"x{self.total:.4g} ({100 * (self.per_unit - 1):+.1f}% per unit)"
        if self.kind == "additive":
            return f"{self.total:+.4g}"
        return f"{self.total:+.3f} prob."


def back_transform_change(transform, loading: float, expression_units: float = 1.0, scale: float = 1.0) -> Effect:
    """Original-space effect of ``expression_units`` of a source whose
    standardized loading on the channel is ``loading``.

    ``scale`` is the channel's standardizer divisor (two standard
    deviations of the possibly logged values).
    """
    t = Transform(transform)
    if t is Transform.LOG_AFFINE:
        per_unit = math.exp(loading * scale)
        return Effect("factor", per_unit, expression_units, per_unit ** expression_units)
    if t is Transform.AFFINE:
        return Effect("additive", loading * scale, expression_units, expression_units * loading * scale)
    if t is Transform.IDENTITY:
        total = min(max(expression_units * loading, -1.0), 1.0)
        return Effect("probability", loading, expression_units, total)
    raise ValueError(f"unknown transform {transform!r}")  # pragma: no cover


@dataclass(frozen=True)
class DiagramEntry:
    channel: str
    loading: float
    normalized: float
    effect: Effect


@dataclass(frozen=True)
class SignatureDiagram:
    signature_id: int
    scale_factor: float  # expressions multiplied by this
    entries: tuple
    bin_edges: np.ndarray
    counts: np.ndarray
    expressions: np.ndarray
    loadings: np.ndarray  # rescaled column of A

    @property
    def log_counts(self) -> np.ndarray:
        return np.log1p(self.counts)

    def to_dict(self) -> dict:
        return {
            "signature_id": self.signature_id,
            "scale_factor": self.scale_factor,
            "entries": [
                {"channel": e.channel, "loading": e.loading, "normalized": e.normalized,
                 "effect": {"kind": e.effect.kind, "per_unit": e.effect.per_unit,
                            "expression": e.effect.expression, "total": e.effect.total,
                            "text": e.effect.describe()}}
                for e in self.entries
            ],
            "histogram": {"bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist(),
                          "log1p_counts": self.log_counts.tolist()},
        }


def rescale_signature(model: ICAModel, S_row, signature_index: int):
    """Return ``(factor, expressions, loadings)`` with expression SD 0.5."""
    s = np.asarray(S_row, dtype=np.float64)
    sd = s.std()
    factor = EXPRESSION_SD / sd if sd > 0 else 1.0
    return factor, s * factor, model.mixing[:, signature_index] / factor


def signature_diagram(
    model: ICAModel,
    std: Standardizer,
    S_row,
    signature_index: int,
    top_m: int = 10,
    expression_units: float = 1.0,
) -> SignatureDiagram:
    if not 0 <= signature_index < model.k:
        raise ValueError(f"signature index {signature_index} out of range (k={model.k})")
    factor, expr, load = rescale_signature(model, S_row, signature_index)
    names = [c.key for c in std.channels]
    order = sorted(range(len(load)), key=lambda j: (-abs(load[j]), names[j]))[:top_m]
    top = max((abs(load[j]) for j in order), default=0.0)
    entries = []
    for j in order:
        eff = back_transform_change(std.transforms[j], float(load[j]), expression_units, float(std.scale[j]))
        entries.append(DiagramEntry(names[j], float(load[j]), float(load[j] / top) if top > 0 else 0.0, eff))
    lo, hi = (expr.min(), expr.max()) if expr.size else (-1.0, 1.0)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(expr, bins=HIST_BINS, range=(lo, hi))
    return SignatureDiagram(signature_index, float(factor), tuple(entries), edges, counts, expr, load)


def render_svg(diagram: SignatureDiagram, cutoff: float = 0.05, width: int = 640) -> str:
    """Horizontal bars of normalized change with an inset log histogram.

    Entries with |normalized change| below ``cutoff`` are hidden here only;
    they stay in the diagram data.
    """
    shown = [e for e in diagram.entries if abs(e.normalized) >= cutoff]
    row_h = 22
    top_pad = 30
    height = top_pad + row_h * max(len(shown), 1) + 130
    mid = width * 0.55
    half = width * 0.2
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<text x="8" y="18" font-size="13" font-weight="bold">S-{diagram.signature_id}</text>',
        f'<line x1="{mid}" y1="{top_pad - 4}" x2="{mid}" y2="{top_pad + row_h * len(shown)}" stroke="#444"/>',
    ]
    for i, e in enumerate(shown):
        y = top_pad + i * row_h
        w = abs(e.normalized) * half
        x = mid if e.normalized >= 0 else mid - w
        color = "#c0392b" if e.normalized >= 0 else "#2c7fb8"
        parts.append(f'<rect x="{x:.1f}" y="{y}" width="{w:.1f}" height="{row_h - 6}" fill="{color}"/>')
        label = f"{e.channel} ({e.effect.describe()})"
        parts.append(f'<text x="8" y="{y + row_h - 10}">{escape(label)}</text>')
    # inset histogram
    hy = top_pad + row_h * max(len(shown), 1) + 20
    hw, hh = width - 40, 90
    lc = diagram.log_counts
    peak = lc.max() if lc.size and lc.max() > 0 else 1.0
    bw = hw / max(lc.size, 1)
    for i, c in enumerate(lc):
        bh = hh * c / peak
        parts.append(f'<rect x="{20 + i * bw:.1f}" y="{hy + hh - bh:.1f}" width="{bw:.1f}" height="{bh:.1f}" fill="#888"/>')
    edges = diagram.bin_edges
    parts.append(f'<text x="20" y="{hy + hh + 14}">{edges[0]:.2f}</text>')
    parts.append(f'<text x="{20 + hw - 30}" y="{hy + hh + 14}">{edges[-1]:.2f}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
