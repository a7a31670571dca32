"""Cross-section sampling from curvesets and per-kind standardization."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from ._util import atomic_write_bytes, atomic_write_text, derive_rng
from .curvegen import BASELINE_INTENSITY, DAYS_PER_YEAR, CurveSet
from .ehr_model import ChannelId, Kind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CrossSectionMatrix:
    data: np.ndarray  # p x n
    patient_ids: tuple
    days: np.ndarray
    channels: tuple

    def __post_init__(self):
        p, n = self.data.shape
        if n < 1:
            raise ValueError("cross-section matrix needs at least one column")
        if len(self.patient_ids) != n or len(self.days) != n:
            raise ValueError("provenance length must equal column count")
        if len(self.channels) != p:
            raise ValueError("channel count must equal row count")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("cross-section matrix has missing entries")

    @property
    def kinds(self) -> tuple:
        return tuple(c.kind for c in self.channels)

    @property
    def shape(self):
        return self.data.shape


def sample_cross_sections(curvesets: Iterable[CurveSet], density: float = 1.0, seed: int = 0) -> CrossSectionMatrix:
    """Uniformly timed cross-sections, ``max(1, Poisson(density * years))``
    per record. Accepts any iterable so curvesets can be streamed."""
    if density <= 0:
        raise ValueError("density must be > 0")
    cols, pids, days = [], [], []
    channels = None
    for cs in curvesets:
        if channels is None:
            channels = cs.catalog
        rng = derive_rng(seed, "sample", cs.patient_id)
        count = max(1, int(rng.poisson(density * cs.tau / DAYS_PER_YEAR)))
        offs = np.sort(rng.integers(0, cs.tau, size=count))
        cols.append(cs.matrix[:, offs])
        pids.extend([cs.patient_id] * count)
        days.append(cs.start_day + offs)
    if channels is None:
        raise ValueError("no curvesets to sample")
    return CrossSectionMatrix(np.hstack(cols), tuple(pids), np.concatenate(days), tuple(channels))


def last_cross_section(cs: CurveSet) -> np.ndarray:
    """Channel values on the final day of the record."""
    return cs.matrix[:, -1].copy()


class Transform(str, Enum):
    LOG_AFFINE = "log-affine"
    AFFINE = "affine"
    IDENTITY = "identity"


def transform_for(channel: ChannelId) -> Transform:
    if channel.is_binary:
        return Transform.IDENTITY
    if channel.kind is Kind.CODE:
        return Transform.LOG_AFFINE
    return Transform.AFFINE


@dataclass(frozen=True)
class Standardizer:
    channels: tuple
    transforms: tuple
    center: np.ndarray
    scale: np.ndarray
    floor: float = BASELINE_INTENSITY

    def _masks(self):
        t = np.array([tr.value for tr in self.transforms])
        return t == Transform.LOG_AFFINE.value, t != Transform.IDENTITY.value

    def apply(self, x) -> np.ndarray:
        x = np.array(x, dtype=np.float64, copy=True)
        if x.shape[0] != len(self.channels):
            raise ValueError(f"expected {len(self.channels)} rows, got {x.shape[0]}")
        is_log, is_aff = self._masks()
        col = (slice(None),) + (None,) * (x.ndim - 1)
        if is_log.any():
            block = x[is_log]
            bad = block <= 0
            if bad.any():
                log.warning("%d non-positive code intensities clamped to %g", int(bad.sum()), self.floor)
                block[bad] = self.floor
            x[is_log] = np.log(block)
        x[is_aff] = (x[is_aff] - self.center[is_aff][col]) / self.scale[is_aff][col]
        return x

    def invert(self, x) -> np.ndarray:
        x = np.array(x, dtype=np.float64, copy=True)
        if x.shape[0] != len(self.channels):
            raise ValueError(f"expected {len(self.channels)} rows, got {x.shape[0]}")
        is_log, is_aff = self._masks()
        col = (slice(None),) + (None,) * (x.ndim - 1)
        x[is_aff] = x[is_aff] * self.scale[is_aff][col] + self.center[is_aff][col]
        x[is_log] = np.exp(x[is_log])
        return x

    def to_dict(self) -> dict:
        return {
            "floor": self.floor,
            "rows": [
                {"channel": c.key, "transform": t.value, "center": float(m), "scale": float(s)}
                for c, t, m, s in zip(self.channels, self.transforms, self.center, self.scale)
            ],
        }

    @classmethod
    def from_dict(cls, obj) -> "Standardizer":
        rows = obj["rows"]
        return cls(
            channels=tuple(ChannelId.from_key(r["channel"]) for r in rows),
            transforms=tuple(Transform(r["transform"]) for r in rows),
            center=np.array([r["center"] for r in rows], dtype=np.float64),
            scale=np.array([r["scale"] for r in rows], dtype=np.float64),
            floor=obj.get("floor", BASELINE_INTENSITY),
        )

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Standardizer":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_standardizer(X_raw, channels, floor: float = BASELINE_INTENSITY) -> Standardizer:
    """Centre and divide by two standard deviations; codes are logged first,
    binary rows are left untouched."""
    data = X_raw.data if isinstance(X_raw, CrossSectionMatrix) else np.asarray(X_raw, dtype=np.float64)
    if data.size == 0:
        raise ValueError("empty matrix")
    channels = tuple(channels)
    transforms = []
    center = np.zeros(len(channels))
    scale = np.ones(len(channels))
    for i, ch in enumerate(channels):
        t = transform_for(ch)
        row = data[i]
        if t is Transform.LOG_AFFINE:
            row = np.log(np.where(row > 0, row, floor))
        if t is not Transform.IDENTITY:
            sd = row.std()
            if not sd > 0:
                log.warning("channel %s has zero variance; left untransformed", ch.key)
                t = Transform.IDENTITY
            else:
                center[i] = row.mean()
                scale[i] = 2.0 * sd
        transforms.append(t)
    return Standardizer(channels, tuple(transforms), center, scale, floor)


def save_cross_sections(X: CrossSectionMatrix, path) -> None:
    """Write ``<path>.npy`` plus a ``<path>.json`` sidecar."""
    import io

    path = Path(path)
    buf = io.BytesIO()
    np.save(buf, X.data)
    atomic_write_bytes(path.with_suffix(".npy"), buf.getvalue())
    sidecar = {
        "rows": [{"channel": c.name, "kind": c.kind.value} for c in X.channels],
        "columns": [[pid, int(d)] for pid, d in zip(X.patient_ids, X.days)],
    }
    atomic_write_text(path.with_suffix(".json"), json.dumps(sidecar))


def load_cross_sections(path) -> CrossSectionMatrix:
    path = Path(path)
    data = np.load(path.with_suffix(".npy"))
    meta = json.loads(path.with_suffix(".json").read_text())
    channels = tuple(ChannelId(Kind(r["kind"]), r["channel"]) for r in meta["rows"])
    cols = meta["columns"]
    return CrossSectionMatrix(
        data, tuple(c[0] for c in cols), np.array([c[1] for c in cols], dtype=np.int64), channels
    )
