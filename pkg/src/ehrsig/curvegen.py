"""Dense daily curves from sparse observations, one process per modality.

* codes: adaptive random average shifted histograms, events/year
* measurements: shape-preserving PCHIP, held constant outside the data
* medications: binary exposure with the midpoint stopping rule
* demographics: constant sex/race indicators and integer age
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._util import atomic_write_text, derive_rng
from .ehr_model import AGE, RACE_PREFIX, SEX, Cohort, Demographics, Kind, PatientRecord

log = logging.getLogger(__name__)

DAYS_PER_YEAR = 365.25
BASELINE_INTENSITY = 1.0 / 20.0


@dataclass(frozen=True)
class CurveParams:
    n_histograms: int = 16
    neighbor_rank: int = 5
    min_bandwidth: int = 7
    max_bandwidth: int = 730
    intensity_floor: float = BASELINE_INTENSITY
    seed: int = 0


@dataclass(frozen=True)
class Curve:
    start_day: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("curve needs at least one day")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve values must be finite")

    def __len__(self):
        return self.values.size

    def at(self, day: int) -> float:
        return float(self.values[day - self.start_day])


@dataclass(frozen=True)
class CurveSet:
    patient_id: str
    start_day: int
    matrix: np.ndarray  # p x tau
    catalog: tuple

    @property
    def tau(self) -> int:
        return self.matrix.shape[1]

    def column(self, day: int) -> np.ndarray:
        return self.matrix[:, day - self.start_day]


class NoEventsError(ValueError):
    """Raised by :func:`code_intensity_curve` when there is nothing to smooth;
    callers fall back to :func:`impute_code_baseline`."""


def _span_days(span) -> tuple[int, int]:
    first, last = int(span[0]), int(span[1])
    if first > last:
        raise ValueError(f"invalid span {span}")
    return first, last - first + 1


def adaptive_bandwidths(days: np.ndarray, rank: int, lo: int, hi: int) -> np.ndarray:
    """Distance from each event to its ``rank``-th nearest other event,
    clamped to ``[lo, hi]`` days. Too few events gives ``hi``."""
    days = np.sort(np.asarray(days, dtype=np.int64))
    n = days.size
    if n <= rank:
        return np.full(n, hi, dtype=np.int64)
    # in 1-D the rank nearest neighbours sit within rank positions either side
    offs = np.concatenate([np.arange(-rank, 0), np.arange(1, rank + 1)])
    idx = np.arange(n)[:, None] + offs[None, :]
    valid = (idx >= 0) & (idx < n)
    dist = np.abs(days[np.clip(idx, 0, n - 1)] - days[:, None]).astype(np.float64)
    dist[~valid] = np.inf
    kth = np.sort(dist, axis=1)[:, rank - 1]
    return np.clip(kth, lo, hi).astype(np.int64)


def code_intensity_curve(event_days, span, params: CurveParams = CurveParams(), rng=None) -> Curve:
    """Smooth event intensity (events/year) at daily resolution.

    Averages ``params.n_histograms`` histograms with uniformly random bin
    offsets; each event's bin width is its adaptive bandwidth, so dense
    bursts are resolved sharply while sparse stretches are smoothed widely.
    """
    first, tau = _span_days(span)
    days = np.sort(np.asarray(event_days, dtype=np.int64))
    if days.size == 0:
        raise NoEventsError("no events; use impute_code_baseline")
    if days[0] < first or days[-1] >= first + tau:
        raise ValueError("events outside span")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    h = adaptive_bandwidths(days, params.neighbor_rank, params.min_bandwidth, params.max_bandwidth)
    offsets = rng.random(params.n_histograms)
    density = kernels.rash_accumulate(days, h, offsets, first, tau)
    return Curve(first, density * DAYS_PER_YEAR + params.intensity_floor)


def impute_code_baseline(span, level: float = BASELINE_INTENSITY) -> Curve:
    first, tau = _span_days(span)
    return Curve(first, np.full(tau, level))


def pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson derivatives with one-sided three-point end slopes."""
    h = np.diff(x)
    delta = np.diff(y) / h
    n = x.size
    if n == 2:
        return np.array([delta[0], delta[0]])
    d = np.zeros(n)
    w1 = 2 * h[1:] + h[:-1]
    w2 = h[1:] + 2 * h[:-1]
    same = np.sign(delta[:-1]) * np.sign(delta[1:]) > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        harm = (w1 + w2) / (w1 / delta[:-1] + w2 / delta[1:])
    d[1:-1] = np.where(same, harm, 0.0)
    d[0] = _end_slope(h[0], h[1], delta[0], delta[1])
    d[-1] = _end_slope(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _end_slope(h0, h1, m0, m1):
    d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > abs(3 * m0):
        return 3 * m0
    return d


def pchip_eval(x: np.ndarray, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate the PCHIP interpolant of (x, y) at t, constant outside."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.size == 1:
        return np.full(t.shape, y[0])
    d = pchip_slopes(x, y)
    tc = np.clip(t, x[0], x[-1])
    k = np.clip(np.searchsorted(x, tc, side="right") - 1, 0, x.size - 2)
    h = x[k + 1] - x[k]
    s = (tc - x[k]) / h
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1]


def measurement_curve(observations, span) -> Curve:
    """PCHIP through ``(day, value)`` observations sampled daily over span."""
    first, tau = _span_days(span)
    obs = list(observations)
    if not obs:
        raise ValueError("measurement_curve needs at least one observation")
    by_day: dict[int, float] = {}
    for day, value in obs:
        day = int(day)
        if day in by_day and by_day[day] != value:
            log.warning("conflicting values on day %d; keeping the last", day)
        by_day[day] = float(value)
    x = np.array(sorted(by_day), dtype=np.float64)
    y = np.array([by_day[int(d)] for d in x])
    t = np.arange(first, first + tau, dtype=np.float64)
    return Curve(first, pchip_eval(x, y, t))


def impute_measurement(population_median, span) -> Curve:
    if population_median is None or not math.isfinite(population_median):
        raise ValueError("channel was never observed; it should have been filtered")
    first, tau = _span_days(span)
    return Curve(first, np.full(tau, float(population_median)))


def medication_curve(visit_days, noted_days, span) -> Curve:
    """Binary exposure curve from visit medication lists.

    Exposure continues between consecutive visits that both note the drug;
    if the later visit omits it, exposure stops at the midpoint between the
    two visits. After the last visit noting the drug exposure is carried to
    the end of the record.
    """
    first, tau = _span_days(span)
    values = np.zeros(tau)
    visits = sorted(set(int(v) for v in visit_days))
    noted = set(int(v) for v in noted_days)
    if not noted.issubset(visits):
        raise ValueError("noted days must be visit days")
    for i, day in enumerate(visits):
        if day not in noted:
            continue
        if i + 1 == len(visits):
            end = first + tau
        elif visits[i + 1] in noted:
            end = visits[i + 1]
        else:
            end = max(math.ceil((day + visits[i + 1]) / 2), day + 1)
        values[day - first:end - first] = 1.0
    return Curve(first, values)


def demographic_curves(demographics: Demographics, span, races=()) -> dict:
    """Sex, age and one-hot race curves keyed by channel name."""
    first, tau = _span_days(span)
    if demographics.birth_day > first:
        raise ValueError("birth_day after record start")
    days = np.arange(first, first + tau)
    out = {
        SEX: Curve(first, np.full(tau, float(demographics.sex))),
        AGE: Curve(first, np.floor((days - demographics.birth_day) / DAYS_PER_YEAR)),
    }
    for race in sorted(set(races) | set(demographics.race)):
        out[RACE_PREFIX + race] = Curve(first, np.full(tau, float(race in demographics.race)))
    return out


def population_medians(cohort: Cohort) -> dict:
    """Median of all observed values per measurement channel."""
    values: dict[str, list] = {}
    for rec in cohort.records:
        for name, _, v in rec.measurements:
            values.setdefault(name, []).append(v)
    return {k: float(np.median(v)) for k, v in sorted(values.items())}


def build_curveset(record: PatientRecord, catalog, medians: dict, params: CurveParams = CurveParams()) -> CurveSet:
    """Stack one curve per catalog channel into a p x tau matrix.

    Channels absent from the record get the kind-specific imputation.
    """
    first, tau = _span_days(record.span)
    codes: dict[str, list] = {}
    for name, day in record.code_events:
        codes.setdefault(name, []).append(day)
    meas: dict[str, list] = {}
    for name, day, v in record.measurements:
        meas.setdefault(name, []).append((day, v))
    visit_days = [d for d, _ in record.visit_medication_lists]
    noted: dict[str, list] = {}
    for day, meds in record.visit_medication_lists:
        for name in meds:
            noted.setdefault(name, []).append(day)
    demo = None
    if record.demographics is not None:
        demo = demographic_curves(record.demographics, record.span)

    mat = np.empty((len(catalog), tau))
    for i, ch in enumerate(catalog):
        if ch.kind is Kind.CODE:
            if ch.name in codes:
                rng = derive_rng(params.seed, record.patient_id, ch.name)
                curve = code_intensity_curve(codes[ch.name], record.span, params, rng)
            else:
                curve = impute_code_baseline(record.span, params.intensity_floor)
        elif ch.kind is Kind.MEASUREMENT:
            if ch.name in meas:
                curve = measurement_curve(sorted(meas[ch.name]), record.span)
            else:
                curve = impute_measurement(medians.get(ch.name), record.span)
        elif ch.kind is Kind.MEDICATION:
            curve = medication_curve(visit_days, noted.get(ch.name, ()), record.span)
        else:
            if demo is None:
                raise ValueError(f"{record.patient_id}: demographics missing")
            if ch.name in demo:
                curve = demo[ch.name]
            elif ch.name.startswith(RACE_PREFIX):
                curve = Curve(first, np.zeros(tau))
            else:
                raise ValueError(f"unknown demographic channel {ch.name!r}")
        mat[i] = curve.values
    return CurveSet(record.patient_id, first, mat, tuple(catalog))


def write_curveset_csv(cs: CurveSet, path) -> None:
    """Dump as CSV (one row per channel) with a ``.channels`` sidecar."""
    import io
    from pathlib import Path

    path = Path(path)
    buf = io.StringIO()
    np.savetxt(buf, cs.matrix, delimiter=",", fmt="%.10g")
    atomic_write_text(path, buf.getvalue())
    atomic_write_text(
        path.with_suffix(path.suffix + ".channels"),
        f"# patient_id={cs.patient_id} start_day={cs.start_day}\n" + "".join(c.key + "\n" for c in cs.catalog),
    )
