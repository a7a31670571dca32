import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import PchipInterpolator

from ehrsig.curvegen import (
    BASELINE_INTENSITY,
    DAYS_PER_YEAR,
    CurveParams,
    NoEventsError,
    adaptive_bandwidths,
    build_curveset,
    code_intensity_curve,
    demographic_curves,
    impute_code_baseline,
    impute_measurement,
    measurement_curve,
    medication_curve,
    pchip_eval,
)
from ehrsig.ehr_model import ChannelId, Demographics, Kind, PatientRecord, demographic_channels


def integral_events(curve):
    return curve.values.sum() / DAYS_PER_YEAR


# -- codes -----------------------------------------------------------------

def test_no_events_delegates_to_baseline():
    with pytest.raises(NoEventsError):
        code_intensity_curve([], (0, 100))


def test_uniform_events_integrate_to_count():
    span = (0, int(10 * DAYS_PER_YEAR) - 1)
    days = np.linspace(0, span[1], 20).round().astype(int)
    curve = code_intensity_curve(days, span)
    assert abs(integral_events(curve) - 20) <= 0.15 * 20
    assert np.all(curve.values > 0)


def test_burst_peak_dominates_distant_intensity():
    span = (0, 3000)
    days = np.arange(1000, 1007).tolist() + [1002, 1003, 1004]
    curve = code_intensity_curve(days, span)
    peak = curve.values[1000:1007].max()
    far = curve.values[1000 + 365]
    assert peak >= 10 * far
    # fixed-width histogram of the same burst: 10 events in a 7-day bin
    assert peak == pytest.approx(10 / 7 * DAYS_PER_YEAR + BASELINE_INTENSITY, rel=0.5)


def test_bandwidth_adapts_to_density():
    days = np.r_[np.arange(0, 10), np.arange(0, 3000, 300)]
    h = adaptive_bandwidths(days, 5, 7, 730)
    dense = h[np.sort(days) < 10]
    assert dense.max() <= 300
    assert h.min() == 7
    assert np.all(adaptive_bandwidths([1, 2, 3], 5, 7, 730) == 730)


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 80), st.floats(0.5, 40.0), st.integers(0, 10_000))
def test_poisson_stream_integral_within_15pct(n_years_x10, rate, seed):
    rng = np.random.default_rng(seed)
    tau = int(n_years_x10 / 10 * DAYS_PER_YEAR) + 1
    count = rng.poisson(rate * tau / DAYS_PER_YEAR)
    if count < 10:
        return
    days = np.sort(rng.integers(0, tau, size=count))
    curve = code_intensity_curve(days, (0, tau - 1), rng=rng)
    floor_mass = BASELINE_INTENSITY * tau / DAYS_PER_YEAR
    assert np.all(np.isfinite(curve.values)) and np.all(curve.values > 0)
    assert abs(integral_events(curve) - count) <= 0.15 * count
    assert integral_events(curve) - floor_mass == pytest.approx(count, rel=1e-9)


def test_code_curve_deterministic_given_rng():
    days = [3, 50, 51, 400, 401, 402]
    a = code_intensity_curve(days, (0, 500), rng=np.random.default_rng(4))
    b = code_intensity_curve(days, (0, 500), rng=np.random.default_rng(4))
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("span", [(0, 364), (7, 7), (100, 5000)])
def test_baseline_imputation(span):
    curve = impute_code_baseline(span)
    assert len(curve) == span[1] - span[0] + 1
    assert np.all(curve.values == 0.05)


# -- measurements ----------------------------------------------------------

def test_two_point_pchip_is_linear():
    curve = measurement_curve([(0, 1.0), (10, 3.0)], (0, 10))
    assert curve.values[5] == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(curve.values, np.linspace(1, 3, 11), atol=1e-12)


def test_single_observation_is_constant():
    curve = measurement_curve([(4, 7.2)], (0, 30))
    assert np.all(curve.values == 7.2)


def test_plateau_never_overshoots():
    curve = measurement_curve([(0, 0.0), (1, 1.0), (2, 1.0), (3, 1.0)], (0, 3))
    fine = np.linspace(0, 3, 3001)
    ref = PchipInterpolator([0, 1, 2, 3], [0, 1, 1, 1])(fine)
    assert ref.max() <= 1.0 + 1e-12
    assert curve.values.max() <= 1.0


def test_constant_extrapolation_outside_observations():
    curve = measurement_curve([(10, 2.0), (20, 5.0), (30, 4.0)], (0, 40))
    assert np.all(curve.values[:11] == 2.0)
    assert np.all(curve.values[30:] == 4.0)


def test_duplicate_days_keep_last(caplog):
    curve = measurement_curve([(0, 1.0), (0, 2.0), (5, 2.0)], (0, 5))
    assert curve.values[0] == 2.0
    assert "conflicting" in caplog.text


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 400), st.floats(-1e3, 1e3, allow_nan=False)), min_size=2, max_size=15,
                unique_by=lambda t: t[0]))
def test_pchip_matches_reference_interpolator(points):
    points = sorted(points)
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points])
    t = np.linspace(x[0], x[-1], 500)
    np.testing.assert_allclose(pchip_eval(x, y, t), PchipInterpolator(x, y)(t), rtol=1e-9, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 50.0), min_size=2, max_size=12), st.lists(st.integers(1, 60), min_size=11, max_size=11),
       st.booleans())
def test_pchip_monotone_and_bounded(increments, gaps, decreasing):
    n = len(increments)
    y = np.cumsum(increments)
    if decreasing:
        y = -y
    x = np.concatenate([[0], np.cumsum(gaps[: n - 1])])
    curve = measurement_curve(list(zip(x.tolist(), y.tolist())), (0, int(x[-1]) + 5))
    v = curve.values
    d = np.diff(v)
    assert np.all(d >= -1e-9) if not decreasing else np.all(d <= 1e-9)
    # every day stays within its segment's data range
    for i in range(n - 1):
        seg = v[int(x[i]):int(x[i + 1]) + 1]
        lo, hi = min(y[i], y[i + 1]), max(y[i], y[i + 1])
        assert seg.min() >= lo - 1e-9 and seg.max() <= hi + 1e-9


def test_impute_measurement():
    assert np.all(impute_measurement(4.5, (0, 730)).values == 4.5)
    assert np.all(impute_measurement(0.0, (0, 3)).values == 0.0)
    with pytest.raises(ValueError):
        impute_measurement(None, (0, 3))


# -- medications -----------------------------------------------------------

def test_medication_noted_on_both_visits():
    curve = medication_curve([0, 100], [0, 100], (0, 100))
    assert np.all(curve.values == 1.0)


def test_medication_midpoint_stop():
    curve = medication_curve([0, 100], [0], (0, 120))
    assert np.all(curve.values[:50] == 1.0)
    assert np.all(curve.values[50:] == 0.0)


def test_medication_never_mentioned():
    curve = medication_curve([0, 50, 100], [], (0, 100))
    assert np.all(curve.values == 0.0)


def test_medication_zero_before_first_note_and_carried_after_last():
    curve = medication_curve([10, 20, 40], [20], (0, 60))
    assert np.all(curve.values[:20] == 0)
    assert np.all(curve.values[20:30] == 1)
    assert np.all(curve.values[30:] == 0)
    carried = medication_curve([10, 20], [20], (0, 60))
    assert np.all(carried.values[20:] == 1)


def test_medication_adjacent_visits_keep_note_day():
    curve = medication_curve([5, 6], [5], (5, 6))
    assert curve.values.tolist() == [1.0, 0.0]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 500), min_size=1, max_size=12, unique=True), st.data())
def test_medication_transitions_at_visits_or_midpoints(visits, data):
    visits = sorted(visits)
    noted = data.draw(st.lists(st.sampled_from(visits), unique=True))
    curve = medication_curve(visits, noted, (0, 520))
    v = curve.values
    assert set(np.unique(v)) <= {0.0, 1.0}
    allowed = set(visits)
    for a, b in zip(visits, visits[1:]):
        allowed.add(int(np.ceil((a + b) / 2)))
        allowed.add(a + 1)
    for t in np.flatnonzero(np.diff(v)) + 1:
        assert int(t) in allowed


# -- demographics and curvesets --------------------------------------------

def test_demographic_curves():
    birth = -int(np.ceil(30 * DAYS_PER_YEAR))
    curves = demographic_curves(Demographics(1, frozenset({"white"}), birth), (0, 729), races=["black", "white"])
    age = curves["age"].values
    assert age[0] == 30 and age[-1] == 31
    assert set(np.diff(age)) <= {0.0, 1.0}
    assert np.all(curves["sex"].values == 1)
    assert np.all(curves["race:white"].values == 1)
    assert np.all(curves["race:black"].values == 0)


CATALOG = (
    ChannelId(Kind.CODE, "sle"),
    ChannelId(Kind.MEASUREMENT, "ana"),
    ChannelId(Kind.MEDICATION, "hcq"),
    *demographic_channels(["black", "white"]),
)
DEMO = Demographics(0, frozenset({"black"}), -20000)


def test_curveset_only_demographics_gets_imputations():
    rec = PatientRecord("a", (0, 99), demographics=DEMO)
    cs = build_curveset(rec, CATALOG, {"ana": 3.5})
    assert cs.matrix.shape == (len(CATALOG), 100)
    assert np.all(cs.matrix[0] == 0.05)
    assert np.all(cs.matrix[1] == 3.5)
    assert np.all(cs.matrix[2] == 0.0)
    assert np.all(np.isfinite(cs.matrix))


def test_curveset_single_day():
    rec = PatientRecord("a", (5, 5), code_events=(("sle", 5),), demographics=DEMO)
    cs = build_curveset(rec, CATALOG, {"ana": 1.0})
    assert cs.matrix.shape == (len(CATALOG), 1)


def test_curveset_row_order_follows_catalog():
    rec = PatientRecord(
        "a", (0, 200),
        code_events=(("sle", 3), ("sle", 90)),
        measurements=(("ana", 10, 1.0), ("ana", 150, 4.0)),
        visit_medication_lists=((10, frozenset({"hcq"})), (150, frozenset())),
        demographics=DEMO,
    )
    perm = [4, 0, 6, 2, 1, 5, 3]
    a = build_curveset(rec, CATALOG, {"ana": 2.0}, CurveParams(seed=3))
    b = build_curveset(rec, tuple(CATALOG[i] for i in perm), {"ana": 2.0}, CurveParams(seed=3))
    np.testing.assert_array_equal(a.matrix[perm], b.matrix)
