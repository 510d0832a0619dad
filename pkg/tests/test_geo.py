import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ais_sentinel.errors import ExhaustedRejection, ValidationError
from ais_sentinel.geo import (
    OUTAGE_RECTS, ROSTOCK, GeoPoint, GeoRect, RangeRule, beyond_range, destination,
    distance_to_station, haversine_nmi, initial_bearing, intermediate_point, sample_outage_position,
    sample_outage_positions,
)

R_NMI = 6371.0088 * 1000 / 1852


def cosine_law_nmi(a, b):
    """Independent second formula: spherical law of cosines."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return R_NMI * math.acos(max(-1.0, min(1.0, c)))


baltic = st.builds(GeoPoint, lat=st.floats(53.5, 60.0), lon=st.floats(9.0, 30.0))
anywhere = st.builds(GeoPoint, lat=st.floats(-89.0, 89.0), lon=st.floats(-179.0, 179.0))


def test_identical_points():
    assert haversine_nmi(ROSTOCK, ROSTOCK) == 0.0


def test_one_degree_latitude():
    assert haversine_nmi(GeoPoint(54.1, 12.1), GeoPoint(55.1, 12.1)) == pytest.approx(60.04, abs=0.01)


def test_reference_pair_against_cosine_law():
    a, b = GeoPoint(55.0, 11.0), GeoPoint(54.1, 12.1)
    assert abs(haversine_nmi(a, b) - cosine_law_nmi(a, b)) < 0.01


def test_thousand_baltic_pairs_against_cosine_law():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        a = GeoPoint(rng.uniform(53.5, 60), rng.uniform(9, 30))
        b = GeoPoint(rng.uniform(53.5, 60), rng.uniform(9, 30))
        worst = max(worst, abs(haversine_nmi(a, b) - cosine_law_nmi(a, b)))
    assert worst < 0.01


@given(anywhere, anywhere)
def test_symmetry_and_bounds(a, b):
    d = haversine_nmi(a, b)
    assert d == haversine_nmi(b, a)
    assert 0.0 <= d <= math.pi * R_NMI + 1e-9


@given(baltic, baltic, baltic)
def test_triangle_inequality(a, b, c):
    assert haversine_nmi(a, c) <= haversine_nmi(a, b) + haversine_nmi(b, c) + 1e-9


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(3)
    lat, lon = rng.uniform(53, 56, 200), rng.uniform(10, 14, 200)
    vec = distance_to_station(lat, lon)
    for i in range(0, 200, 17):
        assert vec[i] == pytest.approx(haversine_nmi(GeoPoint(lat[i], lon[i]), ROSTOCK), abs=1e-9)


def test_beyond_range_examples():
    rule = RangeRule()
    assert not beyond_range(ROSTOCK, rule)
    assert beyond_range(GeoPoint(55.0, 11.0), rule)


def test_exactly_at_range_is_inside():
    p = destination(ROSTOCK, 33.0, 40.0)
    rule = RangeRule(ROSTOCK, haversine_nmi(p, ROSTOCK))
    assert not beyond_range(p, rule)


def test_destination_and_bearing_consistent():
    p = destination(ROSTOCK, 75.0, 25.0)
    assert haversine_nmi(ROSTOCK, p) == pytest.approx(25.0, abs=1e-9)
    assert initial_bearing(ROSTOCK, p) == pytest.approx(75.0, abs=1e-9)


def test_intermediate_point_splits_distance():
    a, b = GeoPoint(54.0, 11.0), GeoPoint(55.0, 13.0)
    m = intermediate_point(a, b, 0.25)
    total = haversine_nmi(a, b)
    assert haversine_nmi(a, m) == pytest.approx(0.25 * total, abs=1e-9)
    assert haversine_nmi(m, b) == pytest.approx(0.75 * total, abs=1e-9)
    assert intermediate_point(a, a, 0.5) == a


def test_invalid_types():
    with pytest.raises(ValidationError):
        GeoPoint(91.0, 0.0)
    with pytest.raises(ValidationError):
        GeoRect(GeoPoint(55, 11), GeoPoint(54, 12))
    with pytest.raises(ValidationError):
        RangeRule(ROSTOCK, 0.0)


def test_outage_samples_beyond_range_and_inside_rects():
    pts = sample_outage_positions(OUTAGE_RECTS, RangeRule(), np.random.default_rng(0), 5000)
    d = distance_to_station(pts[:, 0], pts[:, 1])
    assert (d > 40.0).all()
    inside = [any(r.contains(GeoPoint(*p)) for r in OUTAGE_RECTS) for p in pts]
    assert all(inside)
    # both rectangles contribute
    assert (pts[:, 1] < 11.5).any() and (pts[:, 1] > 12.3).any()


def test_rect_fully_beyond_range_never_rejects():
    far = GeoRect(GeoPoint(56.0, 14.0), GeoPoint(56.5, 15.0))
    # a single miss would exhaust a budget of one attempt
    pts = sample_outage_positions([far], RangeRule(), np.random.default_rng(1), 500, max_attempts=1)
    assert len(pts) == 500


def test_rect_fully_inside_range_exhausts():
    near = GeoRect(GeoPoint(54.0, 12.0), GeoPoint(54.2, 12.2))
    with pytest.raises(ExhaustedRejection):
        sample_outage_position([near], RangeRule(), np.random.default_rng(2))


def test_sampling_is_seeded():
    a = sample_outage_positions(OUTAGE_RECTS, RangeRule(), np.random.default_rng(9), 50)
    b = sample_outage_positions(OUTAGE_RECTS, RangeRule(), np.random.default_rng(9), 50)
    np.testing.assert_array_equal(a, b)
