"""Great-circle geometry for reception-range tests and outage position sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ExhaustedRejection, ValidationError
from .kernels import EARTH_RADIUS_NMI

MAX_REJECTION_ATTEMPTS = 10_000


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValidationError(f"invalid position lat={self.lat} lon={self.lon}")


ROSTOCK = GeoPoint(lat=54.1, lon=12.1)


@dataclass(frozen=True)
class RangeRule:
    station: GeoPoint = ROSTOCK
    range_nmi: float = 40.0

    def __post_init__(self):
        if not self.range_nmi > 0:
            raise ValidationError("range_nmi must be positive")


@dataclass(frozen=True)
class GeoRect:
    sw: GeoPoint
    ne: GeoPoint

    def __post_init__(self):
        if not (self.sw.lat < self.ne.lat and self.sw.lon < self.ne.lon):
            raise ValidationError("rectangle corners must satisfy sw < ne")

    @property
    def area_deg2(self) -> float:
        return (self.ne.lat - self.sw.lat) * (self.ne.lon - self.sw.lon)

    def contains(self, p: GeoPoint) -> bool:
        return self.sw.lat <= p.lat <= self.ne.lat and self.sw.lon <= p.lon <= self.ne.lon


# (lon, lat) corner pairs as given for the Rostock experiments
OUTAGE_RECTS = (
    GeoRect(GeoPoint(lat=54.0, lon=11.0), GeoPoint(lat=55.0, lon=11.4)),
    GeoRect(GeoPoint(lat=54.4, lon=12.4), GeoPoint(lat=55.0, lon=13.0)),
)


def haversine_nmi(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in nautical miles."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    half_dlat = abs(p2 - p1) * 0.5
    half_dlon = abs(math.radians(b.lon) - math.radians(a.lon)) * 0.5
    h = math.sin(half_dlat) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(half_dlon) ** 2
    h = min(max(h, 0.0), 1.0)
    return 2.0 * EARTH_RADIUS_NMI * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def distance_to_station(lat, lon, station: GeoPoint = ROSTOCK) -> np.ndarray:
    """Vectorised distance from arrays of positions to ``station`` (nmi)."""
    return kernels.haversine_nmi(lat, lon, station.lat, station.lon)


def beyond_range(p: GeoPoint, rule: RangeRule) -> bool:
    return haversine_nmi(p, rule.station) > rule.range_nmi


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Forward azimuth from ``a`` towards ``b`` in degrees [0, 360)."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dlon = math.radians(b.lon - a.lon)
    y = math.sin(dlon) * math.cos(p2)
    x = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dlon)
    return math.degrees(math.atan2(y, x)) % 360.0


def destination(a: GeoPoint, bearing_deg: float, dist_nmi: float) -> GeoPoint:
    """Point reached from ``a`` after ``dist_nmi`` along initial bearing ``bearing_deg``."""
    d = dist_nmi / EARTH_RADIUS_NMI
    th = math.radians(bearing_deg)
    p1, l1 = math.radians(a.lat), math.radians(a.lon)
    p2 = math.asin(math.sin(p1) * math.cos(d) + math.cos(p1) * math.sin(d) * math.cos(th))
    l2 = l1 + math.atan2(math.sin(th) * math.sin(d) * math.cos(p1),
                         math.cos(d) - math.sin(p1) * math.sin(p2))
    lon = (math.degrees(l2) + 540.0) % 360.0 - 180.0
    return GeoPoint(lat=math.degrees(p2), lon=lon)


def intermediate_point(a: GeoPoint, b: GeoPoint, fraction: float) -> GeoPoint:
    """Point at ``fraction`` of the great-circle arc from ``a`` to ``b``."""
    d = haversine_nmi(a, b) / EARTH_RADIUS_NMI
    if d == 0.0:
        return a
    p1, l1 = math.radians(a.lat), math.radians(a.lon)
    p2, l2 = math.radians(b.lat), math.radians(b.lon)
    s = math.sin(d)
    wa = math.sin((1.0 - fraction) * d) / s
    wb = math.sin(fraction * d) / s
    x = wa * math.cos(p1) * math.cos(l1) + wb * math.cos(p2) * math.cos(l2)
    y = wa * math.cos(p1) * math.sin(l1) + wb * math.cos(p2) * math.sin(l2)
    z = wa * math.sin(p1) + wb * math.sin(p2)
    lat = math.degrees(math.atan2(z, math.hypot(x, y)))
    lon = math.degrees(math.atan2(y, x))
    return GeoPoint(lat=min(max(lat, -90.0), 90.0), lon=min(max(lon, -180.0), 180.0))


def sample_outage_positions(rects, rule: RangeRule, rng: np.random.Generator, n: int,
                            max_attempts: int = MAX_REJECTION_ATTEMPTS) -> np.ndarray:
    """Draw ``n`` positions uniform over the union of ``rects`` and beyond ``rule``.

    Returns an ``(n, 2)`` array of (lat, lon).  Raises ``ExhaustedRejection``
    when ``max_attempts`` consecutive proposals all land inside the range.
    """
    rects = list(rects)
    if not rects:
        raise ValidationError("at least one rectangle is required")
    out = np.empty((n, 2))
    if n == 0:
        return out
    areas = np.array([r.area_deg2 for r in rects])
    weights = areas / areas.sum()
    sw = np.array([[r.sw.lat, r.sw.lon] for r in rects])
    span = np.array([[r.ne.lat - r.sw.lat, r.ne.lon - r.sw.lon] for r in rects])

    filled = 0
    misses = 0
    while filled < n:
        batch = max(64, 2 * (n - filled))
        which = rng.choice(len(rects), size=batch, p=weights)
        pts = sw[which] + rng.random((batch, 2)) * span[which]
        dist = distance_to_station(pts[:, 0], pts[:, 1], rule.station)
        ok = dist > rule.range_nmi
        # attempts are counted in proposal order so the cap is exact
        for i in range(batch):
            if ok[i]:
                out[filled] = pts[i]
                filled += 1
                misses = 0
                if filled == n:
                    break
            else:
                misses += 1
                if misses >= max_attempts:
                    raise ExhaustedRejection(
                        f"{max_attempts} consecutive proposals fell within {rule.range_nmi} nmi"
                    )
    return out


def sample_outage_position(rects, rule: RangeRule, rng: np.random.Generator) -> GeoPoint:
    lat, lon = sample_outage_positions(rects, rule, rng, 1)[0]
    return GeoPoint(lat=float(lat), lon=float(lon))
