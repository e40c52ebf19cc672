"""Planar geometry, GPS/local frame conversion, and the smallest enclosing circle.

All planners work in a flat east/north frame (meters) anchored at a declared
WGS-84 origin.  At lake scale (< 10 km) an equirectangular projection scaled
by the cosine of the origin latitude keeps round-trip error far below the
millimeter level, so no geodesic machinery is needed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_008.8  # IUGG mean Earth radius
MAX_PROJECTION_RANGE_M = 100_000.0  # equirectangular validity bound

# Fixed seed for the Welzl point shuffle: results must not depend on
# interpreter-level RNG state (byte-identical artifact contract).
_WELZL_SHUFFLE_SEED = 0x5EC1C


@dataclass(frozen=True)
class GeoPoint:
    """WGS-84 coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("GeoPoint coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocalPoint:
    """Position in meters east/north of a declared origin."""

    east: float
    north: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "east", float(self.east))
        object.__setattr__(self, "north", float(self.north))
        if not (math.isfinite(self.east) and math.isfinite(self.north)):
            raise ValueError("LocalPoint coordinates must be finite")


@dataclass(frozen=True)
class Circle:
    """Disk in the local frame."""

    center: LocalPoint
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "radius", float(self.radius))
        if not math.isfinite(self.radius) or self.radius < 0.0:
            raise ValueError(f"circle radius must be finite and >= 0, got {self.radius}")

    def contains(self, p: LocalPoint, tol: float = 1e-9) -> bool:
        return dist(self.center, p) <= self.radius + tol


def to_local(p: GeoPoint, origin: GeoPoint) -> LocalPoint:
    """Project a GPS point into the east/north frame around ``origin``."""
    east = math.radians(p.lon - origin.lon) * EARTH_RADIUS_M * math.cos(math.radians(origin.lat))
    north = math.radians(p.lat - origin.lat) * EARTH_RADIUS_M
    if math.hypot(east, north) >= MAX_PROJECTION_RANGE_M:
        raise ValueError(
            f"point {p} is {math.hypot(east, north) / 1000.0:.1f} km from origin; "
            f"projection is only valid within {MAX_PROJECTION_RANGE_M / 1000.0:.0f} km"
        )
    return LocalPoint(east, north)


def to_geo(p: LocalPoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of :func:`to_local` for the same origin."""
    lat = origin.lat + math.degrees(p.north / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(
        p.east / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat)))
    )
    return GeoPoint(lat, lon)


def dist(a: LocalPoint, b: LocalPoint) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.east - b.east, a.north - b.north)


def midpoint(a: LocalPoint, b: LocalPoint) -> LocalPoint:
    return LocalPoint((a.east + b.east) / 2.0, (a.north + b.north) / 2.0)


# --------------------------------------------------------------------------
# Smallest enclosing circle (randomized incremental, Welzl style).
#
# Internally works on (x, y) tuples; duplicates are removed up front so the
# minimality argument is not confused by repeated support points.
# --------------------------------------------------------------------------


def smallest_enclosing_circle(points: list[LocalPoint]) -> Circle:
    """Smallest circle covering every input point.

    Expected O(n) after a deterministic shuffle.  Raises ``ValueError`` on an
    empty input.  Collinear and duplicate points are handled.
    """
    if not points:
        raise ValueError("smallest_enclosing_circle requires at least one point")
    pts = list(dict.fromkeys((p.east, p.north) for p in points))
    rng = random.Random(_WELZL_SHUFFLE_SEED)
    rng.shuffle(pts)

    circle: tuple[float, float, float] | None = None
    for i, p in enumerate(pts):
        if circle is None or not _in_circle(circle, p):
            circle = _circle_one_boundary(pts[: i + 1], p)
    assert circle is not None
    return Circle(LocalPoint(circle[0], circle[1]), circle[2])


def _in_circle(c: tuple[float, float, float], p: tuple[float, float]) -> bool:
    # Multiplicative slack keeps the incremental construction stable when a
    # point sits on the boundary up to floating-point error.
    return math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1.0 + 1e-14) + 1e-17


def _circle_one_boundary(
    pts: list[tuple[float, float]], p: tuple[float, float]
) -> tuple[float, float, float]:
    circle = (p[0], p[1], 0.0)
    for i, q in enumerate(pts):
        if not _in_circle(circle, q):
            if circle[2] == 0.0:
                circle = _diameter_circle(p, q)
            else:
                circle = _circle_two_boundary(pts[: i + 1], p, q)
    return circle


def _circle_two_boundary(
    pts: list[tuple[float, float]], p: tuple[float, float], q: tuple[float, float]
) -> tuple[float, float, float]:
    base = _diameter_circle(p, q)
    left: tuple[float, float, float] | None = None
    right: tuple[float, float, float] | None = None
    px, py = p
    qx, qy = q
    for r in pts:
        if _in_circle(base, r):
            continue
        cross = _cross(px, py, qx, qy, r[0], r[1])
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        if cross > 0.0 and (
            left is None or _cross(px, py, qx, qy, c[0], c[1]) > _cross(px, py, qx, qy, left[0], left[1])
        ):
            left = c
        elif cross < 0.0 and (
            right is None or _cross(px, py, qx, qy, c[0], c[1]) < _cross(px, py, qx, qy, right[0], right[1])
        ):
            right = c
    if left is None and right is None:
        return base
    if left is None:
        return right  # type: ignore[return-value]
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _diameter_circle(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float, float]:
    cx = (a[0] + b[0]) / 2.0
    cy = (a[1] + b[1]) / 2.0
    r = max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1]))
    return (cx, cy, r)


def _circumcircle(
    a: tuple[float, float], b: tuple[float, float], c: tuple[float, float]
) -> tuple[float, float, float] | None:
    # Shift to the bounding-box midpoint for numerical conditioning.
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(
        math.hypot(x - a[0], y - a[1]),
        math.hypot(x - b[0], y - b[1]),
        math.hypot(x - c[0], y - c[1]),
    )
    return (x, y, r)


def _cross(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
