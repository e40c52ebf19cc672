"""Stage-2 fine planning: ROI visit order, in-ROI coverage, mission stitching."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

from .geo import GeoPoint, LocalPoint, dist, to_geo, to_local
from .mission import (
    TAG_COVERAGE,
    TAG_SURVEY,
    TAG_TRANSIT,
    MissionPath,
    Waypoint,
)
from .survey import Roi

EXACT_TSP_MAX = 13  # Held-Karp above this size would dominate planning time
DEFAULT_COVERAGE_LANES = 8
_RING_MAX_GAP_RAD = math.pi / 6  # perimeter polygon stays within ~3.4% of the arc
_INF = float("inf")


@dataclass(frozen=True)
class TourSolution:
    """Open visiting order over ROI centers, starting from a fixed point."""

    order: tuple[int, ...]
    length: float
    method: str

    def __post_init__(self) -> None:
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"order {self.order} is not a permutation")
        if self.method not in ("exact", "heuristic"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class CoveragePlan:
    """Coverage waypoints for one ROI, kept in tour order by the planner."""

    roi_index: int
    cluster_id: int
    waypoints: tuple[LocalPoint, ...]
    lanes: int


@dataclass(frozen=True)
class EnergyBudget:
    """Maximum allowed path length, the proxy for the energy limit."""

    max_length_m: float

    def __post_init__(self) -> None:
        if self.max_length_m <= 0.0:
            raise ValueError("budget must be > 0")


@dataclass(frozen=True)
class BudgetCheck:
    fits: bool
    excess_m: float


def tour_length(order: tuple[int, ...] | list[int], start: LocalPoint, centers: list[LocalPoint]) -> float:
    """Length of the open tour start -> centers[order[0]] -> ... -> last."""
    total = 0.0
    prev = start
    for i in order:
        total += dist(prev, centers[i])
        prev = centers[i]
    return total


def tsp_order(centers: list[LocalPoint], start: LocalPoint) -> TourSolution:
    """Order ROI centers for minimum open-tour transit length.

    Exact Held-Karp dynamic program up to ``EXACT_TSP_MAX`` centers; beyond
    that, nearest-neighbor construction refined by 2-opt reversals and
    segment relocations until neither move improves the tour.
    """
    n = len(centers)
    if n == 0:
        raise ValueError("tsp_order requires at least one center")
    start_d = [dist(start, c) for c in centers]
    d = [[dist(a, b) for b in centers] for a in centers]
    if n <= EXACT_TSP_MAX:
        order = _held_karp(start_d, d)
        method = "exact"
    else:
        order = _heuristic_order(start_d, d)
        method = "heuristic"
    return TourSolution(tuple(order), tour_length(order, start, centers), method)


def _held_karp(start_d: list[float], d: list[list[float]]) -> list[int]:
    n = len(start_d)
    size = 1 << n
    dp = [[_INF] * n for _ in range(size)]
    parent = [[-1] * n for _ in range(size)]
    for j in range(n):
        dp[1 << j][j] = start_d[j]
    for mask in range(1, size):
        row = dp[mask]
        for j in range(n):
            cost_j = row[j]
            if cost_j == _INF or not mask & (1 << j):
                continue
            dj = d[j]
            for m in range(n):
                if mask & (1 << m):
                    continue
                nmask = mask | (1 << m)
                cand = cost_j + dj[m]
                if cand < dp[nmask][m]:
                    dp[nmask][m] = cand
                    parent[nmask][m] = j
    full = size - 1
    end = min(range(n), key=lambda j: dp[full][j])
    order: list[int] = []
    mask, j = full, end
    while j != -1:
        order.append(j)
        mask, j = mask ^ (1 << j), parent[mask][j]
    order.reverse()
    return order


def _nearest_neighbor(start_d: list[float], d: list[list[float]]) -> list[int]:
    n = len(start_d)
    unvisited = set(range(n))
    order: list[int] = []
    current = min(unvisited, key=lambda j: start_d[j])
    order.append(current)
    unvisited.remove(current)
    while unvisited:
        current = min(unvisited, key=lambda j: d[current][j])
        order.append(current)
        unvisited.remove(current)
    return order


def _two_opt(order: list[int], start_d: list[float], d: list[list[float]]) -> list[int]:
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            prev_d = start_d if i == 0 else d[order[i - 1]]
            for j in range(i + 1, n):
                # Reverse order[i..j]: edges (prev,i) and (j,next) are replaced.
                delta = prev_d[order[j]] - prev_d[order[i]]
                if j + 1 < n:
                    delta += d[order[i]][order[j + 1]] - d[order[j]][order[j + 1]]
                if delta < -1e-12:
                    order[i : j + 1] = reversed(order[i : j + 1])
                    improved = True
    return order


def _path_cost(order: list[int], start_d: list[float], d: list[list[float]]) -> float:
    cost = start_d[order[0]]
    for a, b in zip(order, order[1:]):
        cost += d[a][b]
    return cost


def _relocate(order: list[int], start_d: list[float], d: list[list[float]]) -> bool:
    """Move runs of 1..3 cities to a better slot; True when anything moved."""
    n = len(order)
    moved = False
    improved = True
    while improved:
        improved = False
        base = _path_cost(order, start_d, d)
        for seg in (1, 2, 3):
            if seg >= n:
                continue
            for i in range(n - seg + 1):
                chunk = order[i : i + seg]
                rest = order[:i] + order[i + seg :]
                for j in range(len(rest) + 1):
                    candidate = rest[:j] + chunk + rest[j:]
                    cost = _path_cost(candidate, start_d, d)
                    if cost < base - 1e-12:
                        order[:] = candidate
                        base = cost
                        improved = moved = True
    return moved


def _heuristic_order(start_d: list[float], d: list[list[float]]) -> list[int]:
    # 2-opt alone strands ~10% of small instances above 1.05x optimal;
    # alternating with segment relocation closes that gap.
    order = _two_opt(_nearest_neighbor(start_d, d), start_d, d)
    while _relocate(order, start_d, d):
        _two_opt(order, start_d, d)
    return order


def circle_coverage(
    roi: Roi,
    lanes: int = DEFAULT_COVERAGE_LANES,
    entry: LocalPoint | None = None,
) -> list[LocalPoint]:
    """Coverage waypoints for one ROI disk.

    The disk diameter perpendicular to the approach direction is divided into
    ``lanes`` equal strips, giving ``lanes + 1`` parallel chords whose
    endpoints sit on the circle (the outermost two collapse to tangent
    points).  The path starts at the chord endpoint nearest ``entry``, walks
    the circle perimeter once (chord endpoints plus enough arc points to keep
    the polygon within ~R/30 of the arc), then serpentines the chords in
    alternating directions.  The perimeter pass closes the boundary slivers
    between chord ends that a bare serpentine leaves wider than half a lane
    spacing.
    """
    r = roi.circle.radius
    c = roi.circle.center
    if r <= 0.0:
        raise ValueError("circle_coverage requires a positive radius")
    if lanes < 1:
        raise ValueError("lanes must be >= 1")
    if lanes == 1:
        warnings.warn(
            "lanes=1 degenerates to two tangent points; use lanes >= 2 for coverage",
            stacklevel=2,
        )
    if entry is None:
        entry = LocalPoint(c.east - 2.0 * r, c.north)

    # Chord direction v points from entry toward the center; offsets run
    # along the perpendicular u.
    de, dn = c.east - entry.east, c.north - entry.north
    norm = math.hypot(de, dn)
    if norm < 1e-9:
        ve, vn = 1.0, 0.0
    else:
        ve, vn = de / norm, dn / norm
    ue, un = -vn, ve

    spacing = 2.0 * r / lanes
    chords: list[list[LocalPoint]] = []
    for k in range(lanes + 1):
        off = -r + k * spacing
        half = math.sqrt(max(r * r - off * off, 0.0))
        mid_e = c.east + off * ue
        mid_n = c.north + off * un
        if half < 1e-12:
            chords.append([LocalPoint(mid_e, mid_n)])
        else:
            chords.append(
                [
                    LocalPoint(mid_e - half * ve, mid_n - half * vn),
                    LocalPoint(mid_e + half * ve, mid_n + half * vn),
                ]
            )

    boundary = _perimeter_ring(c, r, chords)
    start_wp = min(boundary, key=lambda p: dist(p, entry))
    start_i = boundary.index(start_wp)
    ring = boundary[start_i:] + boundary[:start_i] + [start_wp]

    serpentine: list[LocalPoint] = []
    for k, chord in enumerate(chords):
        serpentine.extend(chord if k % 2 == 0 else list(reversed(chord)))

    waypoints: list[LocalPoint] = []
    for p in ring + serpentine:
        if waypoints and dist(waypoints[-1], p) < 1e-12:
            continue
        waypoints.append(p)
    return waypoints


def _perimeter_ring(c: LocalPoint, r: float, chords: list[list[LocalPoint]]) -> list[LocalPoint]:
    """Chord endpoints plus arc subdivisions, ordered counterclockwise."""
    angles = sorted(
        {
            math.atan2(p.north - c.north, p.east - c.east)
            for chord in chords
            for p in chord
            if abs(dist(c, p) - r) < r * 1e-9 + 1e-12
        }
    )
    filled: list[float] = []
    m = len(angles)
    for i in range(m):
        a = angles[i]
        b = angles[(i + 1) % m] + (2.0 * math.pi if i + 1 == m else 0.0)
        filled.append(a)
        gap = b - a
        if gap > _RING_MAX_GAP_RAD:
            steps = int(math.ceil(gap / _RING_MAX_GAP_RAD))
            filled.extend(a + gap * s / steps for s in range(1, steps))
    return [
        LocalPoint(c.east + r * math.cos(a), c.north + r * math.sin(a)) for a in filled
    ]


def build_coverage_plans(
    rois: list[Roi],
    tour: TourSolution,
    lanes: int = DEFAULT_COVERAGE_LANES,
    start: LocalPoint | None = None,
) -> list[CoveragePlan]:
    """Coverage plans in tour order, chaining each entry to the previous exit."""
    if sorted(tour.order) != list(range(len(rois))):
        raise ValueError("tour order does not cover the ROI list")
    plans: list[CoveragePlan] = []
    prev_exit = start if start is not None else LocalPoint(0.0, 0.0)
    for idx in tour.order:
        roi = rois[idx]
        wps = circle_coverage(roi, lanes=lanes, entry=prev_exit)
        plans.append(
            CoveragePlan(
                roi_index=idx,
                cluster_id=roi.cluster_id,
                waypoints=tuple(wps),
                lanes=lanes,
            )
        )
        prev_exit = wps[-1]
    return plans


def stitch_mission(
    tour: TourSolution, plans: list[CoveragePlan], start: LocalPoint
) -> MissionPath:
    """Concatenate transit and coverage blocks into one stage-2 mission.

    Each ROI contributes its coverage waypoints contiguously; the first
    waypoint of each block is the transit arrival point.
    """
    if [p.roi_index for p in plans] != list(tour.order):
        raise ValueError(
            f"coverage plans {[p.roi_index for p in plans]} do not match tour order {tour.order}"
        )
    waypoints: list[Waypoint] = [Waypoint(start, TAG_TRANSIT)]
    for plan in plans:
        if not plan.waypoints:
            raise ValueError(f"coverage plan for ROI {plan.roi_index} is empty")
        waypoints.append(Waypoint(plan.waypoints[0], TAG_TRANSIT))
        waypoints.extend(Waypoint(p, TAG_COVERAGE) for p in plan.waypoints[1:])
    return MissionPath(tuple(waypoints))


def check_budget(path: MissionPath, budget: EnergyBudget) -> BudgetCheck:
    """Compare path length to the energy budget; never mutates the path."""
    length = path.total_length
    if length <= budget.max_length_m:
        return BudgetCheck(fits=True, excess_m=0.0)
    return BudgetCheck(fits=False, excess_m=length - budget.max_length_m)


# --------------------------------------------------------------------------
# mission.geojson: one LineString per tag class plus a Point per ROI center.
# Feature properties carry waypoint indices so the full ordered path
# round-trips through the file.
# --------------------------------------------------------------------------


def mission_to_geojson(path: MissionPath, origin: GeoPoint, rois: list[Roi]) -> dict:
    features: list[dict] = []
    for tag in (TAG_SURVEY, TAG_TRANSIT, TAG_COVERAGE):
        indices = [i for i, w in enumerate(path.waypoints) if w.tag == tag]
        if not indices:
            continue
        coords = []
        for i in indices:
            g = to_geo(path.waypoints[i].point, origin)
            coords.append([g.lon, g.lat])
        geometry = (
            {"type": "LineString", "coordinates": coords}
            if len(coords) > 1
            else {"type": "Point", "coordinates": coords[0]}
        )
        features.append(
            {
                "type": "Feature",
                "geometry": geometry,
                "properties": {"tag": tag, "indices": indices},
            }
        )
    for roi in rois:
        g = to_geo(roi.circle.center, origin)
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [g.lon, g.lat]},
                "properties": {
                    "cluster_id": roi.cluster_id,
                    "radius_m": roi.circle.radius,
                    "role": "roi_center",
                },
            }
        )
    return {
        "type": "FeatureCollection",
        "features": features,
        "origin": {"lat": origin.lat, "lon": origin.lon},
    }


def mission_from_geojson(doc: dict, origin: GeoPoint | None = None) -> MissionPath:
    if origin is None:
        if "origin" not in doc:
            raise ValueError("geojson lacks an origin and none was supplied")
        origin = GeoPoint(doc["origin"]["lat"], doc["origin"]["lon"])
    slots: dict[int, Waypoint] = {}
    for feature in doc.get("features", []):
        props = feature.get("properties") or {}
        tag = props.get("tag")
        if tag is None:
            continue
        indices = props["indices"]
        geometry = feature["geometry"]
        coords = (
            [geometry["coordinates"]]
            if geometry["type"] == "Point"
            else geometry["coordinates"]
        )
        if len(indices) != len(coords):
            raise ValueError(f"feature for tag {tag!r} has mismatched indices/coordinates")
        for i, (lon, lat) in zip(indices, coords):
            slots[i] = Waypoint(to_local(GeoPoint(lat, lon), origin), tag)
    if not slots:
        raise ValueError("geojson contains no tagged path features")
    if sorted(slots) != list(range(len(slots))):
        raise ValueError("geojson waypoint indices are not contiguous")
    return MissionPath(tuple(slots[i] for i in range(len(slots))))


def rois_to_json(rois: list[Roi]) -> str:
    payload = {
        "rois": [
            {
                "cluster_id": roi.cluster_id,
                "center_east_m": roi.circle.center.east,
                "center_north_m": roi.circle.center.north,
                "radius_m": roi.circle.radius,
                "member_count": len(roi.sites),
            }
            for roi in rois
        ]
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def rois_from_json(text: str) -> list[Roi]:
    """Rebuild ROI disks from rois.json (member sites are not persisted)."""
    from .geo import Circle

    doc = json.loads(text)
    rois = []
    for entry in doc["rois"]:
        rois.append(
            Roi(
                circle=Circle(
                    LocalPoint(entry["center_east_m"], entry["center_north_m"]),
                    entry["radius_m"],
                ),
                sites=(),
                cluster_id=entry["cluster_id"],
            )
        )
    return rois
