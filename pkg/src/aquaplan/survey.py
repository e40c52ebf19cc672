"""Stage-1 coarse planning: zigzag survey, site thresholding, k-means ROIs."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .envsim import DetectionEvent
from .geo import Circle, LocalPoint, smallest_enclosing_circle
from .mission import TAG_SURVEY, MissionPath, path_from_points

DEFAULT_ROI_MIN_RADIUS_M = 5.0
SITES_HEADER = ("east_m", "north_m")


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned survey rectangle in the local frame."""

    east_min: float
    east_max: float
    north_min: float
    north_max: float

    def __post_init__(self) -> None:
        if self.east_max <= self.east_min or self.north_max <= self.north_min:
            raise ValueError("workspace must have positive area")

    @property
    def east_extent(self) -> float:
        return self.east_max - self.east_min

    @property
    def north_extent(self) -> float:
        return self.north_max - self.north_min

    def contains(self, p: LocalPoint) -> bool:
        return (
            self.east_min <= p.east <= self.east_max
            and self.north_min <= p.north <= self.north_max
        )

    def corners(self) -> list[LocalPoint]:
        return [
            LocalPoint(self.east_min, self.north_min),
            LocalPoint(self.east_max, self.north_min),
            LocalPoint(self.east_min, self.north_max),
            LocalPoint(self.east_max, self.north_max),
        ]


@dataclass(frozen=True)
class SiteSet:
    """Detection hot spots selected by thresholding, stage-1 output."""

    points: tuple[LocalPoint, ...]
    threshold: float


@dataclass(frozen=True)
class Clustering:
    k: int
    assignments: tuple[int, ...]
    centroids: tuple[LocalPoint, ...]
    inertia: float
    inertia_history: tuple[float, ...]


@dataclass(frozen=True)
class Roi:
    """Disk bounding one cluster of occurrence sites."""

    circle: Circle
    sites: tuple[LocalPoint, ...]
    cluster_id: int


def zigzag_path(
    ws: Workspace,
    lane_spacing: float,
    heading_axis: str = "east",
    start: LocalPoint | None = None,
) -> MissionPath:
    """Boustrophedon sweep of the workspace.

    Lanes run parallel to ``heading_axis`` and are offset by ``lane_spacing``
    along the other axis; a short final lane is added on the far edge when the
    extent is not an exact multiple.  The sweep starts at the workspace corner
    nearest ``start`` (min corner by default).
    """
    if heading_axis not in ("east", "north"):
        raise ValueError(f"heading_axis must be 'east' or 'north', got {heading_axis!r}")
    if lane_spacing <= 0.0:
        raise ValueError("lane_spacing must be > 0")

    if heading_axis == "east":
        lane_lo, lane_hi = ws.east_min, ws.east_max
        off_lo, off_hi = ws.north_min, ws.north_max
    else:
        lane_lo, lane_hi = ws.north_min, ws.north_max
        off_lo, off_hi = ws.east_min, ws.east_max

    width = off_hi - off_lo
    if lane_spacing >= width:
        warnings.warn(
            f"lane_spacing {lane_spacing} >= workspace width {width}; "
            "degenerate single-lane survey",
            stacklevel=2,
        )
        offsets = [(off_lo + off_hi) / 2.0]
    else:
        n_full = int(math.floor(width / lane_spacing + 1e-9))
        offsets = [off_lo + i * lane_spacing for i in range(n_full + 1)]
        if offsets[-1] < off_hi - 1e-9:
            offsets.append(off_hi)

    if start is None:
        start = LocalPoint(ws.east_min, ws.north_min)
    corner = min(
        ws.corners(),
        key=lambda c: (c.east - start.east) ** 2 + (c.north - start.north) ** 2,
    )
    near_hi_offset = (corner.north if heading_axis == "east" else corner.east) > (off_lo + off_hi) / 2.0
    if near_hi_offset:
        offsets.reverse()
    forward_first = (corner.east if heading_axis == "east" else corner.north) <= (lane_lo + lane_hi) / 2.0

    points: list[LocalPoint] = []
    for i, off in enumerate(offsets):
        ends = (lane_lo, lane_hi) if (i % 2 == 0) == forward_first else (lane_hi, lane_lo)
        for along in ends:
            if heading_axis == "east":
                points.append(LocalPoint(along, off))
            else:
                points.append(LocalPoint(off, along))
    return path_from_points(points, TAG_SURVEY)


def select_sites(
    events: list[DetectionEvent],
    threshold: float,
    ws: Workspace,
    cell_size: float,
    mode: str = "count",
) -> SiteSet:
    """Bin detection events into a grid and keep cells with strong evidence.

    ``count`` mode keeps cells whose positive-detection count exceeds the
    threshold; ``rate`` mode keeps cells whose positive fraction exceeds it
    (threshold must then be in [0, 1]).  Selected sites are cell centers.
    """
    if mode not in ("count", "rate"):
        raise ValueError(f"mode must be 'count' or 'rate', got {mode!r}")
    if cell_size <= 0.0:
        raise ValueError("cell_size must be > 0")
    if mode == "rate" and not 0.0 <= threshold <= 1.0:
        raise ValueError(f"rate-mode threshold must be in [0, 1], got {threshold}")
    if mode == "count" and threshold < 0.0:
        raise ValueError(f"count-mode threshold must be >= 0, got {threshold}")

    nx = max(1, int(math.ceil(ws.east_extent / cell_size - 1e-9)))
    ny = max(1, int(math.ceil(ws.north_extent / cell_size - 1e-9)))
    positives = np.zeros((ny, nx), dtype=np.int64)
    totals = np.zeros((ny, nx), dtype=np.int64)
    for e in events:
        if not ws.contains(e.pos):
            continue
        ix = min(int((e.pos.east - ws.east_min) / cell_size), nx - 1)
        iy = min(int((e.pos.north - ws.north_min) / cell_size), ny - 1)
        totals[iy, ix] += 1
        if e.detected:
            positives[iy, ix] += 1

    points: list[LocalPoint] = []
    for iy in range(ny):
        for ix in range(nx):
            if mode == "count":
                keep = positives[iy, ix] > threshold
            else:
                keep = totals[iy, ix] > 0 and positives[iy, ix] / totals[iy, ix] > threshold
            if keep:
                points.append(
                    LocalPoint(
                        min(ws.east_min + (ix + 0.5) * cell_size, ws.east_max),
                        min(ws.north_min + (iy + 0.5) * cell_size, ws.north_max),
                    )
                )
    return SiteSet(tuple(points), threshold)


# --------------------------------------------------------------------------
# k-means (Lloyd iterations, k-means++ seeding, best of N restarts)
# --------------------------------------------------------------------------


def kmeans(
    sites: SiteSet,
    k: int,
    seed: int | np.random.SeedSequence = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    restarts: int = 10,
) -> Clustering:
    """Cluster sites into ``k`` groups minimizing squared-distance inertia.

    Runs ``restarts`` independent k-means++ initializations and returns the
    lowest-inertia result.  An empty cluster mid-run is repaired by reseeding
    its centroid at the point farthest from its current centroid.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(sites.points) < k:
        raise ValueError(f"need at least k={k} sites, got {len(sites.points)}")

    X = np.array([(p.east, p.north) for p in sites.points], dtype=np.float64)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    best: tuple[np.ndarray, np.ndarray, float, list[float]] | None = None
    for child in ss.spawn(restarts):
        rng = np.random.default_rng(child)
        centroids = _kmeans_pp_init(X, k, rng)
        result = _lloyd(X, centroids, max_iter, tol)
        if best is None or result[2] < best[2]:
            best = result
    assert best is not None
    centroids, assign, inertia, history = best
    return Clustering(
        k=k,
        assignments=tuple(int(a) for a in assign),
        centroids=tuple(LocalPoint(float(c[0]), float(c[1])) for c in centroids),
        inertia=float(inertia),
        inertia_history=tuple(history),
    )


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centroids = np.empty((k, 2), dtype=np.float64)
    centroids[0] = X[int(rng.integers(n))]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _assign_with_repair(
    X: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid assignment; empty clusters grab the farthest point."""
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    d2min = d2[np.arange(len(X)), assign].copy()
    for j in range(len(centroids)):
        if not np.any(assign == j):
            far = int(np.argmax(d2min))
            centroids[j] = X[far]
            assign[far] = j
            d2min[far] = 0.0
    return assign, d2min


def _lloyd(
    X: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    centroids = centroids.copy()
    k = len(centroids)
    history: list[float] = []
    assign = np.zeros(len(X), dtype=np.intp)
    for _ in range(max_iter):
        assign, d2min = _assign_with_repair(X, centroids)
        history.append(float(d2min.sum()))
        new_centroids = np.array([X[assign == j].mean(axis=0) for j in range(k)])
        shift = ((new_centroids - centroids) ** 2).sum(axis=1).max()
        centroids = new_centroids
        if shift < tol:
            break
    assign, d2min = _assign_with_repair(X, centroids)
    inertia = float(d2min.sum())
    history.append(inertia)
    return centroids, assign, inertia, history


def build_rois(
    clustering: Clustering,
    sites: SiteSet,
    r_min: float = DEFAULT_ROI_MIN_RADIUS_M,
) -> list[Roi]:
    """One bounding disk per cluster via the smallest enclosing circle.

    A radius floor keeps single-point clusters coverable.
    """
    if len(clustering.assignments) != len(sites.points):
        raise ValueError("clustering does not match the site set")
    rois: list[Roi] = []
    for cid in range(clustering.k):
        members = tuple(
            p for p, a in zip(sites.points, clustering.assignments) if a == cid
        )
        if not members:
            continue
        circle = smallest_enclosing_circle(list(members))
        if circle.radius < r_min:
            circle = Circle(circle.center, r_min)
        rois.append(Roi(circle=circle, sites=members, cluster_id=cid))
    return rois


def format_sites(sites: SiteSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SITES_HEADER)
    for p in sites.points:
        writer.writerow([repr(p.east), repr(p.north)])
    return buf.getvalue()


def parse_sites(text: str, threshold: float = float("nan")) -> SiteSet:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("sites file is empty: missing header row") from None
    if tuple(header) != SITES_HEADER:
        raise ValueError(f"line 1: bad header {header!r}, expected {','.join(SITES_HEADER)}")
    points = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            points.append(LocalPoint(float(row[0]), float(row[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric field in {row!r}") from None
    return SiteSet(tuple(points), threshold)
