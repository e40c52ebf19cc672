"""Deterministic SVG renderings of the pipeline artifacts.

Hand-rolled SVG keeps the output byte-stable: no timestamps, no generator
metadata, fixed float formatting.  Styles loosely follow the usual survey
figures: sweep path over the workspace, cluster disks, the stage-2 mission,
and per-ROI probability heatmaps.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geo import LocalPoint
from .mission import TAG_COVERAGE, TAG_SURVEY, TAG_TRANSIT, MissionPath
from .survey import Roi, Workspace

CLUSTER_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#17becf",
    "#8c564b",
    "#e377c2",
)
TAG_COLORS = {TAG_SURVEY: "#1f77b4", TAG_TRANSIT: "#7f7f7f", TAG_COVERAGE: "#d62728"}

# Piecewise-linear viridis-like ramp (anchor colors, low to high).
_RAMP = (
    (0.267, 0.005, 0.329),
    (0.283, 0.141, 0.458),
    (0.254, 0.265, 0.530),
    (0.207, 0.372, 0.553),
    (0.164, 0.471, 0.558),
    (0.128, 0.567, 0.551),
    (0.135, 0.659, 0.518),
    (0.267, 0.749, 0.441),
    (0.478, 0.821, 0.318),
    (0.741, 0.873, 0.150),
    (0.993, 0.906, 0.144),
)


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def colormap(v: float) -> str:
    """Map [0, 1] to a hex color on the fixed ramp."""
    v = min(max(v, 0.0), 1.0)
    scaled = v * (len(_RAMP) - 1)
    i = min(int(scaled), len(_RAMP) - 2)
    frac = scaled - i
    rgb = [
        _RAMP[i][c] + frac * (_RAMP[i + 1][c] - _RAMP[i][c]) for c in range(3)
    ]
    return "#" + "".join(f"{round(255 * c):02x}" for c in rgb)


@dataclass
class Canvas:
    """Maps local east/north coordinates onto an SVG viewport (north up)."""

    east_min: float
    east_max: float
    north_min: float
    north_max: float
    width: float = 640.0
    margin: float = 30.0

    def __post_init__(self) -> None:
        extent_e = max(self.east_max - self.east_min, 1e-9)
        extent_n = max(self.north_max - self.north_min, 1e-9)
        self.scale = (self.width - 2 * self.margin) / extent_e
        self.height = extent_n * self.scale + 2 * self.margin
        self.elements: list[str] = []

    def xy(self, p: LocalPoint) -> tuple[float, float]:
        x = self.margin + (p.east - self.east_min) * self.scale
        y = self.height - self.margin - (p.north - self.north_min) * self.scale
        return x, y

    def polyline(self, points: list[LocalPoint], stroke: str, width: float = 1.5,
                 dash: str | None = None) -> None:
        if len(points) < 2:
            return
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in map(self.xy, points))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.elements.append(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"{dash_attr}/>'
        )

    def circle(self, center: LocalPoint, radius_m: float, stroke: str,
               fill: str = "none", opacity: float = 1.0) -> None:
        x, y = self.xy(center)
        self.elements.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius_m * self.scale)}" '
            f'stroke="{stroke}" fill="{fill}" opacity="{_fmt(opacity)}"/>'
        )

    def dot(self, p: LocalPoint, color: str, r_px: float = 3.0) -> None:
        x, y = self.xy(p)
        self.elements.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r_px)}" fill="{color}"/>'
        )

    def cell(self, p: LocalPoint, size_m: float, color: str) -> None:
        x, y = self.xy(p)
        s = size_m * self.scale
        self.elements.append(
            f'<rect x="{_fmt(x - s / 2)}" y="{_fmt(y - s / 2)}" width="{_fmt(s)}" '
            f'height="{_fmt(s)}" fill="{color}"/>'
        )

    def frame(self, ws: Workspace) -> None:
        x0, y0 = self.xy(LocalPoint(ws.east_min, ws.north_max))
        x1, y1 = self.xy(LocalPoint(ws.east_max, ws.north_min))
        self.elements.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y1 - y0)}" fill="none" stroke="#333333" stroke-width="1"/>'
        )

    def label(self, text: str, x: float, y: float, size: int = 13) -> None:
        self.elements.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{size}" fill="#222222">{text}</text>'
        )

    def render(self) -> str:
        body = "\n".join(self.elements)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" '
            f'viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
            f'<rect width="100%" height="100%" fill="#ffffff"/>\n'
            f"{body}\n</svg>\n"
        )


def survey_plot(
    ws: Workspace,
    planned: MissionPath,
    trajectory: list[LocalPoint],
    sites: list[LocalPoint],
) -> str:
    cv = Canvas(ws.east_min, ws.east_max, ws.north_min, ws.north_max)
    cv.frame(ws)
    cv.polyline(planned.points, "#d62728", width=1.0, dash="5,4")
    cv.polyline(trajectory, TAG_COLORS[TAG_SURVEY], width=1.5)
    for p in sites:
        cv.dot(p, "#111111", 3.0)
    cv.label("stage-1 survey (dashed: plan, solid: track, dots: sites)", cv.margin, 18)
    return cv.render()


def clusters_plot(
    ws: Workspace,
    sites: list[LocalPoint],
    assignments: list[int],
    rois: list[Roi],
) -> str:
    cv = Canvas(ws.east_min, ws.east_max, ws.north_min, ws.north_max)
    cv.frame(ws)
    for roi in rois:
        color = CLUSTER_PALETTE[roi.cluster_id % len(CLUSTER_PALETTE)]
        cv.circle(roi.circle.center, roi.circle.radius, color, opacity=0.85)
        cv.dot(roi.circle.center, color, 2.0)
    for p, cid in zip(sites, assignments):
        cv.dot(p, CLUSTER_PALETTE[cid % len(CLUSTER_PALETTE)], 3.0)
    cv.label(f"{len(rois)} region(s) of interest", cv.margin, 18)
    return cv.render()


def mission_plot(ws: Workspace, path: MissionPath, rois: list[Roi]) -> str:
    cv = Canvas(ws.east_min, ws.east_max, ws.north_min, ws.north_max)
    cv.frame(ws)
    for roi in rois:
        cv.circle(roi.circle.center, roi.circle.radius, "#bbbbbb")
    cv.polyline(path.points, TAG_COLORS[TAG_TRANSIT], width=1.0, dash="3,3")
    runs: list[tuple[str, list[LocalPoint]]] = []
    for w in path.waypoints:
        if runs and runs[-1][0] == w.tag:
            runs[-1][1].append(w.point)
        else:
            if runs:
                runs[-1][1].append(w.point)  # connect run boundaries
            runs.append((w.tag, [w.point]))
    for tag, pts in runs:
        cv.polyline(pts, TAG_COLORS[tag], width=1.6)
    if path.waypoints:
        cv.dot(path.waypoints[0].point, "#d62728", 5.0)
    cv.label("stage-2 mission (grey: transit, red: coverage)", cv.margin, 18)
    return cv.render()


def surface_plot(
    surfaces: list[tuple[int, list[float], list[float], list[list[float]]]],
) -> str:
    """Heatmap panels, one per (roi_id, east, north, p-grid)."""
    panel = 240.0
    margin = 26.0
    n = max(len(surfaces), 1)
    width = n * (panel + margin) + margin
    height = panel + 2 * margin + 18
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
    ]
    for i, (roi_id, east, north, grid) in enumerate(surfaces):
        ox = margin + i * (panel + margin)
        oy = margin
        ny, nx = len(grid), len(grid[0]) if grid else 0
        if nx and ny:
            cw, ch = panel / nx, panel / ny
            for iy in range(ny):
                for ix in range(nx):
                    x = ox + ix * cw
                    y = oy + (ny - 1 - iy) * ch
                    parts.append(
                        f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cw + 0.5)}" '
                        f'height="{_fmt(ch + 0.5)}" fill="{colormap(grid[iy][ix])}"/>'
                    )
        parts.append(
            f'<text x="{_fmt(ox)}" y="{_fmt(oy + panel + 16)}" font-family="sans-serif" '
            f'font-size="12" fill="#222222">ROI {roi_id} occurrence probability</text>'
        )
    if not surfaces:
        parts.append(
            f'<text x="{_fmt(margin)}" y="{_fmt(margin + 12)}" font-family="sans-serif" '
            f'font-size="13" fill="#222222">no prediction surfaces</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
