"""Tagged waypoint paths shared by the survey, route, and nav layers."""

from __future__ import annotations

from dataclasses import dataclass

from .geo import LocalPoint, dist

TAG_SURVEY = "survey"
TAG_TRANSIT = "transit"
TAG_COVERAGE = "coverage"
VALID_TAGS = frozenset({TAG_SURVEY, TAG_TRANSIT, TAG_COVERAGE})


@dataclass(frozen=True)
class Waypoint:
    point: LocalPoint
    tag: str

    def __post_init__(self) -> None:
        if self.tag not in VALID_TAGS:
            raise ValueError(f"unknown waypoint tag {self.tag!r}")


@dataclass(frozen=True)
class MissionPath:
    """Ordered waypoint list; segment lengths define the path length."""

    waypoints: tuple[Waypoint, ...]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("MissionPath must contain at least one waypoint")

    @property
    def total_length(self) -> float:
        pts = self.points
        return sum(dist(a, b) for a, b in zip(pts, pts[1:]))

    @property
    def points(self) -> list[LocalPoint]:
        return [w.point for w in self.waypoints]

    def tagged(self, tag: str) -> list[LocalPoint]:
        return [w.point for w in self.waypoints if w.tag == tag]


def path_from_points(points: list[LocalPoint], tag: str) -> MissionPath:
    return MissionPath(tuple(Waypoint(p, tag) for p in points))
