"""Synthetic water body: parameter fields, occurrence ground truth, detections.

Water parameters are smooth sums of Gaussian bumps over a baseline.  The
ground-truth occurrence probability is a planted logistic model over the
noise-free parameter values, so the prediction layer can be validated against
a known answer.  Sensor logs round-trip through a plain CSV schema.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import GeoPoint, LocalPoint, to_geo, to_local

PARAMETERS = ("ph", "temp_c", "tds_ppm", "do_mgl")
LOG_HEADER = ("t_s", "lat", "lon", "ph", "temp_c", "tds_ppm", "do_mgL", "fish_detected")

_PH_MIN, _PH_MAX = 0.0, 14.0
# Logit clamp keeping exp() inside normal float64 range: probabilities
# saturate near 1.2e-308 / 1 - 2^-53 instead of rounding to exactly 0 or 1.
_LOGIT_CLAMP = 709.0
_P_MAX = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class GaussianBump:
    center: LocalPoint
    amplitude: float
    length_scale: float

    def __post_init__(self) -> None:
        if self.length_scale <= 0.0:
            raise ValueError("bump length_scale must be > 0")


@dataclass(frozen=True)
class ParamField:
    """One water parameter: baseline plus Gaussian bumps, with sensor noise std."""

    baseline: float
    bumps: tuple[GaussianBump, ...] = ()
    noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")

    def value(self, pos: LocalPoint) -> float:
        v = self.baseline
        for b in self.bumps:
            de = pos.east - b.center.east
            dn = pos.north - b.center.north
            v += b.amplitude * math.exp(-(de * de + dn * dn) / (2.0 * b.length_scale**2))
        return v


@dataclass(frozen=True)
class EnvField:
    """The four-parameter field bundle; ``seed`` is the default sensor-noise seed."""

    ph: ParamField
    temp_c: ParamField
    tds_ppm: ParamField
    do_mgl: ParamField
    seed: int = 0

    def param(self, name: str) -> ParamField:
        if name not in PARAMETERS:
            raise ValueError(f"unknown parameter {name!r}")
        return getattr(self, name)

    def values(self, pos: LocalPoint) -> tuple[float, float, float, float]:
        """Noise-free parameter values in canonical order."""
        return tuple(self.param(name).value(pos) for name in PARAMETERS)  # type: ignore[return-value]

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class EnvSample:
    """One timestamped sensor reading."""

    t: float
    pos: LocalPoint
    ph: float
    temp_c: float
    tds_ppm: float
    do_mgl: float

    def __post_init__(self) -> None:
        if self.t < 0.0:
            raise ValueError("sample time must be >= 0")
        for name in PARAMETERS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"sample field {name} must be finite")
        if not _PH_MIN <= self.ph <= _PH_MAX:
            raise ValueError(f"ph {self.ph} outside [{_PH_MIN}, {_PH_MAX}]")

    def features(self) -> tuple[float, float, float, float]:
        return (self.ph, self.temp_c, self.tds_ppm, self.do_mgl)


@dataclass(frozen=True)
class OccurrenceField:
    """Planted logistic ground truth over the canonical parameter order."""

    weights: tuple[float, float, float, float]
    intercept: float

    def __post_init__(self) -> None:
        if len(self.weights) != len(PARAMETERS):
            raise ValueError(f"need {len(PARAMETERS)} weights, got {len(self.weights)}")
        if not all(math.isfinite(w) for w in (*self.weights, self.intercept)):
            raise ValueError("occurrence weights must be finite")


@dataclass(frozen=True)
class DetectionEvent:
    t: float
    pos: LocalPoint
    detected: bool

    def __post_init__(self) -> None:
        if self.t < 0.0:
            raise ValueError("event time must be >= 0")


def eval_field(
    field: EnvField,
    pos: LocalPoint,
    noisy: bool = False,
    rng: np.random.Generator | None = None,
    t: float = 0.0,
) -> EnvSample:
    """Read all parameters at ``pos``.

    ``noisy=True`` draws one Gaussian perturbation per parameter (canonical
    order) from ``rng``, so identical seeds and query sequences give identical
    readings.  pH is clamped to its physical range after noise.
    """
    values = list(field.values(pos))
    if noisy:
        if rng is None:
            raise ValueError("noisy evaluation requires an rng")
        for i, name in enumerate(PARAMETERS):
            std = field.param(name).noise_std
            noise = float(rng.normal(0.0, std)) if std > 0.0 else 0.0
            values[i] += noise
    values[0] = min(max(values[0], _PH_MIN), _PH_MAX)
    return EnvSample(t, pos, *values)


def sigmoid(z: float) -> float:
    """Logistic link, saturating instead of under/overflowing."""
    z = min(max(z, -_LOGIT_CLAMP), _LOGIT_CLAMP)
    if z >= 0.0:
        p = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        p = e / (1.0 + e)
    return min(p, _P_MAX)


def occurrence_prob(occ: OccurrenceField, env: EnvField, pos: LocalPoint) -> float:
    """Ground-truth occurrence probability at ``pos`` (noise-free features)."""
    z = occ.intercept
    for w, v in zip(occ.weights, env.values(pos)):
        z += w * v
    return sigmoid(z)


def detect(
    occ: OccurrenceField,
    env: EnvField,
    pos: LocalPoint,
    t: float,
    rng: np.random.Generator,
) -> DetectionEvent:
    """One Bernoulli sonar ping against the ground-truth probability."""
    p = occurrence_prob(occ, env, pos)
    return DetectionEvent(t, pos, bool(rng.random() < p))


# --------------------------------------------------------------------------
# CSV log schema: t_s, lat, lon, ph, temp_c, tds_ppm, do_mgL, fish_detected
# --------------------------------------------------------------------------


def format_log(
    samples: list[EnvSample], events: list[DetectionEvent], origin: GeoPoint
) -> str:
    """Render paired samples/detections as the canonical CSV log."""
    if len(samples) != len(events):
        raise ValueError(
            f"samples ({len(samples)}) and events ({len(events)}) must pair 1:1"
        )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOG_HEADER)
    for s, e in zip(samples, events):
        if s.t != e.t:
            raise ValueError(f"sample/event timestamp mismatch at t={s.t} vs {e.t}")
        g = to_geo(s.pos, origin)
        writer.writerow(
            [
                repr(s.t),
                repr(g.lat),
                repr(g.lon),
                repr(s.ph),
                repr(s.temp_c),
                repr(s.tds_ppm),
                repr(s.do_mgl),
                "1" if e.detected else "0",
            ]
        )
    return buf.getvalue()


def parse_log(text: str, origin: GeoPoint) -> tuple[list[EnvSample], list[DetectionEvent]]:
    """Parse a CSV log; raises ``ValueError`` naming the offending line/field."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("log is empty: missing header row") from None
    if tuple(header) != LOG_HEADER:
        raise ValueError(f"line 1: bad header {header!r}, expected {','.join(LOG_HEADER)}")

    rows: list[tuple[float, EnvSample, DetectionEvent]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(LOG_HEADER):
            raise ValueError(f"line {lineno}: expected {len(LOG_HEADER)} fields, got {len(row)}")
        try:
            t = float(row[0])
            lat = float(row[1])
            lon = float(row[2])
            values = [float(x) for x in row[3:7]]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric field in {row!r}") from None
        if row[7] not in ("0", "1"):
            raise ValueError(f"line {lineno}: fish_detected must be 0 or 1, got {row[7]!r}")
        if t < 0.0:
            raise ValueError(f"line {lineno}: t_s must be >= 0, got {t}")
        if not _PH_MIN <= values[0] <= _PH_MAX:
            raise ValueError(f"line {lineno}: ph {values[0]} outside [{_PH_MIN}, {_PH_MAX}]")
        pos = to_local(GeoPoint(lat, lon), origin)
        rows.append((t, EnvSample(t, pos, *values), DetectionEvent(t, pos, row[7] == "1")))

    times = [r[0] for r in rows]
    if any(b < a for a, b in zip(times, times[1:])):
        warnings.warn("log timestamps are not monotone; applying stable sort", stacklevel=2)
        rows.sort(key=lambda r: r[0])
    return [r[1] for r in rows], [r[2] for r in rows]


def export_log(
    path: str | Path,
    samples: list[EnvSample],
    events: list[DetectionEvent],
    origin: GeoPoint,
) -> None:
    Path(path).write_text(format_log(samples, events, origin), encoding="utf-8")


def ingest_log(path: str | Path, origin: GeoPoint) -> tuple[list[EnvSample], list[DetectionEvent]]:
    return parse_log(Path(path).read_text(encoding="utf-8"), origin)
