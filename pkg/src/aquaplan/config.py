"""Scenario configuration: a single validated document driving the pipeline.

Configs are JSON files (``//`` and ``/* */`` comments allowed) validated by
pydantic models; every unstated knob of the method lives here with an
auditable default.  One top-level seed fans out to fixed per-stage
sub-streams so a scenario is reproducible end to end.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import envsim, nav, route, survey
from .geo import GeoPoint, LocalPoint

ENV_OUT_DIR = "AQUAPLAN_OUT"

# Acceptance radius / GPS noise presets per sim mode.
MODE_PRESETS = {"ideal": (2.0, 0.0), "gps": (10.0, 3.3)}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OriginSpec(StrictModel):
    lat: float = Field(default=31.31, ge=-90.0, le=90.0)
    lon: float = Field(default=120.61, ge=-180.0, le=180.0)


class WorkspaceSpec(StrictModel):
    east_min: float = 0.0
    east_max: float = 240.0
    north_min: float = 0.0
    north_max: float = 160.0

    @model_validator(mode="after")
    def _positive_area(self) -> "WorkspaceSpec":
        if self.east_max <= self.east_min or self.north_max <= self.north_min:
            raise ValueError("workspace must have positive area")
        return self


class BumpSpec(StrictModel):
    east: float
    north: float
    amplitude: float
    length_scale: float = Field(gt=0.0)


class ParamFieldSpec(StrictModel):
    baseline: float
    noise_std: float = Field(default=0.0, ge=0.0)
    bumps: list[BumpSpec] = Field(default_factory=list)


def _demo_hotspots() -> list[tuple[float, float]]:
    return [(40.0, 120.0), (115.0, 132.0), (200.0, 122.0), (70.0, 38.0), (172.0, 42.0)]


def _default_env() -> dict:
    temp_bumps = [
        BumpSpec(east=e, north=n, amplitude=3.0, length_scale=16.0)
        for e, n in _demo_hotspots()
    ]
    do_bumps = [
        BumpSpec(east=e, north=n, amplitude=1.5, length_scale=16.0)
        for e, n in _demo_hotspots()
    ]
    return {
        "ph": ParamFieldSpec(
            baseline=7.0,
            noise_std=0.05,
            bumps=[BumpSpec(east=120.0, north=80.0, amplitude=0.3, length_scale=60.0)],
        ),
        "temp_c": ParamFieldSpec(baseline=22.0, noise_std=0.1, bumps=temp_bumps),
        "tds_ppm": ParamFieldSpec(
            baseline=150.0,
            noise_std=5.0,
            bumps=[
                BumpSpec(east=60.0, north=90.0, amplitude=25.0, length_scale=70.0),
                BumpSpec(east=190.0, north=60.0, amplitude=-20.0, length_scale=60.0),
            ],
        ),
        "do_mgl": ParamFieldSpec(baseline=8.0, noise_std=0.1, bumps=do_bumps),
    }


class EnvSpec(StrictModel):
    ph: ParamFieldSpec = Field(default_factory=lambda: _default_env()["ph"])
    temp_c: ParamFieldSpec = Field(default_factory=lambda: _default_env()["temp_c"])
    tds_ppm: ParamFieldSpec = Field(default_factory=lambda: _default_env()["tds_ppm"])
    do_mgl: ParamFieldSpec = Field(default_factory=lambda: _default_env()["do_mgl"])


class OccurrenceSpec(StrictModel):
    """Planted ground-truth logistic weights over raw parameter values."""

    w_ph: float = 0.3
    w_temp: float = 0.9
    w_tds: float = -0.02
    w_do: float = 1.2
    w0: float = -31.7


class SurveySpec(StrictModel):
    lane_spacing: float = Field(default=20.0, gt=0.0)
    heading_axis: Literal["east", "north"] = "east"
    start_east: float = 0.0
    start_north: float = 0.0


class SiteSpec(StrictModel):
    # The threshold has no defensible default: it must be stated per scenario.
    threshold: float
    mode: Literal["count", "rate"] = "count"
    cell_size: float | None = Field(default=None, gt=0.0)


class ClusterSpec(StrictModel):
    k: int = Field(default=5, ge=1)
    r_min: float = Field(default=5.0, ge=0.0)
    max_iter: int = Field(default=300, ge=1)
    tol: float = Field(default=1e-6, gt=0.0)
    restarts: int = Field(default=10, ge=1)


class CoverageSpec(StrictModel):
    lanes: int = Field(default=8, ge=1)


class BudgetSpec(StrictModel):
    max_length_m: float = Field(default=20000.0, gt=0.0)


class FailureSpec(StrictModel):
    t_s: float = Field(ge=0.0)
    thruster: int = Field(ge=0, le=2)


class SimSpec(StrictModel):
    mode: Literal["ideal", "gps"] = "ideal"
    dt: float = Field(default=0.1, gt=0.0)
    cruise_speed: float = Field(default=1.0, gt=0.0)
    acceptance_radius: float | None = Field(default=None, gt=0.0)
    gps_noise_std: float | None = Field(default=None, ge=0.0)
    sample_interval: float = Field(default=1.0, gt=0.0)
    max_mission_time: float | None = Field(default=None, gt=0.0)
    omega_max: float = Field(default=0.5, gt=0.0)
    failures: list[FailureSpec] = Field(default_factory=list)

    @property
    def resolved_acceptance(self) -> float:
        return (
            self.acceptance_radius
            if self.acceptance_radius is not None
            else MODE_PRESETS[self.mode][0]
        )

    @property
    def resolved_noise(self) -> float:
        return (
            self.gps_noise_std
            if self.gps_noise_std is not None
            else MODE_PRESETS[self.mode][1]
        )

    @model_validator(mode="after")
    def _radius_exceeds_noise(self) -> "SimSpec":
        if self.resolved_acceptance <= self.resolved_noise:
            raise ValueError("acceptance_radius must exceed gps_noise_std")
        return self


class PidSpec(StrictModel):
    kp: float = Field(default=1.5, ge=0.0)
    ki: float = Field(default=0.0, ge=0.0)
    kd: float = Field(default=0.5, ge=0.0)
    integral_clamp: float = Field(default=1.0, gt=0.0)
    output_clamp: float = Field(default=1.0, gt=0.0)


class PredictSpec(StrictModel):
    c: float = Field(default=1.0, gt=0.0)
    max_iter: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-8, gt=0.0)
    kfold: int = Field(default=5, ge=2)
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    label_tol_s: float = Field(default=0.5, gt=0.0)
    surface_resolution: float = Field(default=2.0, gt=0.0)
    train_roi: int | Literal["auto"] = "auto"


class ScenarioConfig(StrictModel):
    seed: int = 42
    origin: OriginSpec = Field(default_factory=OriginSpec)
    workspace: WorkspaceSpec = Field(default_factory=WorkspaceSpec)
    env: EnvSpec = Field(default_factory=EnvSpec)
    occurrence: OccurrenceSpec = Field(default_factory=OccurrenceSpec)
    survey: SurveySpec = Field(default_factory=SurveySpec)
    sites: SiteSpec
    clustering: ClusterSpec = Field(default_factory=ClusterSpec)
    coverage: CoverageSpec = Field(default_factory=CoverageSpec)
    budget: BudgetSpec = Field(default_factory=BudgetSpec)
    sim: SimSpec = Field(default_factory=SimSpec)
    pid: PidSpec = Field(default_factory=PidSpec)
    predict: PredictSpec = Field(default_factory=PredictSpec)


def default_scenario(seed: int = 42) -> ScenarioConfig:
    """The packaged demo scenario: five planted hot spots, five ROIs."""
    return ScenarioConfig(seed=seed, sites=SiteSpec(threshold=4.0))


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------

_COMMENT_RE = re.compile(
    r'("(?:[^"\\]|\\.)*")|(/\*.*?\*/)|(//[^\n]*)', re.DOTALL
)


def strip_json_comments(text: str) -> str:
    """Drop // and /* */ comments while leaving string literals intact."""
    return _COMMENT_RE.sub(lambda m: m.group(1) or "", text)


def load_config(path: str | Path) -> ScenarioConfig:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(strip_json_comments(raw))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return ScenarioConfig.model_validate(doc)


# --------------------------------------------------------------------------
# Domain builders
# --------------------------------------------------------------------------


def build_workspace(cfg: ScenarioConfig) -> survey.Workspace:
    ws = cfg.workspace
    return survey.Workspace(ws.east_min, ws.east_max, ws.north_min, ws.north_max)


def build_origin(cfg: ScenarioConfig) -> GeoPoint:
    return GeoPoint(cfg.origin.lat, cfg.origin.lon)


def _build_param(spec: ParamFieldSpec) -> envsim.ParamField:
    return envsim.ParamField(
        baseline=spec.baseline,
        bumps=tuple(
            envsim.GaussianBump(LocalPoint(b.east, b.north), b.amplitude, b.length_scale)
            for b in spec.bumps
        ),
        noise_std=spec.noise_std,
    )


def build_env_field(cfg: ScenarioConfig) -> envsim.EnvField:
    return envsim.EnvField(
        ph=_build_param(cfg.env.ph),
        temp_c=_build_param(cfg.env.temp_c),
        tds_ppm=_build_param(cfg.env.tds_ppm),
        do_mgl=_build_param(cfg.env.do_mgl),
        seed=cfg.seed,
    )


def build_occurrence(cfg: ScenarioConfig) -> envsim.OccurrenceField:
    o = cfg.occurrence
    return envsim.OccurrenceField(
        weights=(o.w_ph, o.w_temp, o.w_tds, o.w_do), intercept=o.w0
    )


def build_sim_config(cfg: ScenarioConfig) -> nav.SimConfig:
    s = cfg.sim
    return nav.SimConfig(
        dt=s.dt,
        cruise_speed=s.cruise_speed,
        acceptance_radius=s.resolved_acceptance,
        gps_noise_std=s.resolved_noise,
        sample_interval=s.sample_interval,
        max_mission_time=s.max_mission_time,
        omega_max=s.omega_max,
    )


def build_gains(cfg: ScenarioConfig) -> nav.PidGains:
    p = cfg.pid
    return nav.PidGains(p.kp, p.ki, p.kd, p.integral_clamp, p.output_clamp)


def build_budget(cfg: ScenarioConfig) -> route.EnergyBudget:
    return route.EnergyBudget(cfg.budget.max_length_m)


def stage_seeds(cfg: ScenarioConfig) -> dict[str, np.random.SeedSequence]:
    """Deterministic per-stage seed streams from the scenario seed."""
    children = np.random.SeedSequence(cfg.seed).spawn(4)
    return {
        "survey_mission": children[0],
        "clustering": children[1],
        "stage2_mission": children[2],
        "predictor": children[3],
    }


# --------------------------------------------------------------------------
# Reference documentation
# --------------------------------------------------------------------------


def _walk_fields(model: type[BaseModel], prefix: str, lines: list[str]) -> None:
    for name, info in model.model_fields.items():
        path = f"{prefix}{name}"
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            lines.append(f"{path}:")
            _walk_fields(annotation, path + ".", lines)
            continue
        if info.is_required():
            default = "(required)"
        elif info.default_factory is not None:
            default = "(structured default)"
        else:
            default = f"default={info.default!r}"
        type_name = getattr(annotation, "__name__", str(annotation))
        lines.append(f"{path}: {type_name}  {default}")


def config_reference() -> str:
    """Human-readable listing of every config field and its default."""
    lines = [
        "Scenario configuration reference",
        "================================",
        "",
        "JSON document (// and /* */ comments allowed). Fields:",
        "",
    ]
    _walk_fields(ScenarioConfig, "", lines)
    lines += [
        "",
        "Notes:",
        "- sites.threshold is required: count mode compares per-cell positive",
        "  detections (> threshold), rate mode compares the positive fraction",
        "  (threshold in [0, 1]).",
        "- sites.cell_size defaults to survey.lane_spacing when omitted.",
        "- sim.mode presets: ideal -> acceptance 2.0 m / noise 0.0 m,",
        "  gps -> acceptance 10.0 m / noise 3.3 m; explicit values override.",
        "- sim.max_mission_time defaults to 4x the nominal traversal time.",
        "- predict.train_roi 'auto' picks the candidate ROI with the best",
        "  k-fold accuracy (both classes required).",
        "- seed fans out to fixed sub-streams: survey mission, clustering,",
        "  stage-2 mission, predictor.",
    ]
    return "\n".join(lines) + "\n"
