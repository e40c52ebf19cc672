"""HTTP service exposing the planning pipeline.

Every stage is a POST endpoint taking the scenario config (validated by
pydantic) plus any upstream artifact text, and returning the produced
artifact bundle.  The service holds no state: clients persist artifacts and
feed them back to later stages.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import pipeline
from .config import ScenarioConfig, config_reference
from .errors import AquaplanError

API_PREFIX = "/v1"


class StageResponse(BaseModel):
    artifacts: dict[str, str]
    summary: dict[str, Any]


class SurveyRequest(BaseModel):
    config: ScenarioConfig


class PlanRequest(BaseModel):
    config: ScenarioConfig
    sites_csv: str
    start_east: float
    start_north: float


class RunRequest(BaseModel):
    config: ScenarioConfig
    mission_geojson: str


class FitPredictRequest(BaseModel):
    config: ScenarioConfig
    log_csv: str
    rois_json: str


class PlotRequest(BaseModel):
    config: ScenarioConfig
    survey_trajectory_csv: str
    sites_csv: str
    rois_json: str
    mission_geojson: str
    surfaces_csv: dict[str, str] = Field(default_factory=dict)


class DemoRequest(BaseModel):
    config: ScenarioConfig


def _response(result: pipeline.StageResult) -> StageResponse:
    return StageResponse(artifacts=result.artifacts, summary=result.summary)


def create_app() -> FastAPI:
    app = FastAPI(title="aquaplan", version="0.1.0")

    @app.exception_handler(AquaplanError)
    async def _pipeline_error(_: Request, exc: AquaplanError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"code": exc.code, "message": exc.message}
        )

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get(f"{API_PREFIX}/config-reference", response_class=PlainTextResponse)
    def get_config_reference() -> str:
        return config_reference()

    @app.post(f"{API_PREFIX}/survey", response_model=StageResponse)
    def post_survey(req: SurveyRequest) -> StageResponse:
        return _response(pipeline.run_survey(req.config))

    @app.post(f"{API_PREFIX}/plan", response_model=StageResponse)
    def post_plan(req: PlanRequest) -> StageResponse:
        return _response(
            pipeline.plan_mission(
                req.config, req.sites_csv, (req.start_east, req.start_north)
            )
        )

    @app.post(f"{API_PREFIX}/run", response_model=StageResponse)
    def post_run(req: RunRequest) -> StageResponse:
        return _response(pipeline.run_stage2(req.config, req.mission_geojson))

    @app.post(f"{API_PREFIX}/fit-predict", response_model=StageResponse)
    def post_fit_predict(req: FitPredictRequest) -> StageResponse:
        return _response(pipeline.fit_predict(req.config, req.log_csv, req.rois_json))

    @app.post(f"{API_PREFIX}/plot", response_model=StageResponse)
    def post_plot(req: PlotRequest) -> StageResponse:
        return _response(
            pipeline.render_plots(
                req.config,
                req.survey_trajectory_csv,
                req.sites_csv,
                req.rois_json,
                req.mission_geojson,
                req.surfaces_csv,
            )
        )

    @app.post(f"{API_PREFIX}/demo", response_model=StageResponse)
    def post_demo(req: DemoRequest) -> StageResponse:
        return _response(pipeline.run_demo(req.config))

    return app


app = create_app()
