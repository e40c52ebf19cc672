"""Thin command-line client for the planning service.

Commands map one-to-one onto service endpoints.  By default requests run
against an in-process app instance (no server needed); ``--server URL``
targets a remote service instead.  The CLI's own work is limited to reading
input artifacts, writing returned ones, and mapping failures to exit codes.

Exit codes: 0 success, 2 config/usage, 3 budget exceeded, 4 missing
artifact, 5 pipeline/domain error, 1 anything else.  Failures print a single
line: ``error[CODE] message``.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

from .config import ENV_OUT_DIR, ScenarioConfig, default_scenario, load_config
from .errors import (
    CODE_BUDGET_EXCEEDED,
    CODE_CONFIG_INVALID,
    CODE_MISSING_ARTIFACT,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_MISSING = 4
EXIT_PIPELINE = 5
EXIT_CODES = {
    CODE_CONFIG_INVALID: EXIT_CONFIG,
    CODE_BUDGET_EXCEEDED: EXIT_BUDGET,
    CODE_MISSING_ARTIFACT: EXIT_MISSING,
}


class CliFailure(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _fail(code: str, message: str) -> "CliFailure":
    return CliFailure(code, message)


def _exit_for(code: str) -> int:
    return EXIT_CODES.get(code, EXIT_PIPELINE)


def _load_scenario(config_path: str | None, seed: int | None) -> ScenarioConfig:
    try:
        cfg = load_config(config_path) if config_path else default_scenario()
    except (ValueError, OSError) as exc:
        raise _fail(CODE_CONFIG_INVALID, str(exc)) from exc
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    return cfg


class _InProcessTransport(httpx.BaseTransport):
    """Drive the ASGI app from a sync client, one event loop per request."""

    def __init__(self, app) -> None:
        self._transport = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        import asyncio

        async def call() -> httpx.Response:
            response = await self._transport.handle_async_request(request)
            body = b"".join([chunk async for chunk in response.stream])
            return httpx.Response(
                response.status_code, headers=response.headers, content=body
            )

        return asyncio.run(call())


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from .service import create_app

    transport = _InProcessTransport(create_app())
    return httpx.Client(transport=transport, base_url="http://aquaplan.internal", timeout=600.0)


def _post(server: str | None, endpoint: str, payload: dict) -> dict:
    with _client(server) as client:
        response = client.post(f"/v1/{endpoint}", json=payload)
    if response.status_code >= 400:
        try:
            body = response.json()
            raise _fail(body.get("code", "HTTP"), body.get("message", response.text))
        except (ValueError, KeyError):
            raise _fail("HTTP", f"{endpoint}: HTTP {response.status_code}") from None
    return response.json()


def _out_dir(out: str | None) -> Path:
    return Path(out or os.environ.get(ENV_OUT_DIR) or "out")


def _write_artifacts(out_dir: Path, artifacts: dict[str, str]) -> None:
    for rel, text in sorted(artifacts.items()):
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")


def _read_artifact(out_dir: Path, rel: str) -> str:
    target = out_dir / rel
    if not target.exists():
        raise _fail(
            CODE_MISSING_ARTIFACT,
            f"missing artifact {target}; run the producing stage first",
        )
    return target.read_text(encoding="utf-8")


def _echo_summary(name: str, summary: dict, out_dir: Path, n_artifacts: int) -> None:
    click.echo(f"{name}: wrote {n_artifacts} artifact(s) to {out_dir}")
    status = summary.get("status")
    if status:
        click.echo(f"  status: {status}")


_config_opt = click.option("--config", "config_path", type=click.Path(), default=None,
                           help="Scenario config JSON (defaults to the packaged demo scenario).")
_out_opt = click.option("--out", "out", default=None,
                        help=f"Output directory (fallback ${ENV_OUT_DIR}, then ./out).")
_seed_opt = click.option("--seed", type=int, default=None, help="Override the scenario seed.")
_server_opt = click.option("--server", default=None,
                           help="Remote service URL; default runs the service in-process.")


@click.group()
def main() -> None:
    """Coarse-to-fine water-quality survey planning and prediction."""


def _run_command(fn) -> None:
    try:
        fn()
    except CliFailure as exc:
        click.echo(f"error[{exc.code}] {exc.message}", err=True)
        sys.exit(_exit_for(exc.code))


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_server_opt
def survey(config_path, out, seed, server) -> None:
    """Run the stage-1 zigzag survey and write its logs."""

    def go() -> None:
        cfg = _load_scenario(config_path, seed)
        data = _post(server, "survey", {"config": cfg.model_dump(mode="json")})
        out_dir = _out_dir(out)
        _write_artifacts(out_dir, data["artifacts"])
        _echo_summary("survey", data["summary"], out_dir, len(data["artifacts"]))
        for note in data["summary"].get("warnings", []):
            click.echo(f"  warning: {note}")

    _run_command(go)


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_server_opt
@click.option("--allow-over-budget", is_flag=True, help="Do not fail when the mission exceeds the energy budget.")
def plan(config_path, out, seed, server, allow_over_budget) -> None:
    """Cluster survey sites into ROIs and plan the stage-2 mission."""

    def go() -> None:
        cfg = _load_scenario(config_path, seed)
        out_dir = _out_dir(out)
        sites_csv = _read_artifact(out_dir, "survey/sites.csv")
        survey_summary = json.loads(_read_artifact(out_dir, "survey/summary.json"))
        start = survey_summary["stage1_end"]
        data = _post(
            server,
            "plan",
            {
                "config": cfg.model_dump(mode="json"),
                "sites_csv": sites_csv,
                "start_east": start[0],
                "start_north": start[1],
            },
        )
        _write_artifacts(out_dir, data["artifacts"])
        _echo_summary("plan", data["summary"], out_dir, len(data["artifacts"]))
        budget = data["summary"]["budget"]
        if not budget["fits"]:
            message = f"mission exceeds energy budget by {budget['excess_m']:.1f} m"
            if allow_over_budget:
                click.echo(f"  warning: {message} (allowed)")
            else:
                raise _fail(CODE_BUDGET_EXCEEDED, message)

    _run_command(go)


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_server_opt
def run(config_path, out, seed, server) -> None:
    """Execute the planned stage-2 mission and write its logs."""

    def go() -> None:
        cfg = _load_scenario(config_path, seed)
        out_dir = _out_dir(out)
        mission = _read_artifact(out_dir, "plan/mission.geojson")
        data = _post(
            server,
            "run",
            {"config": cfg.model_dump(mode="json"), "mission_geojson": mission},
        )
        _write_artifacts(out_dir, data["artifacts"])
        _echo_summary("run", data["summary"], out_dir, len(data["artifacts"]))

    _run_command(go)


@main.command("fit-predict")
@_config_opt
@_out_opt
@_seed_opt
@_server_opt
def fit_predict(config_path, out, seed, server) -> None:
    """Fit the occurrence model and predict held-out ROI surfaces."""

    def go() -> None:
        cfg = _load_scenario(config_path, seed)
        out_dir = _out_dir(out)
        data = _post(
            server,
            "fit-predict",
            {
                "config": cfg.model_dump(mode="json"),
                "log_csv": _read_artifact(out_dir, "run/log.csv"),
                "rois_json": _read_artifact(out_dir, "plan/rois.json"),
            },
        )
        _write_artifacts(out_dir, data["artifacts"])
        _echo_summary("fit-predict", data["summary"], out_dir, len(data["artifacts"]))
        pooled = data["summary"]["heldout"]["pooled"]
        click.echo(f"  held-out accuracy: {pooled['accuracy']:.4f}")

    _run_command(go)


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_server_opt
def plot(config_path, out, seed, server) -> None:
    """Render SVG figures from previously produced artifacts."""

    def go() -> None:
        cfg = _load_scenario(config_path, seed)
        out_dir = _out_dir(out)
        surfaces = {}
        predict_dir = out_dir / "predict"
        if predict_dir.is_dir():
            for f in sorted(predict_dir.glob("surface_roi*.csv")):
                surfaces[f.name] = f.read_text(encoding="utf-8")
        data = _post(
            server,
            "plot",
            {
                "config": cfg.model_dump(mode="json"),
                "survey_trajectory_csv": _read_artifact(out_dir, "survey/trajectory.csv"),
                "sites_csv": _read_artifact(out_dir, "survey/sites.csv"),
                "rois_json": _read_artifact(out_dir, "plan/rois.json"),
                "mission_geojson": _read_artifact(out_dir, "plan/mission.geojson"),
                "surfaces_csv": surfaces,
            },
        )
        _write_artifacts(out_dir, data["artifacts"])
        _echo_summary("plot", data["summary"], out_dir, len(data["artifacts"]))

    _run_command(go)


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_server_opt
@click.option("--allow-over-budget", is_flag=True, help="Do not fail when the mission exceeds the energy budget.")
def demo(config_path, out, seed, server, allow_over_budget) -> None:
    """Run the full pipeline: survey, plan, run, fit-predict, plot."""

    def go() -> None:
        cfg = _load_scenario(config_path, seed)
        data = _post(server, "demo", {"config": cfg.model_dump(mode="json")})
        out_dir = _out_dir(out)
        _write_artifacts(out_dir, data["artifacts"])
        summary = data["summary"]
        click.echo(f"demo: wrote {len(data['artifacts'])} artifact(s) to {out_dir}")
        gain = summary["information_gain"]
        if gain["ratio"] is not None:
            click.echo(
                f"  stage-1 mean occurrence {gain['stage1_mean_occurrence']:.4f} -> "
                f"stage-2 {gain['stage2_mean_occurrence']:.4f} "
                f"(x{gain['ratio']:.2f})"
            )
        budget = summary["plan"]["budget"]
        if not budget["fits"] and not allow_over_budget:
            raise _fail(
                CODE_BUDGET_EXCEEDED,
                f"mission exceeds energy budget by {budget['excess_m']:.1f} m",
            )

    _run_command(go)


@main.command("config-reference")
@_server_opt
def config_reference_cmd(server) -> None:
    """Print the scenario configuration reference."""

    def go() -> None:
        with _client(server) as client:
            response = client.get("/v1/config-reference")
        response.raise_for_status()
        click.echo(response.text, nl=False)

    _run_command(go)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the planning service with uvicorn."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
