"""End-to-end orchestration of the two-stage monitoring scenario.

Each stage is a pure function from a validated config (plus upstream artifact
text) to an artifact bundle: relative path -> file content.  All content is
plain CSV/JSON/GeoJSON/SVG so runs are diffable; a fixed seed yields a
byte-identical artifact tree.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import errors, nav, plots, predictor, route, survey
from .config import (
    ScenarioConfig,
    build_budget,
    build_env_field,
    build_gains,
    build_occurrence,
    build_origin,
    build_sim_config,
    build_workspace,
    stage_seeds,
)
from .envsim import EnvSample, format_log, occurrence_prob, parse_log
from .geo import LocalPoint, dist
from .predictor import LabeledDataset


@dataclass
class StageResult:
    artifacts: dict[str, str] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _mean_true_probability(
    cfg: ScenarioConfig, samples: list[EnvSample]
) -> float | None:
    """Average planted occurrence probability over logged sample positions."""
    if not samples:
        return None
    env = build_env_field(cfg)
    occ = build_occurrence(cfg)
    return sum(occurrence_prob(occ, env, s.pos) for s in samples) / len(samples)


def run_survey(cfg: ScenarioConfig) -> StageResult:
    """Stage 1: zigzag sweep, closed-loop tracking, site thresholding."""
    ws = build_workspace(cfg)
    env = build_env_field(cfg)
    occ = build_occurrence(cfg)
    origin = build_origin(cfg)
    seeds = stage_seeds(cfg)

    start = LocalPoint(cfg.survey.start_east, cfg.survey.start_north)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = survey.zigzag_path(
            ws, cfg.survey.lane_spacing, cfg.survey.heading_axis, start=start
        )
        result = nav.run_mission(
            path,
            build_sim_config(cfg),
            build_gains(cfg),
            env,
            occ,
            failures=[(f.t_s, f.thruster) for f in cfg.sim.failures],
            seed=seeds["survey_mission"],
        )
        cell = cfg.sites.cell_size or cfg.survey.lane_spacing
        sites = survey.select_sites(
            result.events, cfg.sites.threshold, ws, cell_size=cell, mode=cfg.sites.mode
        )
    notes = sorted(str(w.message) for w in caught)

    n_detections = sum(1 for e in result.events if e.detected)
    if not sites.points:
        notes.append("no sites exceeded the detection threshold")
    end = result.log.rows[-1] if result.log.rows else None
    summary = {
        "status": result.log.status,
        "n_samples": len(result.samples),
        "n_detections": n_detections,
        "n_sites": len(sites.points),
        "planned_length_m": path.total_length,
        "traveled_length_m": result.log.traveled_length(),
        "stage1_end": [end.east, end.north] if end else [start.east, start.north],
        "mean_true_occurrence": _mean_true_probability(cfg, result.samples),
        "warnings": notes,
    }
    return StageResult(
        artifacts={
            "survey/trajectory.csv": nav.format_trajectory(result.log),
            "survey/log.csv": format_log(result.samples, result.events, origin),
            "survey/sites.csv": survey.format_sites(sites),
            "survey/summary.json": _dump_json(summary),
        },
        summary=summary,
    )


def plan_mission(
    cfg: ScenarioConfig, sites_csv: str, start: tuple[float, float]
) -> StageResult:
    """Stage 2 planning: cluster sites, order ROIs, cover each disk, stitch."""
    try:
        sites = survey.parse_sites(sites_csv, threshold=cfg.sites.threshold)
    except ValueError as exc:
        raise errors.AquaplanError(errors.CODE_BAD_ARTIFACT, f"sites.csv: {exc}") from exc
    k = cfg.clustering.k
    if not sites.points:
        raise errors.AquaplanError(
            errors.CODE_NO_SITES,
            "no survey sites available; lower sites.threshold or rerun the survey",
        )
    if len(sites.points) < k:
        raise errors.AquaplanError(
            errors.CODE_TOO_FEW_SITES,
            f"{len(sites.points)} site(s) for k={k} clusters; "
            "lower clustering.k or sites.threshold",
        )
    seeds = stage_seeds(cfg)
    clustering = survey.kmeans(
        sites,
        k,
        seed=seeds["clustering"],
        max_iter=cfg.clustering.max_iter,
        tol=cfg.clustering.tol,
        restarts=cfg.clustering.restarts,
    )
    rois = survey.build_rois(clustering, sites, r_min=cfg.clustering.r_min)

    start_pt = LocalPoint(*start)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tour = route.tsp_order([r.circle.center for r in rois], start_pt)
        plans = route.build_coverage_plans(
            rois, tour, lanes=cfg.coverage.lanes, start=start_pt
        )
        mission = route.stitch_mission(tour, plans, start_pt)
    check = route.check_budget(mission, build_budget(cfg))

    transit_length = tour.length
    summary = {
        "k": k,
        "n_rois": len(rois),
        "inertia_m2": clustering.inertia,
        "tour_order": [rois[i].cluster_id for i in tour.order],
        "tour_method": tour.method,
        "transit_length_m": transit_length,
        "mission_length_m": mission.total_length,
        "budget": {"fits": check.fits, "excess_m": check.excess_m},
        "warnings": sorted(str(w.message) for w in caught),
    }
    doc = route.mission_to_geojson(mission, build_origin(cfg), rois)
    return StageResult(
        artifacts={
            "plan/rois.json": route.rois_to_json(rois),
            "plan/mission.geojson": json.dumps(doc, sort_keys=True, indent=2) + "\n",
            "plan/summary.json": _dump_json(summary),
        },
        summary=summary,
    )


def run_stage2(cfg: ScenarioConfig, mission_geojson: str) -> StageResult:
    """Execute the planned stage-2 mission, sampling along the way."""
    try:
        mission = route.mission_from_geojson(json.loads(mission_geojson))
    except (ValueError, KeyError) as exc:
        raise errors.AquaplanError(
            errors.CODE_BAD_ARTIFACT, f"mission.geojson: {exc}"
        ) from exc
    seeds = stage_seeds(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = nav.run_mission(
            mission,
            build_sim_config(cfg),
            build_gains(cfg),
            build_env_field(cfg),
            build_occurrence(cfg),
            failures=[(f.t_s, f.thruster) for f in cfg.sim.failures],
            seed=seeds["stage2_mission"],
        )
    summary = {
        "status": result.log.status,
        "n_samples": len(result.samples),
        "n_detections": sum(1 for e in result.events if e.detected),
        "planned_length_m": mission.total_length,
        "traveled_length_m": result.log.traveled_length(),
        "mean_true_occurrence": _mean_true_probability(cfg, result.samples),
        "warnings": sorted(str(w.message) for w in caught),
    }
    return StageResult(
        artifacts={
            "run/trajectory.csv": nav.format_trajectory(result.log),
            "run/log.csv": format_log(result.samples, result.events, build_origin(cfg)),
            "run/summary.json": _dump_json(summary),
        },
        summary=summary,
    )


def _split_by_roi(
    data: LabeledDataset, rois: list[survey.Roi]
) -> dict[int, np.ndarray]:
    """Row indices per ROI; overlapping disks resolve to the nearest center."""
    out: dict[int, list[int]] = {r.cluster_id: [] for r in rois}
    for i, pos in enumerate(data.pos):
        best_id = None
        best_d = math.inf
        for r in rois:
            d = dist(pos, r.circle.center)
            if d <= r.circle.radius + 1e-9 and d < best_d:
                best_id, best_d = r.cluster_id, d
        if best_id is not None:
            out[best_id].append(i)
    return {cid: np.array(idx, dtype=np.intp) for cid, idx in out.items()}


def fit_predict(cfg: ScenarioConfig, run_log_csv: str, rois_json: str) -> StageResult:
    """Train on one ROI, evaluate by k-fold, predict surfaces on the rest."""
    origin = build_origin(cfg)
    try:
        samples, events = parse_log(run_log_csv, origin)
        rois = route.rois_from_json(rois_json)
    except (ValueError, KeyError) as exc:
        raise errors.AquaplanError(errors.CODE_BAD_ARTIFACT, str(exc)) from exc
    if not rois:
        raise errors.AquaplanError(errors.CODE_BAD_ARTIFACT, "rois.json lists no ROIs")

    p = cfg.predict
    data = predictor.align_labels(samples, events, tol=p.label_tol_s)
    by_roi = _split_by_roi(data, rois)
    seeds = stage_seeds(cfg)

    candidates: dict[int, dict] = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for cid, idx in sorted(by_roi.items()):
            if len(idx) < 2 * p.kfold:
                continue
            subset = data.subset(idx)
            counts = np.bincount(subset.y, minlength=2)
            if counts.min() < p.kfold:
                continue
            report = predictor.kfold(
                subset,
                k=p.kfold,
                seed=seeds["predictor"],
                C=p.c,
                max_iter=p.max_iter,
                tol=p.tol,
                threshold=p.threshold,
            )
            candidates[cid] = {"report": report, "idx": idx}
        if not candidates:
            raise errors.AquaplanError(
                errors.CODE_SINGLE_CLASS,
                "no ROI has enough samples of both classes to train on",
            )

        if p.train_roi == "auto":
            train_id = max(
                sorted(candidates), key=lambda cid: candidates[cid]["report"].accuracy
            )
        else:
            if p.train_roi not in candidates:
                raise errors.AquaplanError(
                    errors.CODE_SINGLE_CLASS,
                    f"requested train ROI {p.train_roi} is not trainable "
                    f"(candidates: {sorted(candidates)})",
                )
            train_id = p.train_roi
        train_data = data.subset(candidates[train_id]["idx"])
        model = predictor.fit(train_data, C=p.c, max_iter=p.max_iter, tol=p.tol)

        env = build_env_field(cfg)
        heldout_rois = [r for r in rois if r.cluster_id != train_id]
        heldout_reports: dict[int, predictor.EvalReport] = {}
        pooled = predictor.EvalReport(0, 0, 0, 0)
        bayes_hits = 0
        bayes_n = 0
        occ = build_occurrence(cfg)
        for r in heldout_rois:
            idx = by_roi.get(r.cluster_id, np.array([], dtype=np.intp))
            if len(idx) == 0:
                continue
            subset = data.subset(idx)
            rep = predictor.evaluate(model, subset, threshold=p.threshold)
            heldout_reports[r.cluster_id] = rep
            pooled = predictor.EvalReport(
                pooled.tp + rep.tp, pooled.fp + rep.fp, pooled.tn + rep.tn, pooled.fn + rep.fn
            )
            for pos, y in zip(subset.pos, subset.y):
                bayes_pred = occurrence_prob(occ, env, pos) >= p.threshold
                bayes_hits += int(bayes_pred == bool(y))
                bayes_n += 1

        surfaces = {
            r.cluster_id: predictor.surface(model, r, env, resolution=p.surface_resolution)
            for r in heldout_rois
        }
    notes = sorted(str(w.message) for w in caught)

    kfold_train = candidates[train_id]["report"]
    summary = {
        "train_roi": train_id,
        "n_rows": len(data),
        "n_positive_events": data.n_positive_events,
        "unmatched_positive_events": data.unmatched_positive_events,
        "model_converged": model.converged,
        "model_grad_norm": model.grad_norm,
        "kfold": {
            "k": p.kfold,
            "aggregate": kfold_train.as_dict(),
            "per_fold": [r.as_dict() for r in kfold_train.per_fold],
        },
        "candidates": {
            str(cid): candidates[cid]["report"].as_dict() for cid in sorted(candidates)
        },
        "heldout": {
            "per_roi": {str(cid): rep.as_dict() for cid, rep in sorted(heldout_reports.items())},
            "pooled": pooled.as_dict(),
            "bayes_accuracy": (bayes_hits / bayes_n) if bayes_n else None,
        },
        "warnings": notes,
    }
    artifacts = {
        "predict/model.json": predictor.model_to_json(model),
        "predict/report.json": _dump_json(summary),
        "predict/report.txt": _format_report_text(summary),
    }
    for cid, surf in sorted(surfaces.items()):
        artifacts[f"predict/surface_roi{cid}.csv"] = predictor.surface_to_csv(surf)
    return StageResult(artifacts=artifacts, summary=summary)


def _format_report_text(summary: dict) -> str:
    agg = summary["kfold"]["aggregate"]
    pooled = summary["heldout"]["pooled"]
    lines = [
        "Occurrence model evaluation",
        "===========================",
        f"training ROI: {summary['train_roi']}",
        f"rows: {summary['n_rows']}  positive events: {summary['n_positive_events']}"
        f"  unmatched: {summary['unmatched_positive_events']}",
        f"optimizer converged: {summary['model_converged']}"
        f" (grad norm {summary['model_grad_norm']:.3e})",
        "",
        f"k-fold (k={summary['kfold']['k']}) on the training ROI:",
        f"  confusion tp={agg['tp']} fp={agg['fp']} tn={agg['tn']} fn={agg['fn']}",
        f"  accuracy={_fmt_metric(agg['accuracy'])} precision={_fmt_metric(agg['precision'])}",
        "",
        "held-out ROIs (pooled):",
        f"  confusion tp={pooled['tp']} fp={pooled['fp']} tn={pooled['tn']} fn={pooled['fn']}",
        f"  accuracy={_fmt_metric(pooled['accuracy'])} precision={_fmt_metric(pooled['precision'])}",
        f"  planted-model (Bayes) accuracy={_fmt_metric(summary['heldout']['bayes_accuracy'])}",
    ]
    per_roi = summary["heldout"]["per_roi"]
    if per_roi:
        lines.append("")
        lines.append("per held-out ROI:")
        for cid, rep in per_roi.items():
            lines.append(
                f"  ROI {cid}: n={rep['n']} accuracy={_fmt_metric(rep['accuracy'])}"
                f" precision={_fmt_metric(rep['precision'])}"
            )
    return "\n".join(lines) + "\n"


def _fmt_metric(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def render_plots(
    cfg: ScenarioConfig,
    survey_trajectory_csv: str,
    sites_csv: str,
    rois_json: str,
    mission_geojson: str,
    surfaces_csv: dict[str, str],
) -> StageResult:
    """Render the four standard figures from previously produced artifacts."""
    ws = build_workspace(cfg)
    try:
        traj = nav.parse_trajectory(survey_trajectory_csv)
        sites = survey.parse_sites(sites_csv)
        rois = route.rois_from_json(rois_json)
        mission = route.mission_from_geojson(json.loads(mission_geojson))
    except (ValueError, KeyError) as exc:
        raise errors.AquaplanError(errors.CODE_BAD_ARTIFACT, str(exc)) from exc

    planned = survey.zigzag_path(
        ws,
        cfg.survey.lane_spacing,
        cfg.survey.heading_axis,
        start=LocalPoint(cfg.survey.start_east, cfg.survey.start_north),
    )
    assignments = _site_assignments(sites, rois)
    surf_panels = []
    for name in sorted(surfaces_csv):
        roi_id, east, north, grid = _parse_surface_csv(surfaces_csv[name], name)
        surf_panels.append((roi_id, east, north, grid))

    artifacts = {
        "plots/survey.svg": plots.survey_plot(
            ws, planned, traj.positions(), list(sites.points)
        ),
        "plots/clusters.svg": plots.clusters_plot(
            ws, list(sites.points), assignments, rois
        ),
        "plots/mission.svg": plots.mission_plot(ws, mission, rois),
        "plots/surface.svg": plots.surface_plot(surf_panels),
    }
    return StageResult(artifacts=artifacts, summary={"n_plots": len(artifacts)})


def _site_assignments(sites: survey.SiteSet, rois: list[survey.Roi]) -> list[int]:
    out = []
    for p in sites.points:
        best_id, best_d = 0, math.inf
        for r in rois:
            d = dist(p, r.circle.center)
            if d < best_d:
                best_id, best_d = r.cluster_id, d
        out.append(best_id)
    return out


def _parse_surface_csv(
    text: str, name: str
) -> tuple[int, list[float], list[float], list[list[float]]]:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != ",".join(predictor.SURFACE_HEADER):
        raise errors.AquaplanError(errors.CODE_BAD_ARTIFACT, f"{name}: bad surface header")
    rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    east = sorted({r[0] for r in rows})
    north = sorted({r[1] for r in rows})
    index = {(r[0], r[1]): r[2] for r in rows}
    grid = [[index[(e, n)] for e in east] for n in north]
    digits = "".join(ch for ch in name if ch.isdigit())
    return (int(digits) if digits else 0, east, north, grid)


def run_demo(cfg: ScenarioConfig) -> StageResult:
    """Full pipeline: survey -> plan -> run -> fit-predict -> plot."""
    out = StageResult()

    stage1 = run_survey(cfg)
    out.artifacts.update(stage1.artifacts)

    plan = plan_mission(
        cfg,
        stage1.artifacts["survey/sites.csv"],
        tuple(stage1.summary["stage1_end"]),
    )
    out.artifacts.update(plan.artifacts)

    stage2 = run_stage2(cfg, plan.artifacts["plan/mission.geojson"])
    out.artifacts.update(stage2.artifacts)

    prediction = fit_predict(
        cfg, stage2.artifacts["run/log.csv"], plan.artifacts["plan/rois.json"]
    )
    out.artifacts.update(prediction.artifacts)

    figures = render_plots(
        cfg,
        stage1.artifacts["survey/trajectory.csv"],
        stage1.artifacts["survey/sites.csv"],
        plan.artifacts["plan/rois.json"],
        plan.artifacts["plan/mission.geojson"],
        {
            name.split("/", 1)[1]: text
            for name, text in prediction.artifacts.items()
            if name.startswith("predict/surface_")
        },
    )
    out.artifacts.update(figures.artifacts)

    stage1_mean = stage1.summary["mean_true_occurrence"]
    stage2_mean = stage2.summary["mean_true_occurrence"]
    gain = (
        stage2_mean / stage1_mean
        if stage1_mean and stage2_mean and stage1_mean > 0
        else None
    )
    out.summary = {
        "survey": stage1.summary,
        "plan": plan.summary,
        "run": stage2.summary,
        "predict": {
            "train_roi": prediction.summary["train_roi"],
            "heldout_pooled": prediction.summary["heldout"]["pooled"],
            "bayes_accuracy": prediction.summary["heldout"]["bayes_accuracy"],
        },
        "information_gain": {
            "stage1_mean_occurrence": stage1_mean,
            "stage2_mean_occurrence": stage2_mean,
            "ratio": gain,
        },
    }
    out.artifacts["demo/summary.json"] = _dump_json(out.summary)
    return out
