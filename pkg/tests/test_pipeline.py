"""Stage orchestration: artifact schemas, chaining, error codes, determinism."""

import json

import pytest

from aquaplan import pipeline
from aquaplan.config import ScenarioConfig, default_scenario
from aquaplan.errors import AquaplanError
from aquaplan.envsim import parse_log
from aquaplan.geo import GeoPoint


@pytest.fixture(scope="module")
def demo_cfg() -> ScenarioConfig:
    return default_scenario()


@pytest.fixture(scope="module")
def survey_result(demo_cfg):
    return pipeline.run_survey(demo_cfg)


@pytest.fixture(scope="module")
def plan_result(demo_cfg, survey_result):
    return pipeline.plan_mission(
        demo_cfg,
        survey_result.artifacts["survey/sites.csv"],
        tuple(survey_result.summary["stage1_end"]),
    )


@pytest.fixture(scope="module")
def run_result(demo_cfg, plan_result):
    return pipeline.run_stage2(demo_cfg, plan_result.artifacts["plan/mission.geojson"])


class TestSurveyStage:
    def test_completes_with_artifacts(self, survey_result):
        assert survey_result.summary["status"] == "completed"
        assert set(survey_result.artifacts) == {
            "survey/trajectory.csv",
            "survey/log.csv",
            "survey/sites.csv",
            "survey/summary.json",
        }
        assert survey_result.summary["n_samples"] > 0
        assert survey_result.summary["n_sites"] >= 5

    def test_log_parses_back(self, demo_cfg, survey_result):
        origin = GeoPoint(demo_cfg.origin.lat, demo_cfg.origin.lon)
        samples, events = parse_log(survey_result.artifacts["survey/log.csv"], origin)
        assert len(samples) == survey_result.summary["n_samples"]
        assert sum(e.detected for e in events) == survey_result.summary["n_detections"]

    def test_deterministic(self, demo_cfg, survey_result):
        again = pipeline.run_survey(demo_cfg)
        assert again.artifacts == survey_result.artifacts

    def test_zero_detection_field_gives_empty_sites(self, demo_cfg):
        cfg = demo_cfg.model_copy(deep=True)
        cfg.occurrence.w0 = -1000.0
        result = pipeline.run_survey(cfg)
        assert result.summary["n_sites"] == 0
        assert "no sites exceeded the detection threshold" in result.summary["warnings"]
        assert result.artifacts["survey/sites.csv"] == "east_m,north_m\n"


class TestPlanStage:
    def test_five_rois_planned(self, plan_result):
        assert plan_result.summary["n_rois"] == 5
        rois = json.loads(plan_result.artifacts["plan/rois.json"])["rois"]
        assert len(rois) == 5
        assert plan_result.summary["budget"]["fits"] is True

    def test_mission_geojson_structure(self, plan_result):
        doc = json.loads(plan_result.artifacts["plan/mission.geojson"])
        assert doc["type"] == "FeatureCollection"
        roles = [f["properties"].get("role") for f in doc["features"]]
        assert roles.count("roi_center") == 5

    def test_each_roi_block_is_contiguous(self, demo_cfg, plan_result):
        # The stitched path must visit each ROI's coverage block exactly once.
        from aquaplan.geo import GeoPoint, dist, to_local
        from aquaplan.route import mission_from_geojson, rois_from_json

        mission = mission_from_geojson(
            json.loads(plan_result.artifacts["plan/mission.geojson"])
        )
        rois = rois_from_json(plan_result.artifacts["plan/rois.json"])
        visit_order = []
        for w in mission.waypoints:
            if w.tag != "coverage":
                continue
            owner = min(rois, key=lambda r: dist(w.point, r.circle.center) - r.circle.radius)
            if not visit_order or visit_order[-1] != owner.cluster_id:
                visit_order.append(owner.cluster_id)
        assert sorted(visit_order) == sorted(r.cluster_id for r in rois)

    def test_too_few_sites_is_coded_error(self, demo_cfg):
        with pytest.raises(AquaplanError) as err:
            pipeline.plan_mission(demo_cfg, "east_m,north_m\n1.0,1.0\n", (0.0, 0.0))
        assert err.value.code == "TOO_FEW_SITES"

    def test_no_sites_is_coded_error(self, demo_cfg):
        with pytest.raises(AquaplanError) as err:
            pipeline.plan_mission(demo_cfg, "east_m,north_m\n", (0.0, 0.0))
        assert err.value.code == "NO_SITES"

    def test_k1_degenerate_plan(self, demo_cfg, survey_result):
        cfg = demo_cfg.model_copy(deep=True)
        cfg.clustering.k = 1
        result = pipeline.plan_mission(
            cfg,
            survey_result.artifacts["survey/sites.csv"],
            tuple(survey_result.summary["stage1_end"]),
        )
        assert result.summary["n_rois"] == 1

    def test_budget_excess_reported(self, demo_cfg, survey_result):
        cfg = demo_cfg.model_copy(deep=True)
        cfg.budget.max_length_m = 1.0
        result = pipeline.plan_mission(
            cfg,
            survey_result.artifacts["survey/sites.csv"],
            tuple(survey_result.summary["stage1_end"]),
        )
        budget = result.summary["budget"]
        assert budget["fits"] is False
        assert budget["excess_m"] > 0


class TestRunStage:
    def test_completes(self, run_result):
        assert run_result.summary["status"] == "completed"
        assert run_result.summary["n_samples"] > 0

    def test_gps_noise_mode_completes(self, demo_cfg, plan_result):
        cfg = ScenarioConfig.model_validate(
            {**demo_cfg.model_dump(), "sim": {"mode": "gps"}}
        )
        result = pipeline.run_stage2(cfg, plan_result.artifacts["plan/mission.geojson"])
        assert result.summary["status"] == "completed"

    def test_failure_schedule_leaves_dwell_in_trajectory(self, demo_cfg, plan_result):
        from aquaplan.config import FailureSpec

        cfg = demo_cfg.model_copy(deep=True)
        cfg.sim.failures = [FailureSpec(t_s=30.0, thruster=0)]
        result = pipeline.run_stage2(cfg, plan_result.artifacts["plan/mission.geojson"])
        assert result.summary["status"] == "completed"
        rows = result.artifacts["run/trajectory.csv"].splitlines()[1:]
        coords = [tuple(r.split(",")[1:3]) for r in rows]
        longest = best = 0
        prev = None
        for c in coords:
            best = best + 1 if c == prev else 1
            prev = c
            longest = max(longest, best)
        assert longest >= 40  # ~4.19 s hold at dt=0.1

    def test_bad_mission_is_coded_error(self, demo_cfg):
        with pytest.raises(AquaplanError) as err:
            pipeline.run_stage2(demo_cfg, "{}")
        assert err.value.code == "BAD_ARTIFACT"


class TestFitPredictStage:
    def test_full_outputs(self, demo_cfg, plan_result, run_result):
        result = pipeline.fit_predict(
            demo_cfg,
            run_result.artifacts["run/log.csv"],
            plan_result.artifacts["plan/rois.json"],
        )
        names = set(result.artifacts)
        assert {"predict/model.json", "predict/report.json", "predict/report.txt"} <= names
        surfaces = [n for n in names if n.startswith("predict/surface_roi")]
        assert len(surfaces) == 4  # 5 ROIs minus the training one
        report = json.loads(result.artifacts["predict/report.json"])
        pooled = report["heldout"]["pooled"]
        assert pooled["tp"] + pooled["fp"] + pooled["tn"] + pooled["fn"] == pooled["n"]
        assert 0.0 <= pooled["accuracy"] <= 1.0
        # recovery gate relative to the planted model's accuracy
        bayes = report["heldout"]["bayes_accuracy"]
        assert pooled["accuracy"] >= 0.5 + 0.8 * (bayes - 0.5)

    def test_surface_row_counts_match_grid(self, demo_cfg, plan_result, run_result):
        result = pipeline.fit_predict(
            demo_cfg,
            run_result.artifacts["run/log.csv"],
            plan_result.artifacts["plan/rois.json"],
        )
        rois = json.loads(plan_result.artifacts["plan/rois.json"])["rois"]
        by_id = {r["cluster_id"]: r for r in rois}
        import math

        for name, text in result.artifacts.items():
            if not name.startswith("predict/surface_roi"):
                continue
            cid = int(name.removeprefix("predict/surface_roi").removesuffix(".csv"))
            n_axis = (
                math.ceil(2 * by_id[cid]["radius_m"] / demo_cfg.predict.surface_resolution)
                + 1
            )
            assert len(text.splitlines()) == n_axis * n_axis + 1

    def test_single_class_is_coded_error(self, demo_cfg, plan_result, run_result):
        cfg = demo_cfg.model_copy(deep=True)
        cfg.occurrence.w0 = -1000.0  # silence every detection
        stage2 = pipeline.run_stage2(cfg, plan_result.artifacts["plan/mission.geojson"])
        with pytest.raises(AquaplanError) as err:
            pipeline.fit_predict(
                cfg,
                stage2.artifacts["run/log.csv"],
                plan_result.artifacts["plan/rois.json"],
            )
        assert err.value.code == "SINGLE_CLASS"


class TestPlots:
    def test_four_svgs(self, demo_cfg, survey_result, plan_result, run_result):
        prediction = pipeline.fit_predict(
            demo_cfg,
            run_result.artifacts["run/log.csv"],
            plan_result.artifacts["plan/rois.json"],
        )
        result = pipeline.render_plots(
            demo_cfg,
            survey_result.artifacts["survey/trajectory.csv"],
            survey_result.artifacts["survey/sites.csv"],
            plan_result.artifacts["plan/rois.json"],
            plan_result.artifacts["plan/mission.geojson"],
            {
                n.split("/", 1)[1]: t
                for n, t in prediction.artifacts.items()
                if n.startswith("predict/surface_")
            },
        )
        assert set(result.artifacts) == {
            "plots/survey.svg",
            "plots/clusters.svg",
            "plots/mission.svg",
            "plots/surface.svg",
        }
        for text in result.artifacts.values():
            assert text.startswith("<svg") and len(text) > 200

    def test_empty_sites_still_renders(self, demo_cfg, survey_result, plan_result):
        result = pipeline.render_plots(
            demo_cfg,
            survey_result.artifacts["survey/trajectory.csv"],
            "east_m,north_m\n",
            plan_result.artifacts["plan/rois.json"],
            plan_result.artifacts["plan/mission.geojson"],
            {},
        )
        assert "<svg" in result.artifacts["plots/clusters.svg"]

    def test_missing_artifact_is_coded_error(self, demo_cfg, survey_result, plan_result):
        with pytest.raises(AquaplanError) as err:
            pipeline.render_plots(
                demo_cfg,
                "not a trajectory",
                "east_m,north_m\n",
                plan_result.artifacts["plan/rois.json"],
                plan_result.artifacts["plan/mission.geojson"],
                {},
            )
        assert err.value.code == "BAD_ARTIFACT"


class TestDemo:
    def test_demo_summary_reports_information_gain(self, demo_cfg):
        result = pipeline.run_demo(demo_cfg)
        gain = result.summary["information_gain"]
        assert gain["ratio"] is not None and gain["ratio"] > 1.0
        assert "demo/summary.json" in result.artifacts
