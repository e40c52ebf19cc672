"""Coarse-to-fine survey planning, USV simulation, and occurrence prediction."""

from .envsim import (
    DetectionEvent,
    EnvField,
    EnvSample,
    GaussianBump,
    OccurrenceField,
    ParamField,
    detect,
    eval_field,
    occurrence_prob,
)
from .geo import Circle, GeoPoint, LocalPoint, dist, smallest_enclosing_circle, to_geo, to_local
from .mission import MissionPath, Waypoint
from .nav import PidGains, SimConfig, VehicleState, run_mission
from .predictor import LabeledDataset, LogisticModel, align_labels, evaluate, fit, kfold, predict_proba
from .route import EnergyBudget, TourSolution, check_budget, circle_coverage, stitch_mission, tsp_order
from .survey import Clustering, Roi, SiteSet, Workspace, build_rois, kmeans, select_sites, zigzag_path

__version__ = "0.1.0"
