"""Cloth state from border curves: dGLI disks, CloSE extraction, labels and plans."""

from .disk import DGLIDisk, DiskDiff, compute_disk, disk_abs_diff, disk_signed_diff, map_to_disk
from .extract import CloSE, FitParams, FoldCurve, extract_close, fit_fold_curves, orient_fold
from .geometry import BorderCurve, Segment, dgli, gli_analytic, normalize_border, resample_border
from .metrics import EvalReport, evaluate, frechet_discrete, predict_end_border, rmse_curves
from .plan import PlanStep, plan, select_pick_corners
from .semantics import SemanticLabel, label
from .synth import FoldSample, FoldSpec, apply_fold, build_shape, generate_dataset, make_shape

__all__ = [
    "BorderCurve", "CloSE", "DGLIDisk", "DiskDiff", "EvalReport", "FitParams", "FoldCurve",
    "FoldSample", "FoldSpec", "PlanStep", "Segment", "SemanticLabel", "apply_fold",
    "build_shape",
    "compute_disk", "dgli", "disk_abs_diff", "disk_signed_diff", "evaluate", "extract_close",
    "fit_fold_curves", "frechet_discrete", "generate_dataset", "gli_analytic", "label",
    "make_shape", "map_to_disk", "normalize_border", "orient_fold", "plan",
    "predict_end_border", "resample_border", "rmse_curves", "select_pick_corners",
]
