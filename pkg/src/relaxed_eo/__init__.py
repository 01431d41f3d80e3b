"""Optimal group-threshold postprocessing under relaxed equalized odds."""

from .analysis import FrontierPoint, ModelSelection, bootstrap, select_best, sweep
from .data import (
    LabeledPredictions,
    LossSpec,
    Prevalences,
    dump_predictions,
    load_predictions,
    prevalences,
)
from .estimator import RelaxedEqualizedOdds
from .postprocess import (
    EvalReport,
    ThresholdPolicy,
    evaluate_policy,
    policy_from_solution,
    predict,
    violation,
)
from .roc import RocCurve, RocHull, VertexMixture, build_hull, build_hulls, build_roc, contains, decompose
from .solver import (
    RelaxedProblem,
    RelaxedSolution,
    solve_relaxed,
    solve_strict,
    unprocess,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "FrontierPoint",
    "LabeledPredictions",
    "LossSpec",
    "ModelSelection",
    "Prevalences",
    "RelaxedEqualizedOdds",
    "RelaxedProblem",
    "RelaxedSolution",
    "RocCurve",
    "RocHull",
    "ThresholdPolicy",
    "VertexMixture",
    "bootstrap",
    "build_hull",
    "build_hulls",
    "build_roc",
    "contains",
    "decompose",
    "dump_predictions",
    "evaluate_policy",
    "load_predictions",
    "policy_from_solution",
    "predict",
    "prevalences",
    "select_best",
    "solve_relaxed",
    "solve_strict",
    "sweep",
    "unprocess",
    "violation",
]
