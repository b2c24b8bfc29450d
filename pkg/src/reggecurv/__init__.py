"""Curvature, connection and covariant operators of Regge metrics."""

from .estimators import (ConnectionEstimator, CovariantCurlEstimator, CurvatureEstimator,
                         IncompatibilityEstimator, ReggeInterpolator)
from .expr import parse
from .lift import (BoundaryData, Functional, assemble_connection_rhs, assemble_curl_rhs,
                   assemble_curvature_rhs, assemble_inc_rhs, lift_connection, lift_curl,
                   lift_curvature, lift_inc, verify_integral_representation)
from .mesh import TriMesh, locate_points, mesh_sequence, perturb, structured_unit_square
from .norms import ConvergenceRecord, eoc, hminus1_error, l2_error
from .spaces import (AnalyticMetric, AnalyticTensor, DofVector, FeSpace, build_space, evaluate_points,
                     interpolate, regge_interpolate)

__all__ = [
    "AnalyticMetric", "AnalyticTensor", "BoundaryData", "ConnectionEstimator", "ConvergenceRecord",
    "CovariantCurlEstimator", "CurvatureEstimator", "DofVector", "FeSpace", "Functional",
    "IncompatibilityEstimator", "ReggeInterpolator", "TriMesh", "assemble_connection_rhs",
    "assemble_curl_rhs", "assemble_curvature_rhs", "assemble_inc_rhs", "build_space", "eoc",
    "evaluate_points", "hminus1_error", "interpolate", "l2_error", "lift_connection", "lift_curl",
    "lift_curvature", "lift_inc", "locate_points", "mesh_sequence", "parse", "perturb",
    "regge_interpolate", "structured_unit_square", "verify_integral_representation",
]
