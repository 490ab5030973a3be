"""Risk-bounded motion planning among polynomial obstacles with uncertain parameters."""

from .poly_core import DegeneratePolynomialError, LinePoly, PlanePoly, TriPoly
from .risk_map import Environment, MapImage, RiskConstraintSet, Zone, build_constraints, classify_point, rasterize
from .uncertainty import Beta, Gaussian, Uniform, UncertainObstacle, expect_poly, expect_square, raw_moment
from .verifier import EdgeCertificate, RiskAssessor, verify_edge, verify_path, verify_point
from .planners import Path, PlannerConfig, PlanReport, Status, lsc, nr_rrt_plan, rrt_sos_plan

__version__ = "0.1.0"

__all__ = [
    "Beta", "DegeneratePolynomialError", "EdgeCertificate", "Environment", "Gaussian", "LinePoly",
    "MapImage", "Path", "PlanePoly", "PlanReport", "PlannerConfig", "RiskAssessor", "RiskConstraintSet",
    "Status", "TriPoly", "UncertainObstacle", "Uniform", "Zone", "build_constraints", "classify_point",
    "expect_poly", "expect_square", "lsc", "nr_rrt_plan", "rasterize", "raw_moment", "rrt_sos_plan",
    "verify_edge", "verify_path", "verify_point",
]
