"""Causal Geometry - numerical sprays, curvature and focusing for generalized null cones."""

from importlib.metadata import version

from .catalog import (
    ConformalFactor,
    DefiningFunction,
    GeometryRegistry,
    builtin_geometry,
    conformal_rescale,
    list_geometries,
    make_quadratic,
)
from .config import RunConfig, apply_overrides, load_config
from .curvature import connection, curvature, identity_suite
from .fields import PhasePoint, evaluate_jets, euler_residuals, finite_difference_check
from .logger import logger
from .raychaudhuri import (
    expansion_decomposition,
    focusing_check,
    raychaudhuri_residual,
    vertex_congruence,
)
from .runner import run
from .spray import integrate_geodesic, spray
from .weyl import conformal_compare, shadow_frame, weyl_tensor

__version__ = version("causal-geometry")
__all__ = [
    "ConformalFactor",
    "DefiningFunction",
    "GeometryRegistry",
    "builtin_geometry",
    "conformal_rescale",
    "list_geometries",
    "make_quadratic",
    "RunConfig",
    "apply_overrides",
    "load_config",
    "connection",
    "curvature",
    "identity_suite",
    "PhasePoint",
    "evaluate_jets",
    "euler_residuals",
    "finite_difference_check",
    "logger",
    "expansion_decomposition",
    "focusing_check",
    "raychaudhuri_residual",
    "vertex_congruence",
    "run",
    "integrate_geodesic",
    "spray",
    "conformal_compare",
    "shadow_frame",
    "weyl_tensor",
]
