"""The harness: run one operation of a :class:`RunConfig` over its points."""

from __future__ import annotations

import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .catalog import (
    ConformalFactor,
    DefiningFunction,
    GeometryRegistry,
    conformal_rescale,
    verify_homogeneity,
)
from .config import RunConfig
from .curvature import connection, identity_residuals, relative
from .errors import CausalGeometryError, ConfigError
from .fields import PhasePoint, evaluate_jets, euler_residuals
from .logger import logger
from .oracle import ClassicalMetric
from .raychaudhuri import (
    expansion_crosscheck,
    focusing_check,
    raychaudhuri_profile,
    rotation_residual,
    vertex_congruence,
)
from .report import RunReport
from .sampling import make_rng, sample_base_point, sample_cone_points
from .spray import conservation_report, integrate_geodesic, spray
from .tensors import CURVATURE_ORDERS, GeometryJets
from .weyl import basis_independence, conformal_compare, weyl_tensor

Checks = dict[str, tuple[Optional[float], float]]

#: Identity residuals asserted by the invariants operation, with their tolerance key.
IDENTITY_CHECKS = {
    "contraction": "contraction",
    "connection_euler": "contraction",
    "symmetry_defect": "symmetry",
    "R_g": "identity",
    "v_S": "identity",
    "two_v_R": "identity",
    "T_lowered": "identity",
    "curl_S": "identity",
    "cyclic_D_R": "identity",
    "bianchi": "identity",
}


@dataclass
class RunContext:
    """Everything a point evaluation needs, rebuilt once per process."""

    config: RunConfig
    geometry: DefiningFunction
    factor: Optional[ConformalFactor] = None
    rescaled: Optional[DefiningFunction] = None
    oracle: Optional[ClassicalMetric] = None

    @classmethod
    def build(
        cls, config: RunConfig, registry: Optional[GeometryRegistry] = None
    ) -> RunContext:
        geometry = config.geometry.build(registry)
        context = cls(config=config, geometry=geometry)
        if config.operation == "conformal-check":
            context.factor = config.geometry.factor(geometry.n)
            if context.factor is None:
                raise ConfigError("conformal-check needs a [geometry.conformal] table")
            context.rescaled = conformal_rescale(
                geometry, context.factor, check_points=0
            )
        if geometry.metric is not None and config.operation in ("eval", "invariants", "weyl"):
            context.oracle = ClassicalMetric.from_geometry(geometry)
        return context

    def tolerance(self, check: str) -> float:
        return self.config.tolerance(check)


@dataclass
class PointResult:
    index: int
    point: dict[str, Any]
    record: Optional[dict[str, Any]] = None
    checks: Checks = field(default_factory=dict)
    error: Optional[dict[str, str]] = None


# -- operations -----------------------------------------------------------------


def _eval_point(context: RunContext, p: PhasePoint) -> tuple[dict[str, Any], Checks]:
    geometry = context.geometry
    data = spray(geometry, p)
    table = evaluate_jets(geometry.field, p, 0, 3)
    euler = euler_residuals(table, geometry.k)
    euler_scale = 1.0 + abs(table.value) + float(np.max(np.abs(table.contact)))
    record = {**data.to_dict(), "G": table.value, "euler": euler}
    checks: Checks = {
        "euler": (float(np.max(euler)) / euler_scale, context.tolerance("euler")),
        "spray_residual": (data.residual, context.tolerance("spray_residual")),
        "vg": (data.vg, context.tolerance("vg")),
    }
    if context.oracle is not None:
        expected = context.oracle.spray(p.x, p.v)
        checks["oracle_u"] = (relative(data.u - expected, expected), context.tolerance("oracle"))
    return record, checks


def _invariants_point(context: RunContext, p: PhasePoint) -> tuple[dict[str, Any], Checks]:
    geometry = context.geometry
    conn = connection(geometry, p)
    residuals = identity_residuals(geometry, p)
    residuals["contraction"] = conn.residuals["contraction"]
    residuals["connection_euler"] = conn.residuals["euler"]
    record = {**p.to_dict(), "residuals": residuals}
    checks: Checks = {
        name: (residuals[name], context.tolerance(key))
        for name, key in IDENTITY_CHECKS.items()
    }
    if context.oracle is not None:
        S = GeometryJets(geometry, p, CURVATURE_ORDERS).S.value
        U_expected = context.oracle.connection(p.x, p.v)
        S_expected = context.oracle.tidal(p.x, p.v)
        checks["oracle_U"] = (relative(conn.U - U_expected, U_expected), context.tolerance("oracle"))
        checks["oracle_S"] = (relative(S - S_expected, S_expected), context.tolerance("oracle"))
    return record, checks


def _weyl_point(context: RunContext, p: PhasePoint) -> tuple[dict[str, Any], Checks]:
    data = weyl_tensor(context.geometry, p)
    basis = basis_independence(context.geometry, p)
    residuals = data.residuals
    record = {**data.to_dict(), "basis": basis}
    checks: Checks = {
        "kernel": (residuals["kernel"], context.tolerance("trace_free")),
        "trace_free": (residuals["trace_free"], context.tolerance("trace_free")),
        "W_symmetry": (residuals["W_symmetry"], context.tolerance("trace_free")),
        "quotient": (residuals["quotient"], context.tolerance("quotient")),
        "basis": (basis, context.tolerance("basis")),
    }
    if context.oracle is not None and context.geometry.n >= 3:
        E = data.frame.E
        gE = data.frame.gE
        C = E.T @ context.oracle.weyl_tidal(p.x, p.v) @ E
        C = 0.5 * (C + C.T)
        m = data.frame.dimension
        W_expected = C - float(np.trace(np.linalg.solve(gE, C))) / m * gE
        checks["weyl_oracle"] = (
            relative(data.W - W_expected, W_expected, data.Sproj),
            context.tolerance("weyl_oracle"),
        )
    return record, checks


def _conformal_point(context: RunContext, p: PhasePoint) -> tuple[dict[str, Any], Checks]:
    assert context.factor is not None
    report = conformal_compare(context.geometry, context.factor, p, context.rescaled)
    # relative deviation, or the absolute one when W itself is negligible
    weyl = min(report.weyl_deviation, 1e3 * report.weyl_absolute)
    checks: Checks = {
        "weyl_deviation": (weyl, context.tolerance("weyl_deviation")),
        "trace_law": (report.trace_law_residual, context.tolerance("trace_law")),
        "identification": (report.identification_defect, context.tolerance("identification")),
    }
    return report.to_dict(), checks


def _geodesic_point(context: RunContext, p: PhasePoint) -> tuple[dict[str, Any], Checks]:
    geometry = context.geometry
    settings = context.config.integrator
    trajectory = integrate_geodesic(
        geometry,
        p,
        settings.t_end,
        tol=settings.tol,
        samples=settings.grid,
        polish=settings.polish,
    )
    conservation = conservation_report(trajectory, geometry)
    record: dict[str, Any] = {
        **p.to_dict(),
        **trajectory.to_dict(),
        "conservation": conservation.to_dict(),
        "semispray_defect": trajectory.semispray_defect(),
    }
    record["rows"] = record.pop("samples")
    drift_tolerance = max(context.tolerance("drift"), 10.0 * settings.tol)
    checks: Checks = {"drift": (conservation.max_drift, drift_tolerance)}
    if geometry.light_cone is not None:
        residuals = [
            geometry.light_cone(p.x, x)
            for t, x in zip(trajectory.times, trajectory.x)
            if abs(t) >= settings.t_min
        ]
        checks["cone_formula"] = (max(residuals, default=0.0), context.tolerance("cone_formula"))
    return record, checks


def _raychaudhuri_point(
    context: RunContext, p: PhasePoint
) -> tuple[dict[str, Any], Checks]:
    settings = context.config.integrator
    congruence = vertex_congruence(
        context.geometry,
        p.x,
        p.v,
        settings.t_end,
        tol=settings.tol,
        grid=settings.grid,
        t_start=settings.t_start,
    )
    t_min = settings.t_min
    focusing = focusing_check(
        congruence,
        t_min,
        focusing_tolerance=context.tolerance("focusing"),
        concavity_tolerance=context.tolerance("concavity"),
    )
    profile = raychaudhuri_profile(congruence, t_min)
    residuals = [row["residual"] for row in profile if row["residual"] is not None]
    record = {
        **p.to_dict(),
        "reached": list(congruence.reached),
        "truncated": congruence.truncated,
        "exit_reason": congruence.exit_reason,
        "focusing": focusing.to_dict(),
        "rows": profile,
    }
    overshoot = None
    if focusing.bound is not None and focusing.bound_satisfied is not None:
        end = focusing.t_conjugate if focusing.t_conjugate is not None else congruence[-1].t
        overshoot = max(0.0, end - focusing.bound)
    checks: Checks = {
        "raychaudhuri": (max(residuals, default=0.0), context.tolerance("raychaudhuri")),
        "rotation": (rotation_residual(congruence, t_min), context.tolerance("rotation")),
        "expansion_crosscheck": (
            expansion_crosscheck(congruence, t_min),
            context.tolerance("expansion_crosscheck"),
        ),
        "focusing": (overshoot, context.tolerance("focusing")),
        "concavity": (focusing.concavity_defect, context.tolerance("concavity")),
    }
    return record, checks


OPERATIONS: dict[str, Callable[[RunContext, PhasePoint], tuple[dict[str, Any], Checks]]] = {
    "eval": _eval_point,
    "geodesic": _geodesic_point,
    "invariants": _invariants_point,
    "weyl": _weyl_point,
    "conformal-check": _conformal_point,
    "raychaudhuri": _raychaudhuri_point,
}


# -- point fan-out --------------------------------------------------------------


def run_points(context: RunContext) -> list[PhasePoint]:
    """The evaluation points of a run, in input order."""
    config = context.config
    geometry = context.geometry
    points = config.points
    if points.explicit:
        phase_points = points.phase_points()
        for p in phase_points:
            if p.n != geometry.n:
                raise ConfigError(
                    f"explicit point {p!r} has dimension {p.n}, geometry has {geometry.n}"
                )
        return phase_points
    base = None
    if config.operation in ("geodesic", "raychaudhuri"):
        base = (
            np.asarray(points.base, dtype=float)
            if points.base is not None
            else sample_base_point(geometry, make_rng(points.seed))
        )
    return sample_cone_points(geometry, points.count, points.seed, base=base)


def evaluate_point(context: RunContext, index: int, p: PhasePoint) -> PointResult:
    """Run the configured operation at one point; library errors become data."""
    result = PointResult(index=index, point=p.to_dict())
    try:
        result.record, result.checks = OPERATIONS[context.config.operation](context, p)
    except ConfigError:
        raise
    except CausalGeometryError as error:
        logger.error(f"Point {index} ({p!r}) failed: {error}")
        result.error = {"error": type(error).__name__, "message": str(error)}
    return result


_CONTEXTS: dict[str, RunContext] = {}


def _evaluate_task(task: tuple[str, RunConfig, int, PhasePoint]) -> PointResult:
    key, config, index, p = task
    context = _CONTEXTS.get(key)
    if context is None:
        context = _CONTEXTS[key] = RunContext.build(config)
    return evaluate_point(context, index, p)


def _results(context: RunContext, points: list[PhasePoint]) -> list[PointResult]:
    workers = context.config.workers
    if workers <= 1 or len(points) <= 1:
        return [evaluate_point(context, i, p) for i, p in enumerate(points)]
    key = uuid.uuid4().hex
    tasks = [(key, context.config, i, p) for i, p in enumerate(points)]
    logger.debug(f"Fanning {len(tasks)} points out over {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order regardless of completion order
        return list(pool.map(_evaluate_task, tasks))


def run(config: RunConfig, registry: Optional[GeometryRegistry] = None) -> RunReport:
    """Execute ``config`` and return its report.

    Raises:
        ConfigError: if the configuration is unusable
        ExpressionError: if a user expression fails to parse
        CausalGeometryError: runtime failures outside per-point work, such as
            sampling or a singular user metric
    """
    config.check()
    started = time.perf_counter()
    context = RunContext.build(config, registry)
    geometry = context.geometry
    report = RunReport(config.operation, geometry.name, config.to_dict())
    logger.info(f"Running {config.operation} on {geometry.name}")

    if config.operation == "eval":
        report.observe(
            "homogeneity",
            verify_homogeneity(geometry, seed=config.points.seed),
            config.tolerance("homogeneity"),
        )

    points = run_points(context)
    sampled = time.perf_counter()
    for result in _results(context, points):
        if result.error is not None:
            report.add_error(result.index, result.point, result.error)
        else:
            assert result.record is not None
            report.add(result.record, result.checks)
    finished = time.perf_counter()

    report.timing = {
        "setup_seconds": sampled - started,
        "points_seconds": finished - sampled,
        "total_seconds": finished - started,
        "points": len(points),
    }
    verdict = {0: "passed", 1: "failed checks", 3: "had runtime errors"}[report.status]
    logger.info(f"{config.operation} on {geometry.name} {verdict} ({len(points)} points)")
    return report


__all__ = [
    "IDENTITY_CHECKS",
    "RunContext",
    "PointResult",
    "OPERATIONS",
    "run_points",
    "evaluate_point",
    "run",
]
