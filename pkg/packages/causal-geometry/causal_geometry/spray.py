"""The null geodesic spray and affinely parametrized null geodesics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Optional, Sequence

import numpy as np
from scipy.integrate import RK45

from .errors import PreconditionError, RegularityError, ValidationError
from .fields import PhasePoint, evaluate_jets
from .integrator import FlowResult, integrate_flow
from .jets import MAX_CONDITION
from .logger import logger
from .tensors import SPRAY_ORDERS, GeometryJets

if TYPE_CHECKING:
    from .catalog import DefiningFunction

#: |G(p0)| accepted as "on cone" by integrate_geodesic, relative to |v|^k.
ON_CONE_START = 1e-10


@dataclass(frozen=True, eq=False)
class SprayData:
    """The vertical spray components at one phase point.

    Args:
        base: The phase point
        u: u^a with u^a g_ab = G_b - v^c d_c g_b
        contact: g_a = D_a G
        residual: max|u g - rhs| / (1 + max|G_b|)
        condition: Condition number of the velocity Hessian
        vg: |V(G)| relative to the magnitude of its two terms
    """

    base: PhasePoint
    u: np.ndarray
    contact: np.ndarray
    residual: float
    condition: float
    vg: float

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.base.to_dict(),
            "u": self.u.tolist(),
            "contact": self.contact.tolist(),
            "spray_residual": self.residual,
            "condition": self.condition,
            "vg": self.vg,
        }


def spray(geometry: DefiningFunction, p: PhasePoint) -> SprayData:
    """Solve for the spray at ``p``.

    Raises:
        RegularityError: if the Hessian condition number exceeds 1e12
        DomainError: if ``p`` is outside the domain of G
    """
    jets = GeometryJets(geometry, p, SPRAY_ORDERS)
    condition = jets.condition
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise RegularityError(
            f"Hessian of {geometry.name} at {p!r} has condition {condition:.3e}",
            condition=condition,
            point=p,
        )
    u = jets.u.value
    hessian = jets.hessian.value
    rhs = jets.spray_rhs.value
    base_gradient = jets.base_gradient.value
    contact = jets.contact.value

    residual = np.max(np.abs(u @ hessian - rhs)) / (1.0 + np.max(np.abs(base_gradient)))
    horizontal = p.v @ base_gradient
    vertical = u @ contact
    vg = abs(horizontal + vertical) / (1.0 + abs(horizontal) + abs(vertical))
    return SprayData(
        base=p,
        u=u,
        contact=contact,
        residual=float(residual),
        condition=condition,
        vg=float(vg),
    )


def geodesic_rhs(geometry: DefiningFunction):
    """Right-hand side of (x', v') = (v, u) on the state [x, v]."""
    n = geometry.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        point = PhasePoint(y[:n], y[n:])
        return np.concatenate([y[n:], GeometryJets(geometry, point, SPRAY_ORDERS).u.value])

    return rhs


def polish_velocity(geometry: DefiningFunction, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """One Newton step of G(x, v) = 0 inside the velocity fiber over ``x``.

    The step moves v along the contact covector g_a (read as a vector through
    the coordinate basis) and leaves x alone. A step along v itself cannot reach
    the cone since G(x, t v) = t^k G(x, v).
    """
    table = evaluate_jets(geometry.field, PhasePoint(x, v), 0, 1)
    g = table.contact
    norm2 = float(g @ g)
    if norm2 == 0.0:
        return v
    return v - table.value * g / norm2


@dataclass(frozen=True, eq=False)
class GeodesicTrajectory:
    """Samples of an affinely parametrized null geodesic.

    ``x``, ``v`` have one row per sample time; ``G`` holds G at each sample.
    A truncated trajectory only carries the sample times it reached.
    """

    geometry: str
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    G: np.ndarray
    steps: int
    rejected: int
    evaluations: int
    exit_reason: Optional[str]
    flow: FlowResult

    @property
    def truncated(self) -> bool:
        return self.exit_reason is not None

    @property
    def max_drift(self) -> float:
        return float(np.max(np.abs(self.G)))

    @property
    def samples(self) -> list[tuple[float, PhasePoint]]:
        return [
            (float(t), PhasePoint(x, v)) for t, x, v in zip(self.times, self.x, self.v)
        ]

    @property
    def endpoint(self) -> PhasePoint:
        return PhasePoint(self.x[-1], self.v[-1])

    def state_at(self, t: float) -> PhasePoint:
        """Dense-output phase point at any ``t`` the integration reached."""
        if not self.flow.contains(t):
            raise ValidationError(
                f"t={t} outside the integrated range "
                f"[{self.flow.t_start}, {self.flow.t_reached}]"
            )
        y = self.flow(t)
        n = self.x.shape[1]
        return PhasePoint(y[:n], y[n:])

    def semispray_defect(self) -> float:
        """max |dx/dt - v| with dx/dt taken from the dense output."""
        if self.flow.solution is None:
            return 0.0
        n = self.x.shape[1]
        defects = []
        for interpolant in self.flow.solution.interpolants:
            t_mid = 0.5 * (interpolant.t_old + interpolant.t)
            h = 1e-6 * abs(interpolant.t - interpolant.t_old)
            dx = (interpolant(t_mid + h)[:n] - interpolant(t_mid - h)[:n]) / (2 * h)
            defects.append(np.max(np.abs(dx - interpolant(t_mid)[n:])))
        return float(max(defects))

    def rows(self) -> list[dict[str, float]]:
        """Table rows (t, x1..xn, v1..vn, G) for export."""
        n = self.x.shape[1]
        rows = []
        for t, x, v, g in zip(self.times, self.x, self.v, self.G):
            row = {"t": float(t)}
            row.update({f"x{i + 1}": float(x[i]) for i in range(n)})
            row.update({f"v{i + 1}": float(v[i]) for i in range(n)})
            row["G"] = float(g)
            rows.append(row)
        return rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "geometry": self.geometry,
            "steps": self.steps,
            "rejected": self.rejected,
            "evaluations": self.evaluations,
            "max_drift": self.max_drift,
            "truncated": self.truncated,
            "exit_reason": self.exit_reason,
            "samples": self.rows(),
        }


def integrate_geodesic(
    geometry: DefiningFunction,
    p0: PhasePoint,
    t_end: float,
    tol: float = 1e-10,
    sample_times: Optional[Sequence[float]] = None,
    samples: int = 101,
    polish: bool = False,
) -> GeodesicTrajectory:
    """Integrate the null geodesic through ``p0`` from t = 0 to ``t_end``.

    Args:
        geometry: The defining function
        p0: On-cone initial point
        t_end: Final affine parameter (may be negative)
        tol: Relative and absolute tolerance of the RK45 error control
        sample_times: Output times; defaults to ``samples`` evenly spaced times
        samples: Number of default sample times
        polish: Re-solve G = 0 along the contact direction after each step

    Raises:
        PreconditionError: if ``p0`` is not on the cone
        ValidationError: if ``tol`` is not positive
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    start_value = geometry.value(p0)
    scale = max(1.0, float(np.linalg.norm(p0.v)) ** geometry.k)
    if abs(start_value) > ON_CONE_START * scale:
        raise PreconditionError(
            f"|G(p0)| = {abs(start_value):.3e} exceeds {ON_CONE_START:g}; "
            "start point is not on the cone",
            point=p0,
        )
    n = geometry.n

    after_step = None
    if polish:

        def after_step(solver: RK45) -> None:
            x, v = solver.y[:n], solver.y[n:]
            solver.y = np.concatenate([x, polish_velocity(geometry, x, v)])
            solver.f = solver.fun(solver.t, solver.y)

    rhs = geodesic_rhs(geometry)
    flow = integrate_flow(
        rhs, 0.0, np.concatenate([p0.x, p0.v]), t_end, tol, after_step=after_step
    )

    times = (
        np.asarray(sample_times, dtype=float)
        if sample_times is not None
        else np.linspace(0.0, t_end, samples)
    )
    times = np.array([t for t in times if flow.contains(t)])
    if times.size == 0:
        times = np.array([0.0])
    states = np.atleast_2d(flow(times).T)
    x, v = states[:, :n], states[:, n:]
    G = np.array([geometry.field.evaluate(xi, vi) for xi, vi in zip(x, v)], dtype=float)

    if flow.truncated:
        logger.info(
            f"Geodesic of {geometry.name} from {p0!r} truncated at "
            f"t={flow.t_reached:.6g}: {flow.exit_reason}"
        )
    return GeodesicTrajectory(
        geometry=geometry.name,
        times=times,
        x=x,
        v=v,
        G=G,
        steps=flow.steps,
        rejected=flow.rejected,
        evaluations=flow.evaluations,
        exit_reason=flow.exit_reason,
        flow=flow,
    )


@dataclass(frozen=True)
class ConservationReport:
    """Constraint drift along a trajectory.

    ``contact_pairing`` is max |v^a g_a| and ``pairing_defect`` is
    max |v^a g_a - k G|, which vanishes identically by homogeneity.
    """

    max_drift: float
    contact_pairing: float
    pairing_defect: float
    samples: int

    def to_dict(self) -> dict[str, float]:
        return {
            "max_drift": self.max_drift,
            "contact_pairing": self.contact_pairing,
            "pairing_defect": self.pairing_defect,
            "samples": self.samples,
        }


def conservation_report(
    trajectory: GeodesicTrajectory, geometry: DefiningFunction
) -> ConservationReport:
    """Recompute G and the contact pairing at every sample of ``trajectory``."""
    drift = pairing = defect = 0.0
    for _, point in trajectory.samples:
        table = evaluate_jets(geometry.field, point, 0, 1)
        value = table.value
        alpha_v = float(point.v @ table.contact)
        drift = max(drift, abs(value))
        pairing = max(pairing, abs(alpha_v))
        defect = max(defect, abs(alpha_v - geometry.k * value))
    return ConservationReport(
        max_drift=drift,
        contact_pairing=pairing,
        pairing_defect=defect,
        samples=len(trajectory.times),
    )


def drift_tolerance(tol: float) -> float:
    """Accepted |G| drift for an integration at tolerance ``tol``."""
    return max(10.0 * tol, 1e-8)


__all__ = [
    "ON_CONE_START",
    "SprayData",
    "spray",
    "geodesic_rhs",
    "polish_velocity",
    "GeodesicTrajectory",
    "integrate_geodesic",
    "ConservationReport",
    "conservation_report",
    "drift_tolerance",
]
