"""Vertex-cone null congruences, Jacobi transport and the Raychaudhuri equation.

All null geodesics through one base point form a hypersurface-orthogonal
congruence. The (n-2) Jacobi fields J_i start at J_i(0) = 0 with J_i'(0) the
shadow basis at the vertex and are transported by the linearized spray flow.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Any, Optional, Union, overload

import numpy as np
from scipy.optimize import bisect

from .errors import (
    DomainError,
    PreconditionError,
    RegularityError,
    ValidationError,
)
from .fields import PhasePoint
from .integrator import FlowResult, integrate_flow
from .jets import MAX_CONDITION
from .logger import logger
from .tensors import CONNECTION_ORDERS, CURVATURE_ORDERS, GeometryJets
from .weyl import FrameMethod, ShadowFrame, shadow_frame

if TYPE_CHECKING:
    from .catalog import DefiningFunction

#: Default vertex exclusion window.
T_MIN = 1e-2
#: |G| tolerance (relative) for shadow frames along an integrated congruence.
FLOW_FRAME_TOLERANCE = 1e-6
#: Finite-difference step along the flow as a fraction of the local time scale.
STEP_FRACTION = 5e-4


def jacobi_rhs(
    geometry: DefiningFunction, phase: PhasePoint, J: np.ndarray, Jdot: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(J', J'') of the linearized spray flow at ``phase``.

    J'' = (du/dx) J + (du/dv) J'; ``J`` may be one vector or an (n, m) matrix
    of columns.
    """
    u = GeometryJets(geometry, phase, CONNECTION_ORDERS).u
    A_x = u.grad_x().value
    A_v = u.grad_v().value
    J = np.asarray(J, dtype=float)
    Jdot = np.asarray(Jdot, dtype=float)
    return Jdot, A_x @ J + A_v @ Jdot


def _congruence_rhs(geometry: DefiningFunction, m: int):
    n = geometry.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x, v = y[:n], y[n : 2 * n]
        J = y[2 * n : 2 * n + n * m].reshape(n, m)
        Jdot = y[2 * n + n * m :].reshape(n, m)
        u = GeometryJets(geometry, PhasePoint(x, v), CONNECTION_ORDERS).u
        A_x = u.grad_x().value
        A_v = u.grad_v().value
        return np.concatenate(
            [v, u.value, Jdot.reshape(-1), (A_x @ J + A_v @ Jdot).reshape(-1)]
        )

    return rhs


def _adjugate(C: np.ndarray) -> np.ndarray:
    m = C.shape[0]
    if m == 1:
        return np.ones((1, 1))
    adjugate = np.empty_like(C)
    for i in range(m):
        for j in range(m):
            minor = np.delete(np.delete(C, j, axis=0), i, axis=1)
            adjugate[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return adjugate


@dataclass(frozen=True, eq=False)
class Deformation:
    """Expansion, shear and rotation of the congruence at one state.

    ``sigma`` and ``rho`` are endomorphisms of the shadow space. When the
    Jacobi matrix is singular (vertex or conjugate point) only ``lambda_K``,
    ``trS`` and ``conjugate`` are meaningful.
    """

    theta: float
    sigma: np.ndarray
    rho: np.ndarray
    lambda_K: float
    trS: float
    conjugate: bool

    @property
    def tr_sigma2(self) -> float:
        return float(np.trace(self.sigma @ self.sigma))

    @property
    def tr_rho2(self) -> float:
        return float(np.trace(self.rho @ self.rho))


class CongruenceState:
    """A geodesic phase point with its transported Jacobi fields."""

    def __init__(
        self,
        geometry: DefiningFunction,
        t: float,
        phase: PhasePoint,
        J: np.ndarray,
        Jdot: np.ndarray,
        method: FrameMethod = "eliminate",
    ):
        self.geometry = geometry
        self.t = float(t)
        self.phase = phase
        self.J = np.asarray(J, dtype=float)
        self.Jdot = np.asarray(Jdot, dtype=float)
        self.method = method

    def __repr__(self) -> str:
        return f"CongruenceState(t={self.t:.6g}, phase={self.phase!r})"

    @cached_property
    def shadow(self) -> ShadowFrame:
        return shadow_frame(
            self.geometry, self.phase, self.method, tolerance=FLOW_FRAME_TOLERANCE
        )

    @cached_property
    def covariant_derivative(self) -> np.ndarray:
        """nabla_k J^a = J'^a + U_b^a J^b for each column."""
        U = GeometryJets(self.geometry, self.phase, CONNECTION_ORDERS).U.value
        return self.Jdot + U.T @ self.J

    @cached_property
    def jacobi_components(self) -> tuple[np.ndarray, np.ndarray]:
        """Shadow components (C, D) of J and of nabla_k J."""
        C, _ = self.shadow.components(self.J)
        D, _ = self.shadow.components(self.covariant_derivative)
        return C, D

    @cached_property
    def trS(self) -> float:
        S = GeometryJets(self.geometry, self.phase, CURVATURE_ORDERS).S.value
        frame = self.shadow
        return float(np.trace(np.linalg.solve(frame.gE, frame.project(S))))

    @cached_property
    def lambda_K(self) -> float:
        C, _ = self.jacobi_components
        return math.sqrt(abs(float(np.linalg.det(C.T @ self.shadow.gE @ C))))

    @cached_property
    def conjugate(self) -> bool:
        """True where the Jacobi matrix is singular (vertex or conjugate point)."""
        C, _ = self.jacobi_components
        condition = float(np.linalg.cond(C))
        return not np.isfinite(condition) or condition > MAX_CONDITION

    @cached_property
    def theta(self) -> float:
        """tr(D C^-1), or NaN at a singular Jacobi matrix."""
        if self.conjugate:
            return math.nan
        C, D = self.jacobi_components
        return float(np.trace(D @ np.linalg.inv(C)))

    @cached_property
    def focus_function(self) -> float:
        """det C / tr(D adj C); a simple root at every conjugate point.

        The vertex (C = 0) counts as a root.
        """
        C, D = self.jacobi_components
        numerator = float(np.linalg.det(C))
        denominator = float(np.trace(D @ _adjugate(C)))
        if denominator == 0.0:
            return 0.0 if numerator == 0.0 else math.copysign(math.inf, numerator)
        return numerator / denominator

    @cached_property
    def deformation(self) -> Deformation:
        return expansion_decomposition(self)

    def to_dict(self) -> dict[str, Any]:
        deformation = self.deformation
        return {
            "t": self.t,
            **self.phase.to_dict(),
            "theta": deformation.theta,
            "tr_sigma2": deformation.tr_sigma2,
            "tr_rho2": deformation.tr_rho2,
            "lambda_K": deformation.lambda_K,
            "trS": deformation.trS,
            "conjugate": deformation.conjugate,
        }


def expansion_decomposition(state: CongruenceState) -> Deformation:
    """Split B = D C^-1 into expansion, shear and rotation.

    A singular Jacobi matrix is reported through ``Deformation.conjugate``
    rather than raised.
    """
    frame = state.shadow
    m = frame.dimension
    C, D = state.jacobi_components
    lambda_K = state.lambda_K
    trS = state.trS
    if state.conjugate:
        nan = np.full((m, m), np.nan)
        return Deformation(math.nan, nan, nan, lambda_K, trS, conjugate=True)
    B = D @ np.linalg.inv(C)
    theta = float(np.trace(B))
    L = frame.gE @ B
    rho = np.linalg.solve(frame.gE, 0.5 * (L - L.T))
    sigma = np.linalg.solve(frame.gE, 0.5 * (L + L.T) - theta / m * frame.gE)
    return Deformation(theta, sigma, rho, lambda_K, trS, conjugate=False)


class Congruence(Sequence[CongruenceState]):
    """Grid states of a vertex congruence with dense evaluation in between."""

    def __init__(
        self,
        geometry: DefiningFunction,
        states: list[CongruenceState],
        forward: Optional[FlowResult],
        backward: Optional[FlowResult],
        method: FrameMethod = "eliminate",
    ):
        self.geometry = geometry
        self.states = states
        self.forward = forward
        self.backward = backward
        self.method = method
        self.rhs = _congruence_rhs(geometry, geometry.n - 2)

    @overload
    def __getitem__(self, index: int) -> CongruenceState: ...

    @overload
    def __getitem__(self, index: slice) -> list[CongruenceState]: ...

    def __getitem__(
        self, index: Union[int, slice]
    ) -> Union[CongruenceState, list[CongruenceState]]:
        return self.states[index]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def exit_reason(self) -> Optional[str]:
        for flow in (self.forward, self.backward):
            if flow is not None and flow.truncated:
                return flow.exit_reason
        return None

    @property
    def truncated(self) -> bool:
        return self.exit_reason is not None

    @property
    def reached(self) -> tuple[float, float]:
        lo = self.backward.t_reached if self.backward is not None else 0.0
        hi = self.forward.t_reached if self.forward is not None else 0.0
        return lo, hi

    def state_at(self, t: float) -> CongruenceState:
        """Dense-output state at any reached parameter ``t``."""
        flow = self.forward if t >= 0 else self.backward
        if flow is None or not flow.contains(t):
            raise ValidationError(f"t={t} is outside the integrated range {self.reached}")
        return _state_from_vector(self.geometry, t, flow(t), self.method)


def _state_vector(state: CongruenceState) -> np.ndarray:
    return np.concatenate(
        [state.phase.x, state.phase.v, state.J.reshape(-1), state.Jdot.reshape(-1)]
    )


def _state_from_vector(
    geometry: DefiningFunction, t: float, y: np.ndarray, method: FrameMethod
) -> CongruenceState:
    n = geometry.n
    m = n - 2
    return CongruenceState(
        geometry,
        t,
        PhasePoint(y[:n], y[n : 2 * n]),
        y[2 * n : 2 * n + n * m].reshape(n, m),
        y[2 * n + n * m :].reshape(n, m),
        method,
    )


def vertex_congruence(
    geometry: DefiningFunction,
    x0: Sequence[float],
    v0: Sequence[float],
    t_end: float,
    tol: float = 1e-10,
    grid: int = 201,
    t_start: float = 0.0,
    method: FrameMethod = "eliminate",
) -> Congruence:
    """Integrate the vertex congruence through (x0, v0) over [t_start, t_end].

    ``t_start < 0`` also integrates backward through the vertex. States are
    emitted on ``grid`` evenly spaced parameters; a domain exit or Hessian
    degeneracy truncates the run and only reached states are kept.

    Raises:
        PreconditionError: if (x0, v0) is off the cone
        ValidationError: for an empty window or fewer than 3 grid states
    """
    if t_start > 0 or t_end <= t_start:
        raise ValidationError(
            f"need t_start <= 0 < t_end, got t_start={t_start}, t_end={t_end}"
        )
    if grid < 3:
        raise ValidationError(f"grid needs at least 3 states, got {grid}")
    vertex = PhasePoint(x0, v0)
    frame = shadow_frame(geometry, vertex, method)
    n = geometry.n
    m = n - 2
    y0 = np.concatenate([vertex.x, vertex.v, np.zeros(n * m), frame.E.reshape(-1)])
    rhs = _congruence_rhs(geometry, m)

    forward = integrate_flow(rhs, 0.0, y0, t_end, tol) if t_end > 0 else None
    backward = integrate_flow(rhs, 0.0, y0, t_start, tol) if t_start < 0 else None
    congruence = Congruence(geometry, [], forward, backward, method)

    for t in np.linspace(t_start, t_end, grid):
        flow = forward if t >= 0 else backward
        if flow is None or not flow.contains(t):
            continue
        congruence.states.append(_state_from_vector(geometry, float(t), flow(t), method))

    if congruence.truncated:
        logger.info(
            f"Congruence of {geometry.name} from {vertex!r} truncated: "
            f"{congruence.exit_reason}"
        )
    logger.debug(f"Congruence of {geometry.name}: {len(congruence)} states")
    return congruence


# -- derivatives along the congruence -------------------------------------------


def _valid(state: CongruenceState, t_min: float) -> bool:
    return abs(state.t) >= t_min and not state.conjugate


def _flow_derivative(
    congruence: Congruence, state: CongruenceState, quantity, t_min: float
) -> Optional[float]:
    """Five-point derivative of ``quantity`` along the congruence vector field.

    The stencil states are y + k h f(y), which leave the integrated trajectory
    only at O(h^2), so integrator error does not enter the difference. The step
    follows the local time scale min(|t|, m/|theta|), which shrinks towards the
    vertex and towards conjugate points alike.
    """
    t = state.t
    scale = max(abs(t), t_min)
    theta = state.theta
    if math.isfinite(theta) and theta != 0.0:
        scale = min(scale, state.shadow.dimension / abs(theta))
    h = STEP_FRACTION * scale
    y = _state_vector(state)
    try:
        direction = congruence.rhs(t, y)
        values = [
            quantity(
                _state_from_vector(
                    congruence.geometry, t + k * h, y + k * h * direction, congruence.method
                )
            )
            for k in (-2, -1, 1, 2)
        ]
    except (ValidationError, PreconditionError, DomainError, RegularityError):
        return None
    f_m2, f_m1, f_p1, f_p2 = values
    if not all(map(math.isfinite, values)):
        return None
    return (f_m2 - 8 * f_m1 + 8 * f_p1 - f_p2) / (12 * h)


def _grid_derivatives(states: Sequence[CongruenceState], quantity) -> list[Optional[float]]:
    """Central differences on a uniform grid; fourth order inside, second at edges."""
    values = [quantity(s) for s in states]
    count = len(states)
    derivatives: list[Optional[float]] = [None] * count
    for i in range(1, count - 1):
        h = states[i + 1].t - states[i].t
        if 2 <= i <= count - 3:
            window = values[i - 2 : i + 3]
            if all(map(math.isfinite, window)):
                derivatives[i] = (
                    window[0] - 8 * window[1] + 8 * window[3] - window[4]
                ) / (12 * h)
                continue
        if math.isfinite(values[i - 1]) and math.isfinite(values[i + 1]):
            derivatives[i] = (values[i + 1] - values[i - 1]) / (2 * h)
    return derivatives


def _derivatives(
    states: Sequence[CongruenceState], quantity, t_min: float
) -> list[Optional[float]]:
    if isinstance(states, Congruence):
        return [
            _flow_derivative(states, s, quantity, t_min) if _valid(s, t_min) else None
            for s in states
        ]
    derivatives = _grid_derivatives(states, quantity)
    return [
        d if _valid(s, t_min) else None for s, d in zip(states, derivatives)
    ]


def _theta(state: CongruenceState) -> float:
    return state.theta


def _log_lambda(state: CongruenceState) -> float:
    value = state.lambda_K
    return math.log(value) if value > 0 else math.nan


def raychaudhuri_profile(
    states: Sequence[CongruenceState], t_min: float = T_MIN
) -> list[dict[str, Any]]:
    """Per-state rows (t, theta, tr sigma^2, tr rho^2, lambda_K, trS, residual).

    ``residual`` is the absolute |theta' + tr rho^2 + tr sigma^2 + theta^2/m - trS|;
    it is None within ``t_min`` of the vertex, at conjugate states and where no
    derivative is available.
    """
    if len(states) < 3:
        raise ValidationError(f"need at least 3 states, got {len(states)}")
    derivatives = _derivatives(states, _theta, t_min)
    rows = []
    for state, theta_dot in zip(states, derivatives):
        d = state.deformation
        residual = None
        if theta_dot is not None:
            m = state.shadow.dimension
            residual = abs(
                theta_dot + d.tr_rho2 + d.tr_sigma2 + d.theta**2 / m - d.trS
            )
        rows.append(
            {
                "t": state.t,
                "theta": d.theta,
                "tr_sigma2": d.tr_sigma2,
                "tr_rho2": d.tr_rho2,
                "lambda_K": d.lambda_K,
                "trS": d.trS,
                "residual": residual,
            }
        )
    return rows


def raychaudhuri_residual(
    states: Sequence[CongruenceState], t_min: float = T_MIN
) -> float:
    """Max Raychaudhuri residual over the states at least ``t_min`` from the vertex."""
    residuals = [
        row["residual"]
        for row in raychaudhuri_profile(states, t_min)
        if row["residual"] is not None
    ]
    return max(residuals, default=0.0)


def expansion_crosscheck(
    states: Sequence[CongruenceState], t_min: float = T_MIN
) -> float:
    """Max |theta - d/dt log lambda_K| / (1 + |theta|)."""
    derivatives = _derivatives(states, _log_lambda, t_min)
    worst = 0.0
    for state, log_rate in zip(states, derivatives):
        if log_rate is None:
            continue
        theta = state.deformation.theta
        worst = max(worst, abs(theta - log_rate) / (1.0 + abs(theta)))
    return worst


def rotation_residual(states: Sequence[CongruenceState], t_min: float = T_MIN) -> float:
    """Max |rho| over valid states."""
    return max(
        (
            float(np.max(np.abs(s.deformation.rho)))
            for s in states
            if _valid(s, t_min)
        ),
        default=0.0,
    )


# -- focusing -------------------------------------------------------------------


@dataclass(frozen=True)
class FocusingReport:
    """Outcome of the focusing bound on one congruence.

    ``triggered`` is False when theta never becomes negative;
    ``applicable`` is False when trS > tolerance somewhere after t0.
    """

    triggered: bool
    applicable: bool
    t0: Optional[float] = None
    theta0: Optional[float] = None
    bound: Optional[float] = None
    t_conjugate: Optional[float] = None
    bound_satisfied: Optional[bool] = None
    concavity_defect: float = 0.0
    concave: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.concave and self.bound_satisfied is not False

    def to_dict(self) -> dict[str, Any]:
        return {
            "triggered": self.triggered,
            "applicable": self.applicable,
            "t0": self.t0,
            "theta0": self.theta0,
            "bound": self.bound,
            "t_conjugate": self.t_conjugate,
            "bound_satisfied": self.bound_satisfied,
            "concavity_defect": self.concavity_defect,
            "concave": self.concave,
            "note": self.note,
        }


def _locate_root(
    states: Sequence[CongruenceState], i: int, xtol: float
) -> Optional[float]:
    left, right = states[i], states[i + 1]
    f_left, f_right = left.focus_function, right.focus_function
    if f_left == 0.0:
        return left.t
    if f_right == 0.0:
        return right.t
    if not isinstance(states, Congruence):
        return left.t - f_left * (right.t - left.t) / (f_right - f_left)

    congruence = states

    def focus(t: float) -> float:
        return congruence.state_at(t).focus_function

    root = bisect(focus, left.t, right.t, xtol=xtol)
    # a sign change through a pole of the focus function is not a root
    if abs(focus(root)) > 1e-6 * (1.0 + abs(right.t - left.t)):
        return None
    return float(root)


def first_conjugate_point(
    states: Sequence[CongruenceState], start: int = 0, xtol: float = 1e-12
) -> Optional[float]:
    """Parameter of the first root of the focus function at or after ``start``."""
    for i in range(start, len(states) - 1):
        f_left = states[i].focus_function
        f_right = states[i + 1].focus_function
        if math.isnan(f_left) or math.isnan(f_right):
            continue
        if f_left == 0.0 or f_left * f_right < 0 or f_right == 0.0:
            root = _locate_root(states, i, xtol)
            if root is not None:
                return root
    return None


def concavity_defect(
    states: Sequence[CongruenceState],
    t_min: float = T_MIN,
    until: Optional[float] = None,
    energy_tolerance: float = 0.0,
) -> float:
    """Largest positive second difference of lambda_K^(1/m) where trS <= tolerance.

    Only forward states between ``t_min`` and ``until`` (the first conjugate
    point) are used.
    """
    window = [
        s
        for s in states
        if s.t >= t_min and (until is None or s.t < until)
    ]
    worst = 0.0
    for a, b, c in zip(window, window[1:], window[2:]):
        if max(a.trS, b.trS, c.trS) > energy_tolerance:
            continue
        m = b.shadow.dimension
        fa, fb, fc = (s.lambda_K ** (1.0 / m) for s in (a, b, c))
        worst = max(worst, fa - 2 * fb + fc)
    return worst


def focusing_check(
    states: Sequence[CongruenceState],
    t_min: float = T_MIN,
    focusing_tolerance: float = 1e-6,
    concavity_tolerance: float = 1e-7,
    energy_tolerance: float = 1e-9,
) -> FocusingReport:
    """Check the conjugate-point bound t_conj <= t0 - (n-2)/theta(t0)."""
    if len(states) < 3:
        raise ValidationError(f"need at least 3 states, got {len(states)}")
    t_conj_any = first_conjugate_point(
        states, start=next((i for i, s in enumerate(states) if s.t >= t_min), 0)
    )
    defect = concavity_defect(states, t_min, t_conj_any, energy_tolerance)
    concave = defect <= concavity_tolerance

    start = next(
        (
            i
            for i, s in enumerate(states)
            if _valid(s, t_min) and s.deformation.theta < 0
        ),
        None,
    )
    if start is None:
        return FocusingReport(
            triggered=False,
            applicable=True,
            t_conjugate=t_conj_any,
            concavity_defect=defect,
            concave=concave,
            note="bound not triggered: theta >= 0 on the window",
        )

    state0 = states[start]
    m = state0.shadow.dimension
    theta0 = state0.deformation.theta
    bound = state0.t - m / theta0
    t_conj = first_conjugate_point(states, start)
    end = t_conj if t_conj is not None else states[-1].t
    violations = [
        s.t for s in states[start:] if s.t <= end and s.trS > energy_tolerance
    ]
    if violations:
        logger.warning(
            f"Focusing bound non-applicable for {state0.geometry.name}: "
            f"trS > 0 at t={violations[0]:.6g}"
        )
        return FocusingReport(
            triggered=True,
            applicable=False,
            t0=state0.t,
            theta0=theta0,
            bound=bound,
            t_conjugate=t_conj,
            concavity_defect=defect,
            concave=concave,
            note=f"non-applicable: energy condition violated at t={violations[0]:.6g}",
        )

    if t_conj is not None:
        satisfied = t_conj <= bound + focusing_tolerance
        note = f"conjugate point at t={t_conj:.10g}, bound {bound:.10g}"
    elif bound <= states[-1].t:
        satisfied = False
        note = f"no conjugate point before the bound {bound:.10g}"
    else:
        satisfied = None
        note = f"bound {bound:.10g} lies beyond the integrated window"
    return FocusingReport(
        triggered=True,
        applicable=True,
        t0=state0.t,
        theta0=theta0,
        bound=bound,
        t_conjugate=t_conj,
        bound_satisfied=satisfied,
        concavity_defect=defect,
        concave=concave,
        note=note,
    )


__all__ = [
    "T_MIN",
    "jacobi_rhs",
    "Deformation",
    "CongruenceState",
    "expansion_decomposition",
    "Congruence",
    "vertex_congruence",
    "raychaudhuri_profile",
    "raychaudhuri_residual",
    "expansion_crosscheck",
    "rotation_residual",
    "FocusingReport",
    "first_conjugate_point",
    "concavity_defect",
    "focusing_check",
]
