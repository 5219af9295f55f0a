"""Shadow frames, the generalized Weyl tensor and its conformal invariance.

A shadow frame is a basis of ker(g_a) modulo span(v) at an on-cone point,
stored as the columns of ``ShadowFrame.E``. Everything here compares
endomorphisms (raised with gE^-1) in one shared realization of that quotient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Literal, Optional

import numpy as np
from scipy.linalg import qr

from .curvature import relative
from .errors import PreconditionError, RegularityError, ValidationError
from .fields import PhasePoint, evaluate_jets
from .jets import MAX_CONDITION
from .logger import logger
from .sampling import ON_CONE_TOLERANCE
from .tensors import CONNECTION_ORDERS, CURVATURE_ORDERS, GeometryJets

if TYPE_CHECKING:
    from .catalog import ConformalFactor, DefiningFunction

FrameMethod = Literal["eliminate", "pivot"]

#: Shifts e -> e + c*v used to check well-definedness on the quotient.
QUOTIENT_SHIFTS = (-1.0, 1.0, 10.0)
#: Floor for relative Weyl deviations at conformally flat points.
WEYL_EPSILON = 1e-12


@dataclass(frozen=True, eq=False)
class ShadowFrame:
    """Columns of ``E`` span ker(g_a) modulo span(v); ``gE`` = E^T g E."""

    base: PhasePoint
    E: np.ndarray
    gE: np.ndarray
    hessian: np.ndarray
    contact: np.ndarray
    method: str = "eliminate"

    @property
    def dimension(self) -> int:
        return self.E.shape[1]

    @property
    def signature(self) -> tuple[int, int]:
        eigenvalues = np.linalg.eigvalsh(self.gE)
        return int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.gE))

    @property
    def kernel_residual(self) -> float:
        """max |g_a e^a| relative to |g|."""
        return float(np.max(np.abs(self.contact @ self.E))) / (
            1.0 + float(np.max(np.abs(self.contact)))
        )

    def shifted(self, c: float) -> ShadowFrame:
        """The same quotient basis represented by e + c*v."""
        E = self.E + c * self.base.v[:, None]
        return ShadowFrame(
            base=self.base,
            E=E,
            gE=E.T @ self.hessian @ E,
            hessian=self.hessian,
            contact=self.contact,
            method=self.method,
        )

    def project(self, tensor: np.ndarray) -> np.ndarray:
        """Restriction E^T A E of a covariant 2-tensor."""
        return self.E.T @ tensor @ self.E

    def components(self, vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of column vectors in the basis [E | v].

        Returns the E-components (dimension x m) and the v-components (m,).
        """
        basis = np.column_stack([self.E, self.base.v])
        coefficients = np.linalg.lstsq(basis, vectors, rcond=None)[0]
        return coefficients[:-1], coefficients[-1]


def _kernel(contact: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the kernel of the covector ``contact`` (n x n-1)."""
    Q, _ = qr(contact[:, None])
    return Q[:, 1:]


def _eliminate_basis(kernel: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Remove the v-component on the largest |v| coordinate, then reduce.

    The result is the reduced basis of ker(g) ∩ {w_m = 0} whose pivot
    coordinates (chosen by column-pivoted QR) carry the identity.
    """
    n = v.size
    m = int(np.argmax(np.abs(v)))
    reduced = kernel - np.outer(v, kernel[m] / v[m])
    _, R, pivots = qr(reduced.T, pivoting=True)
    rows = np.zeros((n - 2, n))
    rows[:, pivots] = R[: n - 2]
    chosen = np.sort(pivots[: n - 2])
    basis = np.linalg.solve(rows[:, chosen], rows)
    return basis.T


def _pivot_basis(kernel: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Drop the kernel vector most aligned with v."""
    drop = int(np.argmax(np.abs(kernel.T @ v)))
    return np.delete(kernel, drop, axis=1)


def shadow_frame(
    geometry: DefiningFunction,
    p: PhasePoint,
    method: FrameMethod = "eliminate",
    tolerance: float = ON_CONE_TOLERANCE,
) -> ShadowFrame:
    """Deterministic basis of the shadow space at the on-cone point ``p``.

    ``tolerance`` bounds |G(p)| relative to max(1, |v|^k).

    Raises:
        PreconditionError: if ``p`` is off the cone or g_a vanishes
        RegularityError: if gE is degenerate
    """
    if method not in ("eliminate", "pivot"):
        raise ValidationError(f"unknown frame method {method!r}")
    table = evaluate_jets(geometry.field, p, 0, 2)
    scale = max(1.0, float(np.linalg.norm(p.v)) ** geometry.k)
    if abs(table.value) > tolerance * scale:
        raise PreconditionError(
            f"shadow frame needs an on-cone point; |G| = {abs(table.value):.3e}",
            point=p,
        )
    contact = table.contact
    if not np.any(contact):
        raise PreconditionError("contact covector g_a vanishes", point=p)
    hessian = table.hessian

    kernel = _kernel(contact)
    if method == "eliminate":
        E = _eliminate_basis(kernel, p.v)
    else:
        E = _pivot_basis(kernel, p.v)
    gE = E.T @ hessian @ E
    condition = float(np.linalg.cond(gE))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise RegularityError(
            f"shadow metric of {geometry.name} is degenerate at {p!r} "
            f"(cond = {condition:.3e})",
            condition=condition,
            point=p,
        )
    logger.debug(f"Shadow frame ({method}) at {p!r}: gE eigenvalues {np.linalg.eigvalsh(gE)}")
    return ShadowFrame(
        base=p, E=E, gE=gE, hessian=hessian, contact=contact, method=method
    )


@dataclass(frozen=True, eq=False)
class WeylData:
    """Tidal force restricted to E and its trace-free part.

    ``W`` is covariant (lowered with gE); ``W_endo`` = gE^-1 W.
    """

    frame: ShadowFrame
    Sproj: np.ndarray
    trS: float
    X: float
    W: np.ndarray
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def base(self) -> PhasePoint:
        return self.frame.base

    @property
    def W_endo(self) -> np.ndarray:
        return np.linalg.solve(self.frame.gE, self.W)

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.base.to_dict(),
            "X": self.X,
            "trS": self.trS,
            "W": self.W.tolist(),
            "gE_signature": list(self.frame.signature),
            "residuals": dict(self.residuals),
        }


def _restrict(
    frame: ShadowFrame, S: np.ndarray, T: np.ndarray
) -> tuple[np.ndarray, float, float, np.ndarray]:
    m = frame.dimension
    gE = frame.gE
    Sproj = frame.project(S)
    Sproj = 0.5 * (Sproj + Sproj.T)
    trS = float(np.trace(np.linalg.solve(gE, Sproj)))
    Tproj = frame.project(T @ frame.hessian)
    X = 4.0 / m * float(np.trace(np.linalg.solve(gE, Tproj)))
    W = Sproj - trS / m * gE
    return Sproj, trS, X, W


def weyl_from_tensors(frame: ShadowFrame, S: np.ndarray, T: np.ndarray) -> WeylData:
    """WeylData from already computed S_ab and T_a^b at the frame's base point."""
    Sproj, trS, X, W = _restrict(frame, S, T)
    W_endo = np.linalg.solve(frame.gE, W)
    residuals = {
        "kernel": frame.kernel_residual,
        "trace_free": abs(float(np.trace(W_endo))) / (1.0 + float(np.max(np.abs(Sproj)))),
        "W_symmetry": relative(W - W.T, W),
    }
    quotient = 0.0
    for c in QUOTIENT_SHIFTS:
        shifted = frame.shifted(c)
        S_c, _, X_c, W_c = _restrict(shifted, S, T)
        quotient = max(
            quotient,
            relative(S_c - Sproj, Sproj),
            relative(W_c - W, W),
            abs(X_c - X) / (1.0 + abs(X)),
        )
    residuals["quotient"] = quotient
    return WeylData(frame=frame, Sproj=Sproj, trS=trS, X=X, W=W, residuals=residuals)


def weyl_tensor(
    geometry: DefiningFunction,
    p: PhasePoint,
    method: FrameMethod = "eliminate",
    frame: Optional[ShadowFrame] = None,
) -> WeylData:
    """The generalized Weyl tensor at the on-cone point ``p``."""
    frame = frame if frame is not None else shadow_frame(geometry, p, method)
    jets = GeometryJets(geometry, p, CURVATURE_ORDERS)
    return weyl_from_tensors(frame, jets.S.value, jets.T.value)


def basis_independence(geometry: DefiningFunction, p: PhasePoint) -> float:
    """Max deviation between the sorted W eigenvalues of both frame methods."""
    first = weyl_tensor(geometry, p, "eliminate")
    second = weyl_tensor(geometry, p, "pivot")
    a = np.sort_complex(np.linalg.eigvals(first.W_endo))
    b = np.sort_complex(np.linalg.eigvals(second.W_endo))
    return float(np.max(np.abs(a - b))) / (1.0 + float(np.max(np.abs(a))))


@dataclass(frozen=True, eq=False)
class ConformalReport:
    """Comparison of W and X between G and J*G at one point.

    ``identification_suspect`` is set when gE' differs from J*gE in the shared
    realization, i.e. when a failure points at the identification of the two
    shadow spaces rather than at the invariance itself.
    """

    point: PhasePoint
    J: float
    X: float
    X_measured: float
    X_predicted: float
    weyl_deviation: float
    weyl_absolute: float
    identification_defect: float
    gE_signature: tuple[int, int]
    identification_suspect: bool = False

    @property
    def trace_law_residual(self) -> float:
        return abs(self.X_measured - self.X_predicted) / (
            1.0 + abs(self.X_measured) + abs(self.X_predicted)
        )

    def weyl_invariant(self, tolerance: float) -> bool:
        return self.weyl_deviation <= tolerance or self.weyl_absolute <= 1e-3 * tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.point.to_dict(),
            "J": self.J,
            "X": self.X,
            "X_predicted": self.X_predicted,
            "X_measured": self.X_measured,
            "weyl_deviation": self.weyl_deviation,
            "weyl_absolute": self.weyl_absolute,
            "trace_law_residual": self.trace_law_residual,
            "identification_defect": self.identification_defect,
            "identification_suspect": self.identification_suspect,
            "gE_signature": list(self.gE_signature),
        }


def conformal_compare(
    geometry: DefiningFunction,
    factor: ConformalFactor,
    p: PhasePoint,
    rescaled: Optional[DefiningFunction] = None,
    identification_tolerance: float = 1e-8,
) -> ConformalReport:
    """Compare the Weyl data of G and J*G at ``p`` through one shadow frame.

    V(J) and V^2(J) are taken along the spray of G.

    Raises:
        DomainError: if J vanishes at ``p``
        ValidationError: if the rescaled degree p = k + q equals 1
    """
    from .catalog import conformal_rescale
    from .errors import DomainError

    degree = geometry.k + factor.q
    if abs(degree - 1.0) < 1e-12:
        raise ValidationError(f"rescaled degree p = k + q must differ from 1, got {degree}")
    if rescaled is None:
        rescaled = conformal_rescale(geometry, factor, check_points=0)

    jets = GeometryJets(geometry, p, CURVATURE_ORDERS)
    J_value = factor.field.value(p)
    if abs(J_value) <= 1e-12:
        raise DomainError(f"conformal factor vanishes at {p!r}", point=p)

    frame = shadow_frame(geometry, p)
    original = weyl_from_tensors(frame, jets.S.value, jets.T.value)

    rescaled_jets = GeometryJets(rescaled, p, CURVATURE_ORDERS)
    rescaled_hessian = rescaled_jets.hessian.value
    shared = ShadowFrame(
        base=p,
        E=frame.E,
        gE=frame.E.T @ rescaled_hessian @ frame.E,
        hessian=rescaled_hessian,
        contact=rescaled_jets.contact.value,
        method=frame.method,
    )
    identification_defect = relative(shared.gE - J_value * frame.gE, shared.gE)
    image = weyl_from_tensors(shared, rescaled_jets.S.value, rescaled_jets.T.value)

    # V and V^2 of J along the spray of G
    J_jets = GeometryJets(geometry, p, CONNECTION_ORDERS)
    J_jet = J_jets.field(factor.field)
    VJ_jet = J_jets.along_spray(J_jet)
    VJ = float(VJ_jet.value)
    V2J = float(J_jets.along_spray(VJ_jet).value)
    # X' = X + 2 V(delta) - delta^2 with delta = V(log|J|) / (p - 1)
    X_predicted = (
        original.X
        + 2.0 / (degree - 1.0) * V2J / J_value
        - (2.0 * degree - 1.0) / (degree - 1.0) ** 2 * VJ**2 / J_value**2
    )

    difference = image.W_endo - original.W_endo
    scale = float(np.max(np.abs(original.W_endo)))
    weyl_absolute = float(np.max(np.abs(difference))) / (
        1.0 + float(np.max(np.abs(original.Sproj)))
    )
    weyl_deviation = float(np.max(np.abs(difference))) / max(scale, WEYL_EPSILON)
    suspect = identification_defect > identification_tolerance
    if suspect:
        logger.warning(
            f"Shadow-space identification of {geometry.name} and {rescaled.name} "
            f"is off by {identification_defect:.3e} at {p!r}"
        )
    return ConformalReport(
        point=p,
        J=J_value,
        X=original.X,
        X_measured=image.X,
        X_predicted=X_predicted,
        weyl_deviation=weyl_deviation,
        weyl_absolute=weyl_absolute,
        identification_defect=identification_defect,
        gE_signature=frame.signature,
        identification_suspect=suspect,
    )


__all__ = [
    "QUOTIENT_SHIFTS",
    "WEYL_EPSILON",
    "ShadowFrame",
    "shadow_frame",
    "WeylData",
    "weyl_from_tensors",
    "weyl_tensor",
    "basis_independence",
    "ConformalReport",
    "conformal_compare",
]
