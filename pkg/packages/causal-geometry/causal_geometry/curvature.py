"""Ehresmann connection, curvature and tidal force with their identity suite."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable

import numpy as np

from .fields import PhasePoint
from .logger import logger
from .tensors import (
    CONNECTION_ORDERS,
    CURVATURE_ORDERS,
    IDENTITY_ORDERS,
    GeometryJets,
    antisymmetrize3,
)

if TYPE_CHECKING:
    from .catalog import DefiningFunction


def relative(residual: np.ndarray, *scales: np.ndarray) -> float:
    """max|residual| / (1 + max|scale|) over all scales."""
    scale = max((float(np.max(np.abs(s))) for s in scales), default=0.0)
    return float(np.max(np.abs(residual))) / (1.0 + scale)


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """``U[b, a]`` = U_b^a = -1/2 D_b u^a, with H_a = d_a - U_a^b D_b."""

    base: PhasePoint
    U: np.ndarray
    u: np.ndarray
    residuals: dict[str, float] = field(default_factory=dict)

    def horizontal(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        """Components (x-part, v-part) of the horizontal lift H_a."""
        x_part = np.zeros(self.base.n)
        x_part[a] = 1.0
        return x_part, -self.U[a]


def connection(geometry: DefiningFunction, p: PhasePoint) -> ConnectionData:
    """Connection coefficients at ``p`` by exact differentiation of the spray."""
    jets = GeometryJets(geometry, p, CONNECTION_ORDERS)
    U = jets.U.value
    u = jets.u.value
    contact = jets.contact.value
    base_gradient = jets.base_gradient.value
    residuals = {
        "contraction": relative(U @ contact - base_gradient, base_gradient),
        "euler": relative(p.v @ U + u, u),
    }
    return ConnectionData(base=p, U=U, u=u, residuals=residuals)


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """Curvature ``R[a, b, c]`` = R_ab^c, tidal force ``S[a, b]`` and ``T[a, b]`` = T_a^b.

    ``residuals`` holds the cross-identities evaluated at the base point;
    ``v_S`` is only meaningful on the cone.
    """

    base: PhasePoint
    R: np.ndarray
    S: np.ndarray
    T: np.ndarray
    hessian: np.ndarray
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def S_mixed(self) -> np.ndarray:
        """S_b^c = S_ba g^ac."""
        return self.S @ np.linalg.inv(self.hessian)

    def to_dict(self) -> dict[str, Any]:
        """Tensor dump; arrays are nested lists indexed exactly as stored."""
        return {
            **self.base.to_dict(),
            "index_order": {"R": "R[a][b][c] = R_ab^c", "S": "S[a][b]", "T": "T[a][b] = T_a^b"},
            "R": self.R.tolist(),
            "S": self.S.tolist(),
            "T": self.T.tolist(),
            "residuals": dict(self.residuals),
        }


def _curvature_from_jets(jets: GeometryJets) -> CurvatureData:
    p = jets.point
    R_raw = jets.R_raw.value
    R = jets.R.value
    S_raw = jets.S_raw.value
    S = jets.S.value
    T = jets.T.value
    hessian = jets.hessian.value
    contact = jets.contact.value
    S_mixed = S @ np.linalg.inv(hessian)
    residuals = {
        "antisymmetry_defect": relative(R_raw - R, R_raw),
        "symmetry_defect": relative(S_raw - S, S_raw),
        "R_g": relative(R @ contact, R),
        "v_S": relative(p.v @ S, S),
        "two_v_R": relative(T - S_mixed, T, S_mixed),
        "T_lowered": relative(T @ hessian - S, S),
    }
    return CurvatureData(base=p, R=R, S=S, T=T, hessian=hessian, residuals=residuals)


def curvature(geometry: DefiningFunction, p: PhasePoint) -> CurvatureData:
    """R from the horizontal curl of U and S from the closed tidal-force formula.

    The two are computed independently; their consistency is reported in
    :attr:`CurvatureData.residuals`.
    """
    return _curvature_from_jets(GeometryJets(geometry, p, CURVATURE_ORDERS))


def identity_residuals(geometry: DefiningFunction, p: PhasePoint) -> dict[str, float]:
    """Relative residuals of every curvature identity at one on-cone point."""
    jets = GeometryJets(geometry, p, IDENTITY_ORDERS)
    R_jet = jets.R
    R = R_jet.value
    U = jets.U.value
    S_mixed = jets.S_mixed

    # D_a S_b^c
    DS = S_mixed.grad_v().value.transpose(2, 0, 1)
    curl_S = 0.5 * (DS - DS.transpose(1, 0, 2))

    DR = R_jet.grad_v().value  # [b, c, d, e] = D_e R_bc^d
    dR = R_jet.grad_x().value  # [b, c, d, e] = d_e R_bc^d
    D_R = DR.transpose(3, 0, 1, 2)  # [a, b, c, d] = D_a R_bc^d
    H_R = dR.transpose(3, 0, 1, 2) - np.einsum("ae,bcde->abcd", U, DR)
    DU = jets.U.grad_v().value  # [e, d, c] = D_c U_e^d
    R_DU = np.einsum("abe,edc->abcd", R, DU)
    bianchi = antisymmetrize3(H_R) + antisymmetrize3(R_DU)

    curvature_data = _curvature_from_jets(jets)
    residuals = dict(curvature_data.residuals)
    residuals.update(
        {
            "curl_S": relative(curl_S - 3.0 * R, curl_S, R),
            "cyclic_D_R": relative(antisymmetrize3(D_R), D_R),
            "bianchi": relative(bianchi, H_R, R_DU),
        }
    )
    return residuals


@dataclass
class IdentityReport:
    """Per-point identity residuals and their maxima."""

    geometry: str
    records: list[dict[str, Any]] = field(default_factory=list)

    @property
    def checks(self) -> list[str]:
        return sorted({key for r in self.records for key in r["residuals"]})

    def maximum(self, check: str) -> float:
        return max((r["residuals"][check] for r in self.records), default=0.0)

    @property
    def maxima(self) -> dict[str, float]:
        return {check: self.maximum(check) for check in self.checks}

    def passed(self, tolerance: float) -> bool:
        return all(value <= tolerance for value in self.maxima.values())


def identity_suite(geometry: DefiningFunction, points: Iterable[PhasePoint]) -> IdentityReport:
    """Evaluate every curvature identity at each on-cone point."""
    report = IdentityReport(geometry=geometry.name)
    for point in points:
        report.records.append(
            {**point.to_dict(), "residuals": identity_residuals(geometry, point)}
        )
    logger.debug(f"Identity suite for {geometry.name} over {len(report.records)} points")
    return report


__all__ = [
    "relative",
    "ConnectionData",
    "connection",
    "CurvatureData",
    "curvature",
    "identity_residuals",
    "IdentityReport",
    "identity_suite",
]
