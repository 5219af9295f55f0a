"""Jet-valued tensors of a defining function at one phase point.

Index layout (leading jet axes):

* ``contact[a]`` = g_a, ``hessian[a, b]`` = g_ab, ``base_gradient[a]`` = G_a
* ``u[a]`` = u^a, the vertical part of the spray
* ``U[b, a]`` = U_b^a = -1/2 D_b u^a
* ``R[a, b, c]`` = R_ab^c, antisymmetric in (a, b)
* ``S[a, b]`` = S_ab, ``T[a, b]`` = T_a^b = 2 v^c R_ca^b

Every tensor is a :class:`~.jets.Jet`; its jet orders drop as derivatives are
taken, so seeding G at orders (X, V) yields u at (X-1, V-2), U at (X-1, V-3)
and R, S at (X-2, V-4).
"""

from __future__ import annotations

from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .errors import RegularityError
from .fields import PhasePoint, ScalarField, field_jet
from .jets import Jet, inverse, jet_space, matmul, solve

if TYPE_CHECKING:
    from .catalog import DefiningFunction

#: Jet orders of G needed for the spray value.
SPRAY_ORDERS = (1, 2)
#: ... for the connection value and the first derivatives of the spray.
CONNECTION_ORDERS = (2, 3)
#: ... for curvature and tidal-force values.
CURVATURE_ORDERS = (2, 4)
#: ... for first derivatives of curvature (identity suite).
IDENTITY_ORDERS = (3, 5)


def antisymmetrize3(tensor: np.ndarray) -> np.ndarray:
    """Total antisymmetrization over the first three axes, weight 1/6."""
    rest = tuple(range(3, tensor.ndim))
    permutations = [
        ((0, 1, 2), 1.0),
        ((1, 2, 0), 1.0),
        ((2, 0, 1), 1.0),
        ((1, 0, 2), -1.0),
        ((0, 2, 1), -1.0),
        ((2, 1, 0), -1.0),
    ]
    return sum(sign * tensor.transpose(perm + rest) for perm, sign in permutations) / 6.0


class GeometryJets:
    """Lazily computed jets of G, the spray, the connection and the curvature."""

    def __init__(
        self,
        geometry: DefiningFunction,
        point: PhasePoint,
        orders: tuple[int, int] = CURVATURE_ORDERS,
    ):
        self.geometry = geometry
        self.point = point
        self.orders = orders
        self.G = field_jet(geometry.field, point, *orders)
        space = jet_space(point.n, *orders)
        self.x, self.v = Jet.coordinates(space, point.x, point.v)

    @property
    def n(self) -> int:
        return self.point.n

    def field(self, f: ScalarField) -> Jet:
        """Jet of another field (e.g. a conformal factor) at the same point."""
        return field_jet(f, self.point, *self.orders)

    # -- first-order data ---------------------------------------------------

    @cached_property
    def contact(self) -> Jet:
        return self.G.grad_v()

    @cached_property
    def hessian(self) -> Jet:
        return self.contact.grad_v()

    @cached_property
    def base_gradient(self) -> Jet:
        return self.G.grad_x()

    @cached_property
    def condition(self) -> float:
        return float(np.linalg.cond(self.hessian.value))

    @cached_property
    def spray_rhs(self) -> Jet:
        """G_b - v^c d_c g_b."""
        mixed = self.contact.grad_x()  # [b, c] = d_c g_b
        return self.base_gradient - (mixed * self.v).sum(axis=-1)

    @cached_property
    def u(self) -> Jet:
        """Solution of u^a g_ab = G_b - v^c d_c g_b."""
        try:
            return solve(self.hessian, self.spray_rhs)
        except RegularityError as error:
            raise RegularityError(
                f"Hessian of {self.geometry.name} at {self.point!r}: {error}",
                condition=error.condition,
                point=self.point,
            ) from error

    def along_spray(self, f: Jet) -> Jet:
        """V(f) = v^a d_a f + u^a D_a f, entrywise over the leading axes of f."""
        return (f.grad_x() * self.v).sum(axis=-1) + (f.grad_v() * self.u).sum(axis=-1)

    # -- connection ---------------------------------------------------------

    @cached_property
    def U(self) -> Jet:
        return -0.5 * self.u.grad_v().T

    @cached_property
    def inverse_hessian(self) -> Jet:
        return inverse(self.hessian)

    # -- curvature ----------------------------------------------------------

    @cached_property
    def R_raw(self) -> Jet:
        """d_a U_b^c - U_a^d D_d U_b^c before antisymmetrization."""
        U = self.U
        horizontal = U.grad_x().transpose(2, 0, 1)  # [a, b, c] = d_a U_b^c
        vertical = U.grad_v()  # [b, c, d] = D_d U_b^c
        transport = (U[:, None, None, :] * vertical[None, :, :, :]).sum(axis=-1)
        return horizontal - transport

    @cached_property
    def R(self) -> Jet:
        raw = self.R_raw
        return 0.5 * (raw - raw.transpose(1, 0, 2))

    @cached_property
    def S_raw(self) -> Jet:
        """The closed tidal-force formula before symmetrization."""
        V = self.along_spray
        hessian = self.hessian
        mixed = self.contact.grad_x()  # [b, a] = d_a g_b
        mixed_sym = 0.5 * (mixed + mixed.T)
        second = self.base_gradient.grad_x()
        transport = matmul(matmul(self.U, hessian), self.U.T)
        return 0.5 * (V(V(hessian)) - 2 * V(mixed_sym) + 2 * second - 2 * transport)

    @cached_property
    def S(self) -> Jet:
        raw = self.S_raw
        return 0.5 * (raw + raw.T)

    @cached_property
    def T(self) -> Jet:
        """T_a^b = 2 v^c R_ca^b."""
        return 2 * (self.R * self.v[:, None, None]).sum(axis=0)

    @cached_property
    def S_mixed(self) -> Jet:
        """S_b^c = S_bd g^dc."""
        return matmul(self.S, self.inverse_hessian)


__all__ = [
    "SPRAY_ORDERS",
    "CONNECTION_ORDERS",
    "CURVATURE_ORDERS",
    "IDENTITY_ORDERS",
    "antisymmetrize3",
    "GeometryJets",
]
