"""Classical Levi-Civita data of a quadratic metric, computed with sympy.

This path shares nothing with the jet pipeline beyond the parsed metric
expressions: metric derivatives come from symbolic differentiation and are
lambdified, and every tensor below is assembled with numpy.

Conventions: ``christoffel(x)[a, b, c]`` = Gamma^a_bc and
``riemann(x)[a, b, c, d]`` = R^a_bcd with R(X, Y)Z = R^a_bcd Z^b X^c Y^d, i.e.
R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb.
"""

from __future__ import annotations

from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable, Sequence

import numpy as np

from .errors import RegularityError, ValidationError
from .jets import MAX_CONDITION

if TYPE_CHECKING:
    from .catalog import DefiningFunction


class ClassicalMetric:
    """A metric g_ab(x) given by sympy expressions in ``x1..xn``."""

    def __init__(self, components: Sequence[Sequence[Any]], name: str = "metric"):
        import sympy

        self.name = name
        self.n = len(components)
        self.symbols = sympy.symbols(f"x1:{self.n + 1}")
        self.matrix = sympy.Matrix(
            [[sympy.sympify(entry) for entry in row] for row in components]
        )
        if self.matrix.shape != (self.n, self.n):
            raise ValidationError(f"{name}: metric must be square")
        if self.matrix != self.matrix.T:
            raise ValidationError(f"{name}: metric is not symmetric")

    @classmethod
    def from_geometry(cls, geometry: DefiningFunction) -> ClassicalMetric:
        """Oracle for a geometry built by ``make_quadratic``."""
        import sympy

        if geometry.metric is None:
            raise ValidationError(f"{geometry.name} carries no metric components")
        n = geometry.n
        symbols = {f"x{a + 1}": sympy.Symbol(f"x{a + 1}") for a in range(n)}
        symbols.update({f"v{a + 1}": sympy.Symbol(f"v{a + 1}") for a in range(n)})
        components = [
            [entry.to_sympy(symbols) if entry is not None else 0 for entry in row]
            for row in geometry.metric
        ]
        return cls(components, name=geometry.name)

    def conformal(self, factor: Any, name: str = "") -> ClassicalMetric:
        """The metric J(x) g_ab for a sympy expression (or string) J."""
        import sympy

        J = sympy.sympify(factor, locals={str(s): s for s in self.symbols})
        return ClassicalMetric(
            (J * self.matrix).tolist(), name=name or f"{self.name}_conformal"
        )

    # -- lambdified metric derivatives ------------------------------------

    def _lambdify(self, array: Any) -> Callable[[np.ndarray], np.ndarray]:
        import sympy

        compiled = sympy.lambdify(self.symbols, array, modules="numpy")
        shape = tuple(int(s) for s in np.shape(array))

        def evaluate(x: np.ndarray) -> np.ndarray:
            values = compiled(*np.asarray(x, dtype=float))
            return np.broadcast_to(np.array(values, dtype=float), shape).copy()

        return evaluate

    @cached_property
    def _g(self) -> Callable[[np.ndarray], np.ndarray]:
        import sympy

        return self._lambdify(sympy.Array(self.matrix))

    @cached_property
    def _dg(self) -> Callable[[np.ndarray], np.ndarray]:
        """[a, b, c] = d_c g_ab."""
        import sympy

        first = self._lambdify(
            sympy.derive_by_array(sympy.Array(self.matrix), self.symbols)
        )
        # derive_by_array puts the derivative index first
        return lambda x: first(x).transpose(1, 2, 0)

    @cached_property
    def _ddg(self) -> Callable[[np.ndarray], np.ndarray]:
        """[a, b, c, d] = d_c d_d g_ab."""
        import sympy

        first = sympy.derive_by_array(sympy.Array(self.matrix), self.symbols)
        second = self._lambdify(sympy.derive_by_array(first, self.symbols))
        return lambda x: second(x).transpose(2, 3, 1, 0)

    def metric(self, x: Sequence[float]) -> np.ndarray:
        return self._g(np.asarray(x, dtype=float))

    def inverse(self, x: Sequence[float]) -> np.ndarray:
        g = self.metric(x)
        condition = float(np.linalg.cond(g))
        if not np.isfinite(condition) or condition > MAX_CONDITION:
            raise RegularityError(
                f"{self.name}: metric singular at x={list(x)} (cond = {condition:.3e})",
                condition=condition,
            )
        return np.linalg.inv(g)

    # -- Levi-Civita data ---------------------------------------------------

    def _first_kind(self, dg: np.ndarray) -> np.ndarray:
        """[e, b, c] = d_b g_ec + d_c g_eb - d_e g_bc."""
        return dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)

    def christoffel(self, x: Sequence[float]) -> np.ndarray:
        """Gamma^a_bc = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)."""
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("ae,ebc->abc", self.inverse(x), self._first_kind(self._dg(x)))

    def christoffel_derivative(self, x: Sequence[float]) -> np.ndarray:
        """[a, b, c, d] = d_d Gamma^a_bc."""
        x = np.asarray(x, dtype=float)
        g_inv = self.inverse(x)
        dg = self._dg(x)
        ddg = self._ddg(x)
        first = self._first_kind(dg)
        # d_d of the first-kind symbols, derivative index last
        d_first = ddg.transpose(0, 2, 1, 3) + ddg - ddg.transpose(2, 0, 1, 3)
        d_inv = -np.einsum("ap,pqd,qe->aed", g_inv, dg, g_inv)
        return 0.5 * (
            np.einsum("aed,ebc->abcd", d_inv, first)
            + np.einsum("ae,ebcd->abcd", g_inv, d_first)
        )

    def riemann(self, x: Sequence[float]) -> np.ndarray:
        Gamma = self.christoffel(x)
        dGamma = self.christoffel_derivative(x)  # [a, b, c, d] = d_d Gamma^a_bc
        return (
            np.einsum("adbc->abcd", dGamma)
            - np.einsum("acbd->abcd", dGamma)
            + np.einsum("ace,edb->abcd", Gamma, Gamma)
            - np.einsum("ade,ecb->abcd", Gamma, Gamma)
        )

    def ricci(self, x: Sequence[float]) -> np.ndarray:
        """Ric_bd = R^a_bad."""
        return np.einsum("abad->bd", self.riemann(x))

    def scalar_curvature(self, x: Sequence[float]) -> float:
        return float(np.einsum("bd,bd->", self.inverse(x), self.ricci(x)))

    def weyl(self, x: Sequence[float]) -> np.ndarray:
        """Lowered Weyl tensor C_abcd (requires n >= 3)."""
        if self.n < 3:
            raise ValidationError("the Weyl tensor needs n >= 3")
        n = self.n
        g = self.metric(x)
        lowered = np.einsum("ae,ebcd->abcd", g, self.riemann(x))
        ric = self.ricci(x)
        scalar = self.scalar_curvature(x)
        ricci_part = (
            np.einsum("ac,bd->abcd", g, ric)
            - np.einsum("ad,bc->abcd", g, ric)
            - np.einsum("bc,ad->abcd", g, ric)
            + np.einsum("bd,ac->abcd", g, ric)
        )
        scalar_part = np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
        return (
            lowered
            - ricci_part / (n - 2)
            + scalar * scalar_part / ((n - 1) * (n - 2))
        )

    # -- along a null direction --------------------------------------------

    def tidal(self, x: Sequence[float], k: Sequence[float]) -> np.ndarray:
        """S_de = g_ae R^a_bcd k^b k^c, so S(X, Y) = g(R(k, X)k, Y)."""
        k = np.asarray(k, dtype=float)
        lowered = np.einsum("ae,abcd->ebcd", self.metric(x), self.riemann(x))
        return np.einsum("ebcd,b,c->de", lowered, k, k)

    def weyl_tidal(self, x: Sequence[float], k: Sequence[float]) -> np.ndarray:
        """C(e, k, k, .) as a matrix [d, e] = C_ebcd k^b k^c."""
        k = np.asarray(k, dtype=float)
        return np.einsum("ebcd,b,c->de", self.weyl(x), k, k)

    def spray(self, x: Sequence[float], v: Sequence[float]) -> np.ndarray:
        """u^a = -Gamma^a_bc v^b v^c."""
        v = np.asarray(v, dtype=float)
        return -np.einsum("abc,b,c->a", self.christoffel(x), v, v)

    def connection(self, x: Sequence[float], v: Sequence[float]) -> np.ndarray:
        """U[b, a] = v^c Gamma^a_bc."""
        return np.einsum("abc,c->ba", self.christoffel(x), np.asarray(v, dtype=float))

    def geodesic_rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.n
        return np.concatenate([y[n:], self.spray(y[:n], y[n:])])

    def jacobi_rhs(
        self, x: Sequence[float], k: Sequence[float], J: np.ndarray, dJ: np.ndarray
    ) -> np.ndarray:
        """Second derivative of a Jacobi field along a geodesic in coordinates.

        Obtained by differentiating the geodesic equation along the variation:
        J'' = A_x J + A_v J' with A = d(u)/d(x, v).
        """
        x = np.asarray(x, dtype=float)
        k = np.asarray(k, dtype=float)
        Gamma = self.christoffel(x)
        dGamma = self.christoffel_derivative(x)
        A_x = -np.einsum("abcd,b,c->ad", dGamma, k, k)
        A_v = -2.0 * np.einsum("abc,c->ab", Gamma, k)
        return A_x @ J + A_v @ dJ


def christoffel_oracle(
    geometry: DefiningFunction, x: Sequence[float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Gamma^a_bc, R^a_bcd, Ric_bd) of a quadratic geometry at ``x``."""
    oracle = ClassicalMetric.from_geometry(geometry)
    return oracle.christoffel(x), oracle.riemann(x), oracle.ricci(x)


__all__ = ["ClassicalMetric", "christoffel_oracle"]
