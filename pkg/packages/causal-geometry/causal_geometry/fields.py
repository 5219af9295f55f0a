"""Phase points, scalar fields and their jet tables."""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .errors import CapabilityError, DomainError, ValidationError
from .expression import Expression, Inequality, parse_expression, parse_inequality
from .jets import Jet, as_jet, jet_space
from .logger import logger

#: Jet orders every built-in (analytic) field supports.
DEFAULT_CAPABILITY = (3, 5)


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """A point (x, v) of the tangent bundle with the zero section removed."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise ValidationError(
                f"x and v must have equal length, got {x.size} and {v.size}"
            )
        if x.size < 2:
            raise ValidationError(f"phase points need n >= 2, got n = {x.size}")
        if not np.any(v):
            raise ValidationError("velocity must be nonzero")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.x.size

    def scaled(self, t: float) -> PhasePoint:
        """The point (x, t*v)."""
        return PhasePoint(self.x, t * self.v)

    def to_dict(self) -> dict[str, list[float]]:
        return {"x": self.x.tolist(), "v": self.v.tolist()}

    def __repr__(self) -> str:
        return f"PhasePoint(x={self.x.tolist()}, v={self.v.tolist()})"


class ScalarField(ABC):
    """A real function on phase space, evaluable on floats or jets."""

    n: int
    capability: tuple[int, int] = DEFAULT_CAPABILITY

    @abstractmethod
    def evaluate(self, x: Sequence[Any], v: Sequence[Any]) -> Any:
        """Evaluate on coordinate values (floats or scalar jets)."""

    def in_domain(self, x: Sequence[float], v: Sequence[float]) -> bool:
        return True

    def domain_margin(self, x: Sequence[float], v: Sequence[float]) -> float:
        """Smallest slack of the domain inequalities (inf without any)."""
        return math.inf

    @property
    def depends_on_velocity(self) -> bool:
        return True

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        raise NotImplementedError(f"{type(self).__name__} has no symbolic form")

    def value(self, point: PhasePoint) -> float:
        """Value at ``point``, checking the domain first."""
        if not self.in_domain(point.x, point.v):
            raise DomainError(f"{point!r} is outside the field's domain", point=point)
        return float(self.evaluate(point.x, point.v))


@dataclass(frozen=True)
class ExpressionField(ScalarField):
    """Scalar field given by a parsed expression and domain inequalities."""

    expression: Expression
    domain: tuple[Inequality, ...] = ()
    capability: tuple[int, int] = DEFAULT_CAPABILITY

    @classmethod
    def from_source(
        cls, src: str, n: int, domain: Sequence[str] = ()
    ) -> ExpressionField:
        return cls(
            parse_expression(src, n),
            tuple(parse_inequality(item, n) for item in domain),
        )

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.expression.n

    def evaluate(self, x: Sequence[Any], v: Sequence[Any]) -> Any:
        return self.expression.evaluate(x, v)

    def in_domain(self, x: Sequence[float], v: Sequence[float]) -> bool:
        return all(inequality.holds(x, v) for inequality in self.domain)

    def domain_margin(self, x: Sequence[float], v: Sequence[float]) -> float:
        return min((inequality.margin(x, v) for inequality in self.domain), default=math.inf)

    @property
    def depends_on_velocity(self) -> bool:
        return self.expression.depends_on_velocity

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        return self.expression.to_sympy(symbols)


@dataclass(frozen=True)
class QuadraticField(ScalarField):
    """G = 1/2 g_ab(x) v^a v^b for a symmetric matrix of fields over x.

    ``None`` entries stand for identically zero components.
    """

    metric: tuple[tuple[Optional[ScalarField], ...], ...]
    domain: tuple[Inequality, ...] = ()
    capability: tuple[int, int] = DEFAULT_CAPABILITY

    @property
    def n(self) -> int:  # type: ignore[override]
        return len(self.metric)

    def evaluate(self, x: Sequence[Any], v: Sequence[Any]) -> Any:
        total: Any = 0.0
        for a, b in itertools.combinations_with_replacement(range(self.n), 2):
            entry = self.metric[a][b]
            if entry is None:
                continue
            weight = 0.5 if a == b else 1.0
            total = total + weight * entry.evaluate(x, v) * v[a] * v[b]
        return total

    def in_domain(self, x: Sequence[float], v: Sequence[float]) -> bool:
        return all(inequality.holds(x, v) for inequality in self.domain)

    def domain_margin(self, x: Sequence[float], v: Sequence[float]) -> float:
        return min((inequality.margin(x, v) for inequality in self.domain), default=math.inf)

    def metric_at(self, x: Sequence[float]) -> np.ndarray:
        """Metric components at base point ``x``."""
        dummy = np.ones(self.n)
        return np.array(
            [
                [0.0 if entry is None else float(entry.evaluate(x, dummy)) for entry in row]
                for row in self.metric
            ]
        )


@dataclass(frozen=True)
class ProductField(ScalarField):
    """Pointwise product J * G of two fields."""

    factor: ScalarField
    base: ScalarField

    @property
    def n(self) -> int:  # type: ignore[override]
        return self.base.n

    @property
    def capability(self) -> tuple[int, int]:  # type: ignore[override]
        return (
            min(self.factor.capability[0], self.base.capability[0]),
            min(self.factor.capability[1], self.base.capability[1]),
        )

    def evaluate(self, x: Sequence[Any], v: Sequence[Any]) -> Any:
        return self.factor.evaluate(x, v) * self.base.evaluate(x, v)

    def in_domain(self, x: Sequence[float], v: Sequence[float]) -> bool:
        return self.factor.in_domain(x, v) and self.base.in_domain(x, v)

    def domain_margin(self, x: Sequence[float], v: Sequence[float]) -> float:
        return min(self.factor.domain_margin(x, v), self.base.domain_margin(x, v))

    @property
    def depends_on_velocity(self) -> bool:
        return self.factor.depends_on_velocity or self.base.depends_on_velocity

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        return self.factor.to_sympy(symbols) * self.base.to_sympy(symbols)


@dataclass(frozen=True, eq=False)
class JetTable:
    """All mixed partials of a field at one phase point up to (x_order, v_order)."""

    base: PhasePoint
    x_order: int
    v_order: int
    jet: Jet = field(repr=False)

    def entry(self, x_indices: Sequence[int] = (), v_indices: Sequence[int] = ()) -> float:
        """The partial d_x^alpha D_v^beta G; index order does not matter."""
        return float(self.jet.partial(tuple(sorted(x_indices)), tuple(sorted(v_indices))))

    def entries(self) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
        """Every entry keyed by canonical (sorted) index tuples."""
        n = self.base.n
        space = self.jet.space
        result = {}
        for index, exponents in enumerate(space.exponents):
            x_key = tuple(a for a in range(n) for _ in range(exponents[a]))
            v_key = tuple(a for a in range(n) for _ in range(exponents[n + a]))
            result[(x_key, v_key)] = float(
                self.jet.coeffs[index] * space.factorials[index]
            )
        return result

    @property
    def value(self) -> float:
        return float(self.jet.value)

    @property
    def contact(self) -> np.ndarray:
        """g_a = D_a G."""
        return self.jet.grad_v().value

    @property
    def hessian(self) -> np.ndarray:
        """g_ab = D_a D_b G."""
        return self.jet.grad_v().grad_v().value

    @property
    def third(self) -> np.ndarray:
        """g_abc = D_a D_b D_c G."""
        return self.jet.grad_v().grad_v().grad_v().value

    @property
    def base_gradient(self) -> np.ndarray:
        """G_a = d_a G."""
        return self.jet.grad_x().value


def field_jet(f: ScalarField, p: PhasePoint, x_order: int, v_order: int) -> Jet:
    """Jet of ``f`` at ``p``, checking capability and domain."""
    if f.n != p.n:
        raise ValidationError(f"field has n = {f.n} but point has n = {p.n}")
    max_x, max_v = f.capability
    if not (0 <= x_order <= max_x and 0 <= v_order <= max_v):
        raise CapabilityError(
            f"requested jet orders ({x_order}, {v_order}) exceed field "
            f"capability ({max_x}, {max_v})",
            point=p,
        )
    if not f.in_domain(p.x, p.v):
        raise DomainError(f"{p!r} is outside the field's domain", point=p)
    space = jet_space(p.n, x_order, v_order)
    x, v = Jet.coordinates(space, p.x, p.v)
    return as_jet(f.evaluate(list(x), list(v)), space)


def evaluate_jets(f: ScalarField, p: PhasePoint, x_order: int, v_order: int) -> JetTable:
    """Exact mixed partials of ``f`` at ``p`` up to the requested orders.

    Raises:
        DomainError: if ``p`` is outside the field's domain
        CapabilityError: if the orders exceed ``f.capability``
    """
    jet = field_jet(f, p, x_order, v_order)
    logger.debug(f"Evaluated jets of order ({x_order}, {v_order}) at {p!r}")
    return JetTable(p, x_order, v_order, jet)


def euler_residuals(jets: JetTable, k: float) -> np.ndarray:
    """Residuals of the Euler relations for a degree-``k`` homogeneous field.

    Returns ``(|v.g - kG|, max|v^a g_ab - (k-1) g_b|, max|v^a g_abc - (k-2) g_bc|)``.
    """
    if jets.v_order < 3:
        raise CapabilityError(
            f"Euler residuals need v-order 3, table has {jets.v_order}"
        )
    v = jets.base.v
    g, hessian, third = jets.contact, jets.hessian, jets.third
    return np.array(
        [
            abs(v @ g - k * jets.value),
            np.max(np.abs(v @ hessian - (k - 1) * g)),
            np.max(np.abs(np.einsum("a,abc->bc", v, third) - (k - 2) * hessian)),
        ]
    )


# second-order accurate central difference weights, keyed by derivative order
_CENTRAL_WEIGHTS: dict[int, dict[int, float]] = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
    5: {-3: -0.5, -2: 2.0, -1: -2.5, 1: 2.5, 2: -2.0, 3: 0.5},
}


def _central_difference(f: ScalarField, p: PhasePoint, exponents: np.ndarray, h: float) -> float:
    n = p.n
    origin = np.concatenate([p.x, p.v])
    axes = [
        [(d, offset, weight) for offset, weight in _CENTRAL_WEIGHTS[int(e)].items()]
        for d, e in enumerate(exponents)
        if e > 0
    ]
    total = 0.0
    for stencil in itertools.product(*axes):
        shifted = origin.copy()
        weight = 1.0
        for d, offset, w in stencil:
            shifted[d] += offset * h
            weight *= w
        x, v = shifted[:n], shifted[n:]
        if not f.in_domain(x, v):
            raise DomainError(
                f"finite-difference stencil left the domain at x={x}, v={v}", point=p
            )
        total += weight * float(f.evaluate(x, v))
    return total / h ** int(exponents.sum())


def finite_difference_check(
    f: ScalarField, p: PhasePoint, order_pair: tuple[int, int], h: float
) -> float:
    """Worst deviation between exact jets and central differences.

    Every partial with exactly ``order_pair`` = (|alpha|, |beta|) derivatives is
    compared; the deviation of one entry is ``|fd - exact| / (1 + |exact|)``.

    Raises:
        DomainError: if a stencil point leaves the domain
    """
    if h <= 0:
        raise ValidationError(f"step must be positive, got {h}")
    x_order, v_order = order_pair
    jet = field_jet(f, p, x_order, v_order)
    n = p.n
    space = jet.space
    worst = 0.0
    for index, exponents in enumerate(space.exponents):
        if exponents[:n].sum() != x_order or exponents[n:].sum() != v_order:
            continue
        exact = float(jet.coeffs[index] * space.factorials[index])
        estimate = _central_difference(f, p, exponents, h)
        worst = max(worst, abs(estimate - exact) / (1.0 + abs(exact)))
    logger.debug(f"Finite-difference check order={order_pair} h={h}: {worst:.3e}")
    return worst


def step_halving_ratio(
    f: ScalarField, p: PhasePoint, order_pair: tuple[int, int], h: float
) -> float:
    """Ratio of finite-difference deviations at h and h/2 (about 4 for O(h^2))."""
    coarse = finite_difference_check(f, p, order_pair, h)
    fine = finite_difference_check(f, p, order_pair, h / 2)
    return coarse / fine if fine > 0 else float("inf")


__all__ = [
    "DEFAULT_CAPABILITY",
    "PhasePoint",
    "ScalarField",
    "ExpressionField",
    "QuadraticField",
    "ProductField",
    "JetTable",
    "field_jet",
    "evaluate_jets",
    "euler_residuals",
    "finite_difference_check",
    "step_halving_ratio",
]
