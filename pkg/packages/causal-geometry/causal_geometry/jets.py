"""Truncated Taylor arithmetic in the phase-space variables (x, v).

A jet space of orders (p, q) holds polynomials in x1..xn, v1..vn whose x-degree
is at most p and whose v-degree is at most q. Products truncate each grading
separately, so every mixed partial of order (|alpha|, |beta|) <= (p, q) carried
through a computation is exact, not a finite-difference estimate.
"""

from __future__ import annotations

import math
from functools import cached_property, lru_cache
from itertools import combinations_with_replacement
from typing import Any, Iterator, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import CapabilityError, DomainError, RegularityError
from .logger import logger

Scalar = Union[float, int, np.ndarray]

#: Condition number above which Hessians and metrics are refused.
MAX_CONDITION = 1e12


def _monomials(nvars: int, order: int) -> list[tuple[int, ...]]:
    """Exponent vectors in ``nvars`` variables of total degree <= ``order``."""
    result = []
    for degree in range(order + 1):
        for combo in combinations_with_replacement(range(nvars), degree):
            exponents = [0] * nvars
            for index in combo:
                exponents[index] += 1
            result.append(tuple(exponents))
    return result


class JetSpace:
    """Monomial basis and multiplication tables for one (n, x_order, v_order).

    Monomials are ordered by total degree, so index 0 is always the constant
    term. Instances are shared through :func:`jet_space`.
    """

    def __init__(self, n: int, x_order: int, v_order: int):
        if x_order < 0 or v_order < 0:
            raise CapabilityError(
                f"jet orders must be non-negative, got ({x_order}, {v_order})"
            )
        self.n = n
        self.x_order = x_order
        self.v_order = v_order

        exponents = [
            xs + vs
            for xs in _monomials(n, x_order)
            for vs in _monomials(n, v_order)
        ]
        exponents.sort(key=sum)
        self.exponents = np.array(exponents, dtype=np.int64).reshape(
            len(exponents), 2 * n
        )
        self.size = len(exponents)
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in row) for row in exponents],
            dtype=float,
        )

        radix = max(x_order, v_order) + 1
        self._weights = radix ** np.arange(2 * n, dtype=np.int64)
        codes = self.exponents @ self._weights
        self._order = np.argsort(codes)
        self._sorted_codes = codes[self._order]
        self._derivative_maps: dict[int, tuple[JetSpace, np.ndarray, np.ndarray]] = {}
        self._restrictions: dict[int, np.ndarray] = {}

        logger.debug(
            f"Built jet space n={n} orders=({x_order}, {v_order}) "
            f"with {self.size} monomials"
        )

    def __repr__(self) -> str:
        return f"JetSpace(n={self.n}, x_order={self.x_order}, v_order={self.v_order})"

    @property
    def depth(self) -> int:
        """Total degree beyond which every product vanishes."""
        return self.x_order + self.v_order

    def index_of(self, exponents: Any) -> np.ndarray:
        """Positions of exponent vectors (shape ``(..., 2n)``) in this basis.

        Raises:
            CapabilityError: if a monomial is not part of the basis
        """
        exponents = np.asarray(exponents, dtype=np.int64)
        n = self.n
        if (
            np.any(exponents < 0)
            or np.any(exponents[..., :n].sum(axis=-1) > self.x_order)
            or np.any(exponents[..., n:].sum(axis=-1) > self.v_order)
        ):
            raise CapabilityError(
                f"monomial outside jet orders ({self.x_order}, {self.v_order})"
            )
        codes = exponents @ self._weights
        return self._order[np.searchsorted(self._sorted_codes, codes)]

    @cached_property
    def _product_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        lefts, rights = [], []
        for i in range(self.size):
            total = self.exponents[i] + self.exponents
            allowed = (total[:, :n].sum(axis=1) <= self.x_order) & (
                total[:, n:].sum(axis=1) <= self.v_order
            )
            partners = np.nonzero(allowed)[0]
            lefts.append(np.full(partners.size, i, dtype=np.int64))
            rights.append(partners)
        left = np.concatenate(lefts)
        right = np.concatenate(rights)
        target = self.index_of(self.exponents[left] + self.exponents[right])

        order = np.argsort(target, kind="stable")
        left, right, target = left[order], right[order], target[order]
        # every monomial k has the pair (k, constant), so segments are non-empty
        starts = np.searchsorted(target, np.arange(self.size))
        logger.debug(f"{self!r}: product table with {left.size} pairs")
        return left, right, starts

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated product of coefficient arrays, broadcasting leading axes."""
        left, right, starts = self._product_table
        return np.add.reduceat(a[..., left] * b[..., right], starts, axis=-1)

    def derivative_map(self, var: int) -> tuple[JetSpace, np.ndarray, np.ndarray]:
        """Target space, source indices and factors for d/d(variable ``var``)."""
        if var not in self._derivative_maps:
            is_x = var < self.n
            x_order = self.x_order - 1 if is_x else self.x_order
            v_order = self.v_order if is_x else self.v_order - 1
            if x_order < 0 or v_order < 0:
                kind = "x" if is_x else "v"
                raise CapabilityError(
                    f"cannot differentiate in {kind}: jet carries orders "
                    f"({self.x_order}, {self.v_order})"
                )
            target = jet_space(self.n, x_order, v_order)
            shifted = target.exponents.copy()
            shifted[:, var] += 1
            source = self.index_of(shifted)
            self._derivative_maps[var] = (target, source, shifted[:, var].astype(float))
        return self._derivative_maps[var]

    def restriction_indices(self, target: JetSpace) -> np.ndarray:
        """Indices of ``target``'s monomials inside this space."""
        key = id(target)
        if key not in self._restrictions:
            if target.x_order > self.x_order or target.v_order > self.v_order:
                raise CapabilityError(f"cannot restrict {self!r} to {target!r}")
            self._restrictions[key] = self.index_of(target.exponents)
        return self._restrictions[key]


@lru_cache(maxsize=None)
def jet_space(n: int, x_order: int, v_order: int) -> JetSpace:
    """Shared :class:`JetSpace` for the given dimension and orders."""
    return JetSpace(n, x_order, v_order)


def common_space(*spaces: JetSpace) -> JetSpace:
    """Largest space into which all ``spaces`` restrict."""
    first = spaces[0]
    if all(space is first for space in spaces):
        return first
    return jet_space(
        first.n,
        min(space.x_order for space in spaces),
        min(space.v_order for space in spaces),
    )


class Jet:
    """Array of truncated Taylor polynomials over one jet space.

    ``coeffs`` has shape ``shape + (space.size,)``. Leading axes behave like a
    numpy array of scalars: arithmetic broadcasts, and indexing, ``sum`` and
    ``transpose`` act entrywise. Mixing jets of different spaces truncates to
    the common space.
    """

    __array_ufunc__ = None
    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    @classmethod
    def constant(cls, space: JetSpace, value: Scalar) -> Jet:
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (space.size,))
        coeffs[..., 0] = value
        return cls(space, coeffs)

    @classmethod
    def coordinates(
        cls, space: JetSpace, x: Sequence[float], v: Sequence[float]
    ) -> tuple[Jet, Jet]:
        """Seed the 2n phase-space coordinates as jets of shape ``(n,)``.

        A block whose order is 0 stays constant.
        """
        n = space.n
        coeffs = np.zeros((2 * n, space.size))
        coeffs[:, 0] = np.concatenate([np.asarray(x, float), np.asarray(v, float)])
        seeded = [
            var
            for var in range(2 * n)
            if (space.x_order if var < n else space.v_order) > 0
        ]
        if seeded:
            unit = np.eye(2 * n, dtype=np.int64)[seeded]
            coeffs[seeded, space.index_of(unit)] = 1.0
        return cls(space, coeffs[:n]), cls(space, coeffs[n:])

    # -- array protocol ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def value(self) -> np.ndarray:
        """Constant terms (the values at the expansion point)."""
        return self.coeffs[..., 0]

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def __iter__(self) -> Iterator[Jet]:
        return (self[i] for i in range(len(self)))

    def __getitem__(self, key: Any) -> Jet:
        return Jet(self.space, self.coeffs[key])

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, space={self.space!r})"

    def sum(self, axis: int) -> Jet:
        return Jet(self.space, self.coeffs.sum(axis=axis % self.ndim))

    def transpose(self, *axes: int) -> Jet:
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Jet(self.space, self.coeffs.transpose(*axes, self.ndim))

    @property
    def T(self) -> Jet:
        return self.transpose()

    def restrict(self, space: JetSpace) -> Jet:
        if space is self.space:
            return self
        return Jet(space, self.coeffs[..., self.space.restriction_indices(space)])

    # -- arithmetic -------------------------------------------------------

    def _aligned(self, other: Jet) -> tuple[JetSpace, np.ndarray, np.ndarray]:
        space = common_space(self.space, other.space)
        return space, self.restrict(space).coeffs, other.restrict(space).coeffs

    def _shift(self, constant: Scalar) -> Jet:
        constant = np.asarray(constant, dtype=float)
        shape = np.broadcast_shapes(self.shape, constant.shape)
        coeffs = np.array(np.broadcast_to(self.coeffs, shape + (self.space.size,)))
        coeffs[..., 0] += constant
        return Jet(self.space, coeffs)

    def __add__(self, other: Any) -> Jet:
        if isinstance(other, Jet):
            space, a, b = self._aligned(other)
            return Jet(space, a + b)
        return self._shift(other)

    __radd__ = __add__

    def __neg__(self) -> Jet:
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other: Any) -> Jet:
        return self + (-other)

    def __rsub__(self, other: Any) -> Jet:
        return (-self) + other

    def __mul__(self, other: Any) -> Jet:
        if isinstance(other, Jet):
            space, a, b = self._aligned(other)
            return Jet(space, space.multiply(a, b))
        factor = np.asarray(other, dtype=float)
        return Jet(self.space, self.coeffs * factor[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Jet:
        if isinstance(other, Jet):
            return self * reciprocal(other)
        divisor = np.asarray(other, dtype=float)
        if np.any(divisor == 0):
            raise DomainError("division by zero")
        return Jet(self.space, self.coeffs / divisor[..., None])

    def __rtruediv__(self, other: Any) -> Jet:
        return reciprocal(self) * other

    def __pow__(self, exponent: Any) -> Jet:
        if isinstance(exponent, Jet):
            return exp(exponent * log(self))
        return power(self, exponent)

    def __rpow__(self, base: Any) -> Jet:
        return exp(self * log(base))

    # -- derivatives ------------------------------------------------------

    def _derivative(self, var: int) -> Jet:
        target, source, factor = self.space.derivative_map(var)
        return Jet(target, self.coeffs[..., source] * factor)

    def dx(self, a: int) -> Jet:
        """Partial derivative in base coordinate ``a`` (orders drop by (1, 0))."""
        return self._derivative(a)

    def dv(self, a: int) -> Jet:
        """Partial derivative in velocity coordinate ``a`` (orders drop by (0, 1))."""
        return self._derivative(self.space.n + a)

    def grad_x(self) -> Jet:
        """Stack of x-derivatives along a new last axis: ``[..., a] = d_a``."""
        return stack([self.dx(a) for a in range(self.space.n)], axis=-1)

    def grad_v(self) -> Jet:
        """Stack of v-derivatives along a new last axis: ``[..., a] = D_a``."""
        return stack([self.dv(a) for a in range(self.space.n)], axis=-1)

    def partial(
        self, x_indices: Sequence[int] = (), v_indices: Sequence[int] = ()
    ) -> np.ndarray:
        """Value of the mixed partial derivative named by the index tuples."""
        n = self.space.n
        exponents = np.zeros(2 * n, dtype=np.int64)
        for a in x_indices:
            exponents[a] += 1
        for a in v_indices:
            exponents[n + a] += 1
        if (
            exponents[:n].sum() > self.space.x_order
            or exponents[n:].sum() > self.space.v_order
        ):
            raise CapabilityError(
                f"derivative of order ({len(x_indices)}, {len(v_indices)}) "
                f"exceeds jet orders ({self.space.x_order}, {self.space.v_order})"
            )
        index = int(self.space.index_of(exponents))
        return self.coeffs[..., index] * self.space.factorials[index]

    def _compose(self, taylor: np.ndarray) -> Jet:
        """Evaluate ``sum_k taylor[..., k] * (self - value)**k`` by Horner's rule."""
        increment = Jet(self.space, self.coeffs.copy())
        increment.coeffs[..., 0] = 0.0
        depth = self.space.depth
        result = Jet.constant(self.space, taylor[..., depth])
        for k in range(depth - 1, -1, -1):
            result = result * increment + taylor[..., k]
        return result


def as_jet(value: Any, space: JetSpace) -> Jet:
    """Promote constants (results of expressions free of variables) to jets."""
    if isinstance(value, Jet):
        return value
    return Jet.constant(space, value)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    """Stack jets of equal shape along a new leading axis."""
    space = common_space(*(jet.space for jet in jets))
    ndim = jets[0].ndim + 1
    return Jet(
        space,
        np.stack([jet.restrict(space).coeffs for jet in jets], axis=axis % ndim),
    )


def matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product of jet arrays: ``a`` (p, q) with ``b`` (q,) or (q, r)."""
    if b.ndim == 1:
        return (a * b[None, :]).sum(axis=1)
    return (a[:, :, None] * b[None, :, :]).sum(axis=1)


# -- elementary functions ----------------------------------------------------


def _values(a: Any) -> np.ndarray:
    return a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)


def _factorials(depth: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(depth + 1)], dtype=float)


def exp(a: Any) -> Any:
    if not isinstance(a, Jet):
        return np.exp(a)
    base = np.exp(a.value)[..., None]
    return a._compose(base / _factorials(a.space.depth))


def log(a: Any) -> Any:
    value = _values(a)
    if np.any(value <= 0):
        raise DomainError(f"log of non-positive argument {value}")
    if not isinstance(a, Jet):
        return np.log(a)
    depth = a.space.depth
    k = np.arange(1, depth + 1)
    taylor = np.empty(value.shape + (depth + 1,))
    taylor[..., 0] = np.log(value)
    taylor[..., 1:] = (-1.0) ** (k + 1) / (k * value[..., None] ** k)
    return a._compose(taylor)


def reciprocal(a: Any) -> Any:
    value = _values(a)
    if np.any(value == 0):
        raise DomainError("division by zero")
    if not isinstance(a, Jet):
        return 1.0 / value
    k = np.arange(a.space.depth + 1)
    return a._compose((-1.0) ** k / value[..., None] ** (k + 1))


def _integer_power(a: Any, exponent: int) -> Any:
    if exponent < 0:
        return reciprocal(_integer_power(a, -exponent))
    if not isinstance(a, Jet):
        return np.power(np.asarray(a, dtype=float), exponent)
    result = Jet.constant(a.space, np.ones(a.shape))
    base = a
    while exponent:
        if exponent & 1:
            result = result * base
        exponent >>= 1
        if exponent:
            base = base * base
    return result


def power(a: Any, exponent: float) -> Any:
    """``a ** exponent`` for a constant real exponent."""
    exponent = float(exponent)
    if exponent.is_integer():
        return _integer_power(a, int(exponent))
    value = _values(a)
    if isinstance(a, Jet):
        if np.any(value <= 0):
            raise DomainError(
                f"fractional power {exponent} of non-positive argument {value}"
            )
    elif np.any(value < 0):
        raise DomainError(f"fractional power {exponent} of negative argument {value}")
    if not isinstance(a, Jet):
        return np.power(value, exponent)
    depth = a.space.depth
    k = np.arange(depth + 1)
    binomial = np.cumprod(
        np.concatenate([[1.0], (exponent - k[:-1]) / (k[:-1] + 1)])
    )
    return a._compose(binomial * value[..., None] ** (exponent - k))


def sqrt(a: Any) -> Any:
    return power(a, 0.5)


def _trigonometric(a: Jet, phase: int) -> Jet:
    depth = a.space.depth
    cycle = [np.sin(a.value), np.cos(a.value), -np.sin(a.value), -np.cos(a.value)]
    taylor = np.stack(
        [cycle[(phase + k) % 4] for k in range(depth + 1)], axis=-1
    ) / _factorials(depth)
    return a._compose(taylor)


def sin(a: Any) -> Any:
    if not isinstance(a, Jet):
        return np.sin(a)
    return _trigonometric(a, 0)


def cos(a: Any) -> Any:
    if not isinstance(a, Jet):
        return np.cos(a)
    return _trigonometric(a, 1)


# -- linear algebra ------------------------------------------------------------


def solve(a: Jet, b: Jet, max_condition: float = MAX_CONDITION) -> Jet:
    """Solve ``a @ y = b`` for jet-valued ``y``.

    The constant part of ``a`` is LU-factored once; higher terms follow from
    d(A^-1) = -A^-1 (dA) A^-1, i.e. the terminating series
    ``y_{k+1} = -A0^-1 (A - A0) y_k``.

    Raises:
        RegularityError: if the constant part of ``a`` is singular or its
            condition number exceeds ``max_condition``
    """
    space = common_space(a.space, b.space)
    a = a.restrict(space)
    b = b.restrict(space)
    a0 = a.value
    condition = float(np.linalg.cond(a0))
    if not np.isfinite(condition) or condition > max_condition:
        raise RegularityError(
            f"matrix is singular or ill-conditioned (cond = {condition:.3e})",
            condition=condition,
        )
    factors = scipy.linalg.lu_factor(a0)

    def apply_inverse(coeffs: np.ndarray) -> np.ndarray:
        flat = coeffs.reshape(coeffs.shape[0], -1)
        return scipy.linalg.lu_solve(factors, flat).reshape(coeffs.shape)

    perturbation = a - a0
    term = Jet(space, apply_inverse(b.coeffs))
    total = term
    for _ in range(space.depth):
        term = Jet(space, -apply_inverse(matmul(perturbation, term).coeffs))
        total = total + term
    return total


def inverse(a: Jet, max_condition: float = MAX_CONDITION) -> Jet:
    """Jet of the matrix inverse of ``a``."""
    return solve(a, Jet.constant(a.space, np.eye(a.shape[0])), max_condition)


__all__ = [
    "MAX_CONDITION",
    "JetSpace",
    "Jet",
    "jet_space",
    "common_space",
    "as_jet",
    "stack",
    "matmul",
    "exp",
    "log",
    "reciprocal",
    "power",
    "sqrt",
    "sin",
    "cos",
    "solve",
    "inverse",
]
