"""Defining functions: built-in geometries, quadratic metrics and conformal rescaling."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainError, RegularityError, ValidationError
from .expression import Expression, Number, parse_expression, parse_inequality
from .fields import (
    ExpressionField,
    PhasePoint,
    ProductField,
    QuadraticField,
    ScalarField,
)
from .jets import MAX_CONDITION
from .logger import logger
from .sampling import make_rng, sample_cone_points, sample_domain_points

MetricEntry = Union[str, float, int, ScalarField, None]
MetricMatrix = tuple[tuple[Optional[ScalarField], ...], ...]

HOMOGENEITY_FACTORS = (0.5, 2.0, math.e)


@dataclass(frozen=True)
class DefiningFunction:
    """A homogeneous defining function G of degree k on an n-dimensional chart.

    Args:
        name: Catalog name
        n: Dimension of the base
        k: Homogeneity degree in v (must differ from 1)
        field: The scalar field G
        x_box: Per-coordinate ranges used to sample base points
        provenance: "builtin" or "user"
        note: Free-form description shown by ``geom list``
        domain_text: Domain inequalities as written
        metric: Components g_ab(x) when G is quadratic (used by the classical oracle)
        light_cone: Closed-form light cone ``f(x0, x) -> normalized residual``
    """

    name: str
    n: int
    k: float
    field: ScalarField
    x_box: tuple[tuple[float, float], ...] = ()
    provenance: str = "builtin"
    note: str = ""
    domain_text: tuple[str, ...] = ()
    metric: Optional[MetricMatrix] = None
    light_cone: Optional[Callable[[np.ndarray, np.ndarray], float]] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"{self.name}: dimension must be >= 2, got {self.n}")
        if abs(self.k - 1.0) < 1e-12:
            raise ValidationError(f"{self.name}: homogeneity degree k = 1 is excluded")
        if self.field.n != self.n:
            raise ValidationError(
                f"{self.name}: field has n = {self.field.n}, expected {self.n}"
            )
        if not self.x_box:
            object.__setattr__(self, "x_box", ((-1.0, 1.0),) * self.n)
        if len(self.x_box) != self.n:
            raise ValidationError(f"{self.name}: x_box needs {self.n} ranges")

    def value(self, point: PhasePoint) -> float:
        return self.field.value(point)

    def in_domain(self, point: PhasePoint) -> bool:
        return self.field.in_domain(point.x, point.v)


@dataclass(frozen=True)
class ConformalFactor:
    """A nonvanishing factor J of homogeneity degree q."""

    field: ScalarField
    q: float
    source: str = ""

    @classmethod
    def from_source(cls, src: str, n: int, q: float) -> ConformalFactor:
        return cls(ExpressionField(parse_expression(src, n)), float(q), src)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    n: int
    k: float
    domain: tuple[str, ...]
    provenance: str
    note: str

    def describe(self) -> str:
        domain = ", ".join(self.domain) if self.domain else "all of TM'"
        return (
            f"{self.name:<22} n={self.n} k={self.k:g} [{self.provenance}] "
            f"domain: {domain}. {self.note}".rstrip()
        )


def _metric_entry(entry: MetricEntry, n: int) -> Optional[ScalarField]:
    if entry is None:
        return None
    if isinstance(entry, ScalarField):
        return entry
    if isinstance(entry, str):
        expression = parse_expression(entry, n)
    else:
        expression = Expression(Number(float(entry)), n, str(entry))
    if isinstance(expression.root, Number) and expression.root.value == 0:
        return None
    if expression.depends_on_velocity:
        raise ValidationError(f"metric component {entry!r} depends on velocity")
    return ExpressionField(expression)


def make_quadratic(
    metric: Sequence[Sequence[MetricEntry]],
    *,
    name: str = "quadratic",
    domain: Sequence[str] = (),
    x_box: Optional[Sequence[tuple[float, float]]] = None,
    note: str = "",
    light_cone: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    samples: int = 4,
    seed: int = 0,
) -> DefiningFunction:
    """Defining function G = 1/2 g_ab(x) v^a v^b of degree 2.

    Entries may be expression strings over ``x1..xn``, numbers, scalar fields
    or None (zero). Symmetry and invertibility are checked at the center of
    ``x_box`` and at ``samples`` seeded points inside it.

    Raises:
        ValidationError: non-square, non-symmetric or velocity-dependent input
        RegularityError: metric singular or ill-conditioned at a sample point
    """
    n = len(metric)
    if any(len(row) != n for row in metric):
        raise ValidationError(f"{name}: metric must be square")
    entries: MetricMatrix = tuple(
        tuple(_metric_entry(entry, n) for entry in row) for row in metric
    )
    inequalities = tuple(parse_inequality(item, n) for item in domain)
    field = QuadraticField(entries, inequalities)
    geometry = DefiningFunction(
        name=name,
        n=n,
        k=2.0,
        field=field,
        x_box=tuple((float(lo), float(hi)) for lo, hi in x_box) if x_box else (),
        note=note,
        domain_text=tuple(domain),
        metric=entries,
        light_cone=light_cone,
    )

    box = np.array(geometry.x_box)
    rng = make_rng(seed)
    sample_xs = [box.mean(axis=1)] + [
        rng.uniform(box[:, 0], box[:, 1]) for _ in range(samples)
    ]
    for x in sample_xs:
        values = field.metric_at(x)
        if not np.allclose(values, values.T, rtol=1e-12, atol=1e-12):
            raise ValidationError(f"{name}: metric is not symmetric at x={x.tolist()}")
        condition = float(np.linalg.cond(values))
        if not np.isfinite(condition) or condition > MAX_CONDITION:
            raise RegularityError(
                f"{name}: metric is singular at x={x.tolist()} "
                f"(cond = {condition:.3e})",
                condition=condition,
            )
    logger.debug(f"Built quadratic geometry {name} with n={n}")
    return geometry


def wuenschmann_cone() -> DefiningFunction:
    """Degree-2 homogenization of the cone e^(1 - u'/t') + s'/t' = 0.

    Coordinates (s, t, u) are x1..x3, velocities v1..v3; the chart is
    t' > 0, s' < 0.
    """
    domain = ("v2 > 0", "v1 < 0")
    return DefiningFunction(
        name="wuenschmann_cone",
        n=3,
        k=2.0,
        field=ExpressionField.from_source(
            "v2^2 - v2*v3 - v2^2*log(-v1/v2)", 3, domain
        ),
        domain_text=domain,
        note="Homogenized cone of an ODE with vanishing Wuenschmann invariant.",
    )


def conformal_rescale(
    base: DefiningFunction,
    factor: ConformalFactor,
    *,
    name: Optional[str] = None,
    check_points: int = 4,
    seed: int = 0,
) -> DefiningFunction:
    """The rescaled defining function J*G of degree p = k + q.

    Raises:
        ValidationError: if p = 1 or the dimensions differ
        DomainError: if J vanishes at a sampled cone point
    """
    p = base.k + factor.q
    if abs(p - 1.0) < 1e-12:
        raise ValidationError(f"rescaled degree p = k + q must differ from 1, got {p}")
    if factor.field.n != base.n:
        raise ValidationError(
            f"conformal factor has n = {factor.field.n}, base has n = {base.n}"
        )
    for point in sample_cone_points(base, check_points, seed):
        value = factor.field.value(point)
        if abs(value) <= 1e-12:
            raise DomainError(f"conformal factor vanishes at {point!r}", point=point)

    metric = None
    if base.metric is not None and factor.q == 0 and not factor.field.depends_on_velocity:
        metric = tuple(
            tuple(None if entry is None else ProductField(factor.field, entry) for entry in row)
            for row in base.metric
        )
    rescaled_name = name or f"{base.name}_rescaled"
    logger.debug(f"Rescaled {base.name} by J of degree {factor.q}: p = {p}")
    return dataclasses.replace(
        base,
        name=rescaled_name,
        k=p,
        field=ProductField(factor.field, base.field),
        note=f"{base.name} rescaled by J = {factor.source or 'J'} (q = {factor.q:g}).",
        metric=metric,
    )


def verify_homogeneity(geometry: DefiningFunction, samples: int = 20, seed: int = 0) -> float:
    """Max of |G(x, tv) - t^k G(x, v)| / (1 + |G(x, v)|) over sampled points and t."""
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples}")
    worst = 0.0
    for point in sample_domain_points(geometry, samples, seed):
        value = geometry.value(point)
        for t in HOMOGENEITY_FACTORS:
            scaled = geometry.value(point.scaled(t))
            worst = max(worst, abs(scaled - t**geometry.k * value) / (1.0 + abs(value)))
    return worst


# -- built-in geometries -------------------------------------------------------


def kapadia_light_cone(x0: np.ndarray, x: np.ndarray) -> float:
    """Closed-form light cone of the Kapadia metric through ``x0``, normalized."""
    du, dv, dx, dy = np.asarray(x) - np.asarray(x0)
    residual = du * dv - dx**2 - 2 * dy**2 / (x[0] + x0[0])
    return float(abs(residual) / max(du**2 + dv**2 + dx**2 + dy**2, 1e-12))


def _minkowski4() -> DefiningFunction:
    return make_quadratic(
        [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]],
        name="minkowski4",
        note="Flat space-time, diag(1, -1, -1, -1).",
    )


def _kapadia() -> DefiningFunction:
    return make_quadratic(
        [[0, "0.5", 0, 0], ["0.5", 0, 0, 0], [0, 0, -1, 0], [0, 0, 0, "-1/x1"]],
        name="kapadia",
        domain=("x1 > 0",),
        x_box=((0.5, 2.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)),
        note="g = du dv - dx^2 - dy^2/u on the half-space u > 0.",
        light_cone=kapadia_light_cone,
    )


def _frw_like() -> DefiningFunction:
    return make_quadratic(
        [
            [1, 0, 0, 0],
            [0, -1, 0, 0],
            [0, 0, "-sin(x2)^2", 0],
            [0, 0, 0, "-sin(x2)^2*sin(x3)^2"],
        ],
        name="frw_like",
        domain=("x2 > 0", f"x2 < {math.pi!r}", "x3 > 0", f"x3 < {math.pi!r}"),
        x_box=((-1.0, 1.0), (1.0, 2.1), (1.0, 2.1), (-1.0, 1.0)),
        note="Closed FRW model with frozen scale factor (Einstein static universe).",
    )


def _poly_diag() -> DefiningFunction:
    return make_quadratic(
        [
            ["1 + 0.1*x2^2", 0, 0, 0],
            [0, "-1 - 0.1*x1^2", 0, 0],
            [0, 0, "-1 - 0.2*x4^2", 0],
            [0, 0, 0, "-1 - 0.1*x3^2"],
        ],
        name="poly_diag",
        note="Diagonal metric with polynomial coefficients.",
    )


_EUCLIDEAN_SPEED = "sqrt(v1^2 + v2^2 + v3^2 + v4^2)"


def _minkowski4_conformal() -> DefiningFunction:
    factor = ConformalFactor.from_source(
        f"exp(0.3*x1 - 0.2*x3)*{_EUCLIDEAN_SPEED}", 4, q=1
    )
    return conformal_rescale(
        builtin_geometry("minkowski4"), factor, name="minkowski4_conformal"
    )


def _kapadia_conformal() -> DefiningFunction:
    factor = ConformalFactor.from_source(
        f"(1 + 0.1*x3^2)*{_EUCLIDEAN_SPEED}", 4, q=1
    )
    return conformal_rescale(
        builtin_geometry("kapadia"), factor, name="kapadia_conformal"
    )


BUILTIN_FACTORIES: dict[str, Callable[[], DefiningFunction]] = {
    "minkowski4": _minkowski4,
    "kapadia": _kapadia,
    "wuenschmann_cone": wuenschmann_cone,
    "frw_like": _frw_like,
    "poly_diag": _poly_diag,
    "minkowski4_conformal": _minkowski4_conformal,
    "kapadia_conformal": _kapadia_conformal,
}


@lru_cache(maxsize=None)
def builtin_geometry(name: str) -> DefiningFunction:
    """Construct (once) the built-in geometry ``name``."""
    if name not in BUILTIN_FACTORIES:
        raise ValidationError(
            f"unknown geometry {name!r}; known: {', '.join(BUILTIN_FACTORIES)}"
        )
    return BUILTIN_FACTORIES[name]()


class GeometryRegistry:
    """Built-in geometries plus geometries registered from config files."""

    def __init__(self):
        self._user: dict[str, DefiningFunction] = {}

    def register(self, geometry: DefiningFunction) -> DefiningFunction:
        if geometry.name in BUILTIN_FACTORIES:
            raise ValidationError(f"{geometry.name!r} is a built-in geometry name")
        entry = dataclasses.replace(geometry, provenance="user")
        self._user[entry.name] = entry
        logger.debug(f"Registered user geometry {entry.name}")
        return entry

    def get(self, name: str) -> DefiningFunction:
        if name in self._user:
            return self._user[name]
        return builtin_geometry(name)

    def names(self) -> list[str]:
        return list(BUILTIN_FACTORIES) + list(self._user)

    def listing(self) -> list[CatalogEntry]:
        entries = []
        for name in self.names():
            geometry = self.get(name)
            entries.append(
                CatalogEntry(
                    name=geometry.name,
                    n=geometry.n,
                    k=geometry.k,
                    domain=geometry.domain_text,
                    provenance=geometry.provenance,
                    note=geometry.note,
                )
            )
        return entries


def list_geometries(registry: Optional[GeometryRegistry] = None) -> list[CatalogEntry]:
    """Catalog listing: built-ins first, then user registrations."""
    return (registry or GeometryRegistry()).listing()


__all__ = [
    "DefiningFunction",
    "ConformalFactor",
    "CatalogEntry",
    "make_quadratic",
    "wuenschmann_cone",
    "conformal_rescale",
    "verify_homogeneity",
    "kapadia_light_cone",
    "BUILTIN_FACTORIES",
    "builtin_geometry",
    "GeometryRegistry",
    "list_geometries",
]
