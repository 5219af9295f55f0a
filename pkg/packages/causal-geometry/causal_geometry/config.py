"""Run configuration: TOML files, command-line overrides and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import toml

from .catalog import (
    BUILTIN_FACTORIES,
    ConformalFactor,
    DefiningFunction,
    GeometryRegistry,
    make_quadratic,
)
from .errors import ConfigError, ValidationError
from .fields import ExpressionField, PhasePoint
from .logger import logger

OPERATIONS = (
    "eval",
    "geodesic",
    "invariants",
    "weyl",
    "conformal-check",
    "raychaudhuri",
)

FORMATS = ("json", "csv")

#: Acceptance threshold per residual check; a config's [tolerances] table overrides these.
DEFAULT_TOLERANCES: dict[str, float] = {
    "euler": 1e-9,
    "homogeneity": 1e-9,
    "spray_residual": 1e-10,
    "vg": 1e-11,
    "contraction": 1e-9,
    "symmetry": 1e-9,
    "identity": 1e-7,
    "oracle": 1e-8,
    "drift": 1e-8,
    "cone_formula": 1e-6,
    "trace_free": 1e-10,
    "quotient": 1e-9,
    "basis": 1e-8,
    "weyl_oracle": 1e-6,
    "weyl_deviation": 1e-6,
    "trace_law": 1e-6,
    "identification": 1e-8,
    "raychaudhuri": 1e-5,
    "rotation": 1e-6,
    "expansion_crosscheck": 1e-5,
    "focusing": 1e-6,
    "concavity": 1e-7,
}


@dataclass
class ConformalSpec:
    """A conformal factor J given as an expression of homogeneity degree ``q``."""

    expression: str
    q: float = 0.0

    def build(self, n: int) -> ConformalFactor:
        try:
            return ConformalFactor.from_source(self.expression, n, self.q)
        except ValidationError as error:
            raise ConfigError(f"geometry.conformal.expression: {error}") from error


@dataclass
class GeometrySpec:
    """Which defining function a run uses.

    Args:
        builtin: Name of a catalog geometry (excludes the fields below)
        name: Name of a user geometry
        n: Dimension of a user geometry
        k: Homogeneity degree of a user expression (default: 2)
        expression: G as an expression over x1..xn, v1..vn
        metric: Components g_ab(x) of a quadratic user geometry, instead of ``expression``
        domain: Domain inequalities such as "v2 > 0"
        x_box: Per-coordinate sampling ranges for base points
        conformal: Optional conformal factor, required by conformal-check
    """

    builtin: Optional[str] = None
    name: Optional[str] = None
    n: Optional[int] = None
    k: float = 2.0
    expression: Optional[str] = None
    metric: Optional[list[list[Union[str, float]]]] = None
    domain: list[str] = field(default_factory=list)
    x_box: Optional[list[tuple[float, float]]] = None
    conformal: Optional[ConformalSpec] = None

    def __post_init__(self):
        if isinstance(self.conformal, dict):
            self.conformal = ConformalSpec(**self.conformal)
        if self.x_box is not None:
            self.x_box = [tuple(float(b) for b in pair) for pair in self.x_box]  # type: ignore[misc]
        if self.builtin is None and self.name is None and self.n is not None:
            self.name = "user"
            logger.debug("Unnamed user geometry registered as 'user'")

    @property
    def label(self) -> str:
        return self.builtin or self.name or "<unset>"

    @property
    def is_builtin(self) -> bool:
        return self.builtin is not None

    def validate(self) -> list[str]:
        issues: list[str] = []
        if self.builtin is not None:
            if self.builtin not in BUILTIN_FACTORIES:
                issues.append(
                    f"Unknown geometry {self.builtin!r}; "
                    f"known: {', '.join(BUILTIN_FACTORIES)}"
                )
            if self.expression is not None or self.metric is not None:
                issues.append("geometry.builtin excludes expression and metric")
            return issues
        if self.expression is None and self.metric is None:
            issues.append("geometry needs builtin, expression or metric")
        if self.expression is not None and self.metric is not None:
            issues.append("geometry.expression and geometry.metric are exclusive")
        if self.n is None or self.n < 2:
            issues.append(f"geometry.n must be an integer >= 2, got {self.n}")
        if self.metric is None and abs(self.k - 1.0) < 1e-12:
            issues.append("geometry.k = 1 is excluded")
        if self.name in BUILTIN_FACTORIES:
            issues.append(f"geometry.name {self.name!r} shadows a built-in geometry")
        if self.x_box is not None and self.n is not None and len(self.x_box) != self.n:
            issues.append(f"geometry.x_box needs {self.n} ranges, got {len(self.x_box)}")
        return issues

    def build(self, registry: Optional[GeometryRegistry] = None) -> DefiningFunction:
        """The defining function, registering user geometries in ``registry``.

        Raises:
            ConfigError: if the geometry table is incomplete
            ExpressionError: if an expression fails to parse
        """
        registry = registry if registry is not None else GeometryRegistry()
        if self.builtin is not None:
            return registry.get(self.builtin)
        issues = self.validate()
        if issues:
            raise ConfigError(issues[0])
        assert self.n is not None and self.name is not None
        if self.metric is not None:
            geometry = make_quadratic(
                self.metric,
                name=self.name,
                domain=self.domain,
                x_box=self.x_box,
                note="User metric.",
            )
        else:
            assert self.expression is not None
            geometry = DefiningFunction(
                name=self.name,
                n=self.n,
                k=float(self.k),
                field=ExpressionField.from_source(self.expression, self.n, self.domain),
                x_box=tuple(self.x_box) if self.x_box else (),  # type: ignore[arg-type]
                domain_text=tuple(self.domain),
                note="User expression.",
            )
        return registry.register(geometry)

    def factor(self, n: int) -> Optional[ConformalFactor]:
        return self.conformal.build(n) if self.conformal is not None else None

    def to_dict(self) -> dict[str, Any]:
        return {
            key: value
            for key, value in dataclasses.asdict(self).items()
            if value not in (None, [])
        }


@dataclass
class PointsSpec:
    """Evaluation points.

    Args:
        seed: Seed of the PCG64 sampler (default: 0)
        count: Number of sampled on-cone points or geodesic directions (default: 10)
        base: Common base point for geodesic and raychaudhuri runs (sampled if None)
        explicit: Explicit (x, v) pairs; replaces sampling when given
    """

    seed: int = 0
    count: int = 10
    base: Optional[list[float]] = None
    explicit: list[tuple[list[float], list[float]]] = field(default_factory=list)

    def __post_init__(self):
        pairs = []
        for item in self.explicit:
            if isinstance(item, dict):
                item = (item.get("x"), item.get("v"))
            pairs.append((list(item[0]), list(item[1])))
        self.explicit = pairs

    def phase_points(self) -> list[PhasePoint]:
        return [PhasePoint(x, v) for x, v in self.explicit]

    def validate(self) -> list[str]:
        issues: list[str] = []
        if self.seed < 0:
            issues.append(f"points.seed must be a non-negative integer, got {self.seed}")
        if self.count < 1 and not self.explicit:
            issues.append(f"points.count must be >= 1, got {self.count}")
        for index, (x, v) in enumerate(self.explicit):
            if len(x) != len(v):
                issues.append(f"points.explicit[{index}]: x and v lengths differ")
        return issues


@dataclass
class IntegratorSpec:
    """Settings of geodesic and congruence integrations.

    Args:
        tol: RK45 relative and absolute tolerance (default: 1e-10)
        t_end: Final affine parameter (default: 1.0)
        t_start: Initial parameter; negative values integrate back through the vertex
        grid: Number of emitted states or samples (default: 101)
        t_min: Vertex exclusion window for congruence checks (default: 1e-2)
        polish: Re-project geodesic velocities onto the cone after each step
    """

    tol: float = 1e-10
    t_end: float = 1.0
    t_start: float = 0.0
    grid: int = 101
    t_min: float = 1e-2
    polish: bool = False

    def validate(self) -> list[str]:
        issues: list[str] = []
        if self.tol <= 0:
            issues.append(f"integrator.tol must be positive, got {self.tol}")
        if self.grid < 3:
            issues.append(f"integrator.grid must be >= 3, got {self.grid}")
        if self.t_start > 0 or self.t_end <= self.t_start:
            issues.append(
                f"integrator window needs t_start <= 0 < t_end, "
                f"got [{self.t_start}, {self.t_end}]"
            )
        if self.t_min < 0:
            issues.append(f"integrator.t_min must be >= 0, got {self.t_min}")
        return issues

    def advisories(self) -> list[str]:
        """Settings that run but weaken the checks."""
        issues: list[str] = []
        if self.tol > 1e-8:
            issues.append(
                f"integrator.tol = {self.tol:g} is loose; drift and Raychaudhuri "
                "residuals will be large"
            )
        spacing = (self.t_end - self.t_start) / max(self.grid - 1, 1)
        if spacing > 0.1:
            issues.append(
                f"grid spacing {spacing:g} is coarse; grid-difference derivatives "
                "lose accuracy"
            )
        return issues


@dataclass
class OutputSpec:
    """Where the report goes.

    Args:
        path: Output file; stdout if None
        format: "json" or "csv" (default: "json")
    """

    path: Optional[str] = None
    format: str = "json"

    def __post_init__(self):
        self.format = self.format.lower()


@dataclass
class RunConfig:
    """One run of the harness.

    Args:
        operation: One of ``OPERATIONS``
        geometry: The defining function
        points: Evaluation points
        integrator: Integration settings
        tolerances: Per-check overrides, merged over ``DEFAULT_TOLERANCES``
        output: Report destination
        workers: Process-pool size for point work (default: 1)
        strict_mode: Raise on validation issues instead of logging warnings
    """

    operation: str = "invariants"
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    points: PointsSpec = field(default_factory=PointsSpec)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    tolerances: dict[str, float] = field(default_factory=dict)
    output: OutputSpec = field(default_factory=OutputSpec)
    workers: int = 1
    strict_mode: bool = False

    def __post_init__(self):
        self.overrides = dict(self.tolerances)
        self.tolerances = {**DEFAULT_TOLERANCES, **self.tolerances}

    def tolerance(self, check: str) -> float:
        return self.tolerances[check]

    def fatal_issues(self) -> list[str]:
        """Issues that make the run impossible."""
        issues: list[str] = []
        if self.operation not in OPERATIONS:
            issues.append(
                f"Unknown operation {self.operation!r}; known: {', '.join(OPERATIONS)}"
            )
        issues.extend(self.geometry.validate())
        issues.extend(self.points.validate())
        issues.extend(self.integrator.validate())
        if self.output.format not in FORMATS:
            issues.append(
                f"output.format must be one of {', '.join(FORMATS)}, "
                f"got {self.output.format!r}"
            )
        if self.operation == "conformal-check" and self.geometry.conformal is None:
            issues.append("conformal-check needs a [geometry.conformal] table")
        if self.workers < 1:
            issues.append(f"workers must be >= 1, got {self.workers}")
        for name, value in self.overrides.items():
            if not isinstance(value, (int, float)) or value <= 0:
                issues.append(f"tolerances.{name} must be a positive number, got {value!r}")
        return issues

    def validate(self) -> list[str]:
        """Validate the configuration.

        Returns:
            List of issue messages (empty if no issues)
        """
        issues = self.fatal_issues()
        issues.extend(self.integrator.advisories())
        for name in self.overrides:
            if name not in DEFAULT_TOLERANCES:
                issues.append(f"tolerances.{name} is not a known check and is ignored")
        if self.points.count > 1000:
            issues.append(f"points.count = {self.points.count} will be slow")
        return issues

    def check(self) -> None:
        """Raise on fatal issues; raise or warn on the rest per ``strict_mode``.

        Raises:
            ConfigError: for fatal issues, or any issue in strict mode
        """
        fatal = self.fatal_issues()
        if fatal:
            raise ConfigError(fatal[0])
        for issue in self.validate():
            if self.strict_mode:
                raise ConfigError(issue)
            logger.warning(issue)

    def to_dict(self) -> dict[str, Any]:
        """Echo of the effective configuration for reports."""
        return {
            "operation": self.operation,
            "geometry": self.geometry.to_dict(),
            "points": dataclasses.asdict(self.points),
            "integrator": dataclasses.asdict(self.integrator),
            "tolerances": dict(self.tolerances),
            "output": dataclasses.asdict(self.output),
            "workers": self.workers,
            "strict_mode": self.strict_mode,
        }


_SECTIONS = {
    "geometry": GeometrySpec,
    "points": PointsSpec,
    "integrator": IntegratorSpec,
    "output": OutputSpec,
}
_TOP_LEVEL = {"operation", "workers", "strict_mode", "tolerances", *_SECTIONS}


def _section(name: str, cls: type, table: Any) -> Any:
    if not isinstance(table, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"Unknown key {name}.{unknown[0]}")
    try:
        return cls(**table)
    except (TypeError, ValueError, KeyError, IndexError, AttributeError) as error:
        raise ConfigError(f"Invalid [{name}] table: {error}") from error


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Build a :class:`RunConfig` from parsed TOML data.

    Raises:
        ConfigError: on unknown keys or ill-typed values
    """
    unknown = sorted(set(data) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"Unknown key {unknown[0]!r}")
    sections = {
        name: _section(name, cls, data[name])
        for name, cls in _SECTIONS.items()
        if name in data
    }
    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ConfigError("[tolerances] must be a table")
    return RunConfig(
        operation=str(data.get("operation", "invariants")),
        tolerances=dict(tolerances),
        workers=int(data.get("workers", 1)),
        strict_mode=bool(data.get("strict_mode", False)),
        **sections,
    )


def load_config(path: Union[str, Path]) -> RunConfig:
    """Parse a TOML run configuration.

    Raises:
        ConfigError: if the file is missing or malformed; TOML syntax errors
            carry their (line, column) position
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as error:
        raise ConfigError(f"Cannot read config file {path}: {error}") from error
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as error:
        raise ConfigError(
            f"Malformed config file {path}: {error.msg}",
            position=(error.lineno, error.colno),
        ) from error
    logger.debug(f"Loaded config {path}")
    return config_from_dict(data)


def apply_overrides(
    config: RunConfig,
    *,
    operation: Optional[str] = None,
    geometry: Optional[str] = None,
    seed: Optional[int] = None,
    points: Optional[int] = None,
    tol: Optional[float] = None,
    out: Optional[str] = None,
    format: Optional[str] = None,
    workers: Optional[int] = None,
) -> RunConfig:
    """A copy of ``config`` with command-line flags applied; flags win."""
    geometry_spec = config.geometry
    if geometry is not None:
        conformal = geometry_spec.conformal
        geometry_spec = GeometrySpec(builtin=geometry, conformal=conformal)
    points_spec = dataclasses.replace(
        config.points,
        seed=seed if seed is not None else config.points.seed,
        count=points if points is not None else config.points.count,
    )
    integrator = dataclasses.replace(
        config.integrator, tol=tol if tol is not None else config.integrator.tol
    )
    output = dataclasses.replace(
        config.output,
        path=out if out is not None else config.output.path,
        format=format if format is not None else config.output.format,
    )
    return RunConfig(
        operation=operation if operation is not None else config.operation,
        geometry=geometry_spec,
        points=points_spec,
        integrator=integrator,
        tolerances=dict(config.overrides),
        output=output,
        workers=workers if workers is not None else config.workers,
        strict_mode=config.strict_mode,
    )


__all__ = [
    "OPERATIONS",
    "FORMATS",
    "DEFAULT_TOLERANCES",
    "ConformalSpec",
    "GeometrySpec",
    "PointsSpec",
    "IntegratorSpec",
    "OutputSpec",
    "RunConfig",
    "config_from_dict",
    "load_config",
    "apply_overrides",
]
