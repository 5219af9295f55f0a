"""Seeded sampling of domain and on-cone phase points.

All randomness comes from ``numpy.random.Generator(PCG64(seed))`` so fixtures
are stable across platforms.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import CapabilityError, DomainError, SamplingError, ValidationError
from .fields import PhasePoint, ScalarField, evaluate_jets
from .logger import logger

if TYPE_CHECKING:
    from .catalog import DefiningFunction

#: |G| / |v|^k accepted for an on-cone point.
ON_CONE_TOLERANCE = 1e-10

#: Smallest slack a sampled unit velocity keeps to every domain inequality.
DOMAIN_MARGIN = 1e-2

#: Hessian condition number above which a sampled cone point is redrawn.
SAMPLE_MAX_CONDITION = 1e8


def make_rng(seed: int) -> np.random.Generator:
    """The PCG64 generator used for every sampled quantity."""
    return np.random.Generator(np.random.PCG64(seed))


def random_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform unit vector in R^n."""
    w = rng.standard_normal(n)
    return w / np.linalg.norm(w)


def sample_base_point(geometry: DefiningFunction, rng: np.random.Generator) -> np.ndarray:
    box = np.array(geometry.x_box, dtype=float)
    return rng.uniform(box[:, 0], box[:, 1])


def _cone_values(
    f: ScalarField, x: np.ndarray, v: np.ndarray, w: np.ndarray
) -> Optional[tuple[float, float]]:
    try:
        table = evaluate_jets(f, PhasePoint(x, v), 0, 1)
    except (DomainError, ValidationError):
        return None
    return table.value, float(table.contact @ w)


def is_regular_cone_point(
    geometry: DefiningFunction, x: np.ndarray, v: np.ndarray
) -> bool:
    """Whether (x, v) is a usable on-cone sample.

    The normalized residual |G| / |v|^k must be below ``ON_CONE_TOLERANCE``,
    every domain inequality must keep a slack of ``DOMAIN_MARGIN`` (for unit
    v) and the velocity Hessian must have condition <= ``SAMPLE_MAX_CONDITION``.
    Near a chart boundary G can tend to 0 without the cone being there.
    """
    f = geometry.field
    speed = float(np.linalg.norm(v))
    if speed == 0.0 or not f.in_domain(x, v):
        return False
    if f.domain_margin(x, v / speed) < DOMAIN_MARGIN:
        return False
    try:
        table = evaluate_jets(f, PhasePoint(x, v), 0, 2)
    except (CapabilityError, DomainError, ValidationError):
        return False
    if abs(table.value) > ON_CONE_TOLERANCE * speed**geometry.k:
        return False
    condition = float(np.linalg.cond(table.hessian))
    return bool(np.isfinite(condition)) and condition <= SAMPLE_MAX_CONDITION


def polish_to_cone(
    f: ScalarField,
    x: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
    iterations: int = 50,
    target: float = 1e-12,
) -> Optional[np.ndarray]:
    """Solve G(x, v + tau*w) = 0 by safeguarded Newton iteration.

    Returns the polished velocity, or None if the iteration stalls, leaves the
    domain or does not reach ``target``.
    """
    tau = 0.0
    current = _cone_values(f, x, v, w)
    if current is None:
        return None
    for _ in range(iterations):
        value, slope = current
        if abs(value) <= target:
            return v + tau * w
        if slope == 0.0:
            return None
        step = -value / slope
        for _ in range(30):
            candidate = _cone_values(f, x, v + (tau + step) * w, w)
            if candidate is not None and abs(candidate[0]) < abs(value):
                break
            step /= 2
        else:
            return None
        tau += step
        current = candidate
    return v + tau * w if abs(current[0]) <= target else None


def sample_null_direction(
    geometry: DefiningFunction,
    x: np.ndarray,
    rng: np.random.Generator,
    max_attempts: int = 200,
) -> np.ndarray:
    """Unit velocity on the cone over base point ``x``.

    Raises:
        SamplingError: if no on-cone direction is found in ``max_attempts``
    """
    f = geometry.field
    for attempt in range(max_attempts):
        v = random_direction(rng, geometry.n)
        if not f.in_domain(x, v):
            continue
        contact = evaluate_jets(f, PhasePoint(x, v), 0, 1).contact
        norm = np.linalg.norm(contact)
        if norm == 0.0:
            continue
        for _ in range(20):
            w = random_direction(rng, geometry.n)
            if abs(contact @ w) >= 0.2 * norm:
                break
        else:
            continue
        polished = polish_to_cone(f, x, v, w)
        if polished is None:
            logger.debug(f"Root polish failed on attempt {attempt} at x={x.tolist()}")
            continue
        v = polished / np.linalg.norm(polished)
        if is_regular_cone_point(geometry, x, v):
            if attempt > max_attempts // 2:
                logger.warning(
                    f"Sampler for {geometry.name} needed {attempt + 1} attempts"
                )
            return v
    raise SamplingError(
        f"no on-cone direction found for {geometry.name} at x={x.tolist()} "
        f"after {max_attempts} attempts"
    )


def sample_cone_points(
    geometry: DefiningFunction,
    count: int,
    seed: int = 0,
    base: Optional[np.ndarray] = None,
) -> list[PhasePoint]:
    """``count`` seeded on-cone points, all over ``base`` if it is given."""
    rng = make_rng(seed)
    points = []
    for _ in range(count):
        x = np.asarray(base, dtype=float) if base is not None else sample_base_point(geometry, rng)
        points.append(PhasePoint(x, sample_null_direction(geometry, x, rng)))
    logger.debug(f"Sampled {count} on-cone points for {geometry.name} (seed={seed})")
    return points


def sample_domain_points(
    geometry: DefiningFunction, count: int, seed: int = 0, max_attempts: int = 1000
) -> list[PhasePoint]:
    """``count`` seeded domain points with unit velocity (generally off-cone)."""
    rng = make_rng(seed)
    points = []
    for _ in range(count):
        x = sample_base_point(geometry, rng)
        for _ in range(max_attempts):
            v = random_direction(rng, geometry.n)
            if geometry.field.in_domain(x, v):
                points.append(PhasePoint(x, v))
                break
        else:
            raise SamplingError(f"no domain point found for {geometry.name}")
    return points


__all__ = [
    "ON_CONE_TOLERANCE",
    "DOMAIN_MARGIN",
    "SAMPLE_MAX_CONDITION",
    "is_regular_cone_point",
    "make_rng",
    "random_direction",
    "sample_base_point",
    "polish_to_cone",
    "sample_null_direction",
    "sample_cone_points",
    "sample_domain_points",
]
