"""Adaptive Dormand-Prince stepping with dense output and clean domain exits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import RK45, OdeSolution

from .errors import DomainError, RegularityError, ValidationError
from .logger import logger

RightHandSide = Callable[[float, np.ndarray], np.ndarray]
StepHook = Callable[[RK45], None]


@dataclass(frozen=True, eq=False)
class FlowResult:
    """Outcome of one adaptive integration.

    ``solution`` covers ``[t_start, t_reached]`` (or is None if not a single
    step was accepted). ``exit_reason`` is None when ``t_end`` was reached.
    """

    t_start: float
    t_end: float
    t_reached: float
    y_start: np.ndarray
    solution: Optional[OdeSolution]
    steps: int
    rejected: int
    evaluations: int
    exit_reason: Optional[str]

    @property
    def truncated(self) -> bool:
        return self.exit_reason is not None

    def contains(self, t: float) -> bool:
        lo, hi = sorted((self.t_start, self.t_reached))
        return lo - 1e-14 <= t <= hi + 1e-14

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        """Dense state at ``t`` (scalar or array; states along the last axis)."""
        if self.solution is None:
            t_arr = np.asarray(t, dtype=float)
            if t_arr.ndim == 0:
                return self.y_start.copy()
            return np.repeat(self.y_start[:, None], t_arr.size, axis=1)
        return self.solution(t)


def integrate_flow(
    fun: RightHandSide,
    t_start: float,
    y_start: np.ndarray,
    t_end: float,
    tol: float,
    after_step: Optional[StepHook] = None,
) -> FlowResult:
    """Integrate ``y' = fun(t, y)`` from ``t_start`` to ``t_end``.

    A :class:`DomainError`, :class:`RegularityError` or :class:`ValidationError`
    raised by ``fun`` (such as a velocity that reaches zero) stops the
    integration at the last accepted step instead of propagating.

    Args:
        fun: Right-hand side
        t_start: Initial time
        y_start: Initial state
        t_end: Final time (may be smaller than ``t_start``)
        tol: Used as both rtol and atol of the embedded error estimate
        after_step: Called with the solver after every accepted step; it may
            replace ``solver.y`` (and must then refresh ``solver.f``)
    """
    if tol <= 0:
        raise ValidationError(f"integrator tolerance must be positive, got {tol}")
    y_start = np.asarray(y_start, dtype=float)
    times = [t_start]
    interpolants = []
    exit_reason: Optional[str] = None
    try:
        solver = RK45(fun, t_start, y_start, t_end, rtol=tol, atol=tol)
    except (DomainError, RegularityError, ValidationError) as error:
        return FlowResult(
            t_start, t_end, t_start, y_start, None, 0, 0, 1,
            f"{type(error).__name__}: {error}",
        )

    while solver.status == "running":
        try:
            message = solver.step()
        except (DomainError, RegularityError, ValidationError) as error:
            exit_reason = f"{type(error).__name__}: {error}"
            break
        if solver.status == "failed":
            exit_reason = f"step failure: {message}"
            break
        interpolants.append(solver.dense_output())
        times.append(solver.t)
        if after_step is not None:
            try:
                after_step(solver)
            except (DomainError, RegularityError, ValidationError) as error:
                exit_reason = f"{type(error).__name__}: {error}"
                break

    steps = len(interpolants)
    # six stages per attempt after the two initial evaluations
    attempts = max(0, (solver.nfev - 2) // 6)
    solution = OdeSolution(times, interpolants) if interpolants else None
    if exit_reason is not None:
        logger.info(
            f"Integration stopped at t={times[-1]:.6g} of {t_end:.6g}: {exit_reason}"
        )
    else:
        logger.debug(f"Integrated to t={t_end:.6g} in {steps} steps")
    return FlowResult(
        t_start=t_start,
        t_end=t_end,
        t_reached=times[-1],
        y_start=y_start,
        solution=solution,
        steps=steps,
        rejected=max(0, attempts - steps),
        evaluations=solver.nfev,
        exit_reason=exit_reason,
    )


__all__ = ["FlowResult", "integrate_flow"]
