"""Tests for the adaptive integration driver."""

import math

import numpy as np
import pytest

from causal_geometry.errors import DomainError, ValidationError
from causal_geometry.fields import PhasePoint
from causal_geometry.integrator import integrate_flow


def decay(t, y):
    return -y


class TestIntegrateFlow:
    """Test integrate_flow."""

    def test_dense_output(self):
        """Test y' = -y against exp(-t) between steps."""
        flow = integrate_flow(decay, 0.0, np.array([1.0]), 2.0, tol=1e-10)

        assert not flow.truncated
        assert flow.t_reached == pytest.approx(2.0)
        assert flow(0.7)[0] == pytest.approx(math.exp(-0.7), rel=1e-8)
        assert flow(np.array([0.5, 1.5])).shape == (1, 2)

    def test_backward(self):
        """Test integration towards smaller t."""
        flow = integrate_flow(decay, 0.0, np.array([1.0]), -1.0, tol=1e-10)

        assert flow(-1.0)[0] == pytest.approx(math.e, rel=1e-8)
        assert flow.contains(-0.5)
        assert not flow.contains(0.5)

    def test_domain_exit(self):
        """Test that a DomainError from the right-hand side truncates cleanly."""

        def rhs(t, y):
            if y[0] < 0.5:
                raise DomainError("y left the chart")
            return -y

        flow = integrate_flow(rhs, 0.0, np.array([1.0]), 5.0, tol=1e-8)

        assert flow.truncated
        assert flow.exit_reason.startswith("DomainError")
        assert flow.t_reached < math.log(2.0) + 1e-6
        assert flow.solution is not None

    def test_vanishing_velocity_truncates(self):
        """Test that a phase point with zero velocity stops the flow instead of raising."""

        def rhs(t, y):
            # velocities below 0.5 are flushed to zero
            v = np.where(y[2:] > 0.5, y[2:], 0.0)
            point = PhasePoint(y[:2], v)
            return np.concatenate([point.v, -point.v])

        flow = integrate_flow(rhs, 0.0, np.array([0.0, 0.0, 1.0, 1.0]), 5.0, tol=1e-8)

        assert flow.truncated
        assert flow.exit_reason.startswith("ValidationError")
        assert "velocity must be nonzero" in flow.exit_reason
        assert flow.t_reached < math.log(2.0) + 1e-6
        assert flow.solution is not None

    def test_exit_before_first_step(self):
        """Test that a failing initial evaluation returns the start state."""

        def rhs(t, y):
            raise DomainError("nowhere defined")

        flow = integrate_flow(rhs, 0.0, np.array([1.0, 2.0]), 1.0, tol=1e-8)

        assert flow.truncated
        assert flow.steps == 0
        assert np.array_equal(flow(0.0), [1.0, 2.0])

    def test_after_step_hook(self):
        """Test that the hook sees every accepted step."""
        seen = []

        flow = integrate_flow(
            decay, 0.0, np.array([1.0]), 1.0, tol=1e-8, after_step=lambda s: seen.append(s.t)
        )

        assert len(seen) == flow.steps
        assert seen[-1] == pytest.approx(1.0)

    def test_step_accounting(self):
        """Test that evaluations cover accepted and rejected attempts."""
        flow = integrate_flow(decay, 0.0, np.array([1.0]), 1.0, tol=1e-10)

        assert flow.steps > 0
        assert flow.rejected >= 0
        assert flow.evaluations >= 6 * flow.steps

    def test_tolerance_must_be_positive(self):
        """Test that tol = 0 is refused."""
        with pytest.raises(ValidationError):
            integrate_flow(decay, 0.0, np.array([1.0]), 1.0, tol=0.0)
