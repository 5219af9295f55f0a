"""Tests for the spray and null geodesics."""

import math

import numpy as np
import pytest

from causal_geometry.catalog import DefiningFunction, builtin_geometry
from causal_geometry.errors import PreconditionError, RegularityError, ValidationError
from causal_geometry.fields import ExpressionField, PhasePoint, evaluate_jets
from causal_geometry.oracle import ClassicalMetric
from causal_geometry.sampling import sample_cone_points
from causal_geometry.spray import (
    conservation_report,
    drift_tolerance,
    integrate_geodesic,
    polish_velocity,
    spray,
)

KAPADIA_POINT = PhasePoint([1.2, 0.1, -0.3, 0.4], [1.0, 2.0, 0.5, -1.0])


class TestSpray:
    """Test the spray solve at single points."""

    def test_minkowski_spray_vanishes(self):
        """Test that flat space has u = 0."""
        data = spray(builtin_geometry("minkowski4"), PhasePoint([0.3, -1, 2, 0], [1, 0.2, 0.5, 0.1]))

        assert np.allclose(data.u, 0.0, atol=1e-15)
        assert data.residual <= 1e-15
        assert data.vg <= 1e-15

    @pytest.mark.parametrize(
        "name,point",
        [
            ("kapadia", KAPADIA_POINT),
            ("frw_like", PhasePoint([0.1, 1.3, 1.1, 0.2], [1.0, 0.6, 0.5, -0.4])),
            ("poly_diag", PhasePoint([0.5, -0.5, 0.2, 0.8], [1.0, 0.3, -0.7, 0.2])),
        ],
    )
    def test_matches_christoffel_symbols(self, name, point):
        """Test u^a = -Gamma^a_bc v^b v^c against the symbolic oracle."""
        geometry = builtin_geometry(name)
        oracle = ClassicalMetric.from_geometry(geometry)

        data = spray(geometry, point)

        assert np.allclose(data.u, oracle.spray(point.x, point.v), rtol=1e-10, atol=1e-10)
        assert data.residual <= 1e-10
        assert data.vg <= 1e-11

    def test_wuenschmann_tangency(self):
        """Test that V(G) vanishes for a non-quadratic cone."""
        point = sample_cone_points(builtin_geometry("wuenschmann_cone"), 1, seed=4)[0]

        data = spray(builtin_geometry("wuenschmann_cone"), point)

        assert data.vg <= 1e-11
        assert data.residual <= 1e-10

    def test_singular_hessian(self):
        """Test that a degenerate velocity Hessian raises RegularityError."""
        geometry = DefiningFunction(
            name="degenerate", n=2, k=2.0, field=ExpressionField.from_source("v1^2", 2)
        )

        with pytest.raises(RegularityError) as excinfo:
            spray(geometry, PhasePoint([0, 0], [1, 1]))

        assert excinfo.value.point is not None

    def test_to_dict(self):
        """Test the record form of spray data."""
        record = spray(builtin_geometry("kapadia"), KAPADIA_POINT).to_dict()

        assert set(record) >= {"x", "v", "u", "contact", "spray_residual", "vg"}


class TestGeodesics:
    """Test affinely parametrized null geodesics."""

    @pytest.fixture
    def kapadia_start(self):
        """An on-cone starting point for the Kapadia metric."""
        return sample_cone_points(builtin_geometry("kapadia"), 1, seed=2)[0]

    def test_minkowski_straight_line(self):
        """Test that flat geodesics are straight lines."""
        trajectory = integrate_geodesic(
            builtin_geometry("minkowski4"),
            PhasePoint([0, 0, 0, 0], [1, 1, 0, 0]),
            t_end=2.0,
            samples=5,
        )

        assert trajectory.times.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert np.allclose(trajectory.x[-1], [2, 2, 0, 0], atol=1e-12)
        assert np.allclose(trajectory.v, [[1, 1, 0, 0]] * 5, atol=1e-12)
        assert trajectory.max_drift <= 1e-14
        assert not trajectory.truncated

    def test_backward_integration(self):
        """Test a negative end time."""
        trajectory = integrate_geodesic(
            builtin_geometry("minkowski4"),
            PhasePoint([0, 0, 0, 0], [1, 0, 1, 0]),
            t_end=-1.0,
            samples=3,
        )

        assert np.allclose(trajectory.endpoint.x, [-1, 0, -1, 0], atol=1e-12)

    def test_off_cone_start(self):
        """Test that a timelike start is refused."""
        with pytest.raises(PreconditionError, match="not on the cone"):
            integrate_geodesic(
                builtin_geometry("minkowski4"), PhasePoint([0] * 4, [1, 0, 0, 0]), 1.0
            )

    def test_tolerance_must_be_positive(self):
        """Test that tol <= 0 is refused."""
        with pytest.raises(ValidationError):
            integrate_geodesic(
                builtin_geometry("minkowski4"), PhasePoint([0] * 4, [1, 1, 0, 0]), 1.0, tol=0.0
            )

    def test_kapadia_closed_form_cone(self, kapadia_start):
        """Test that geodesics from x0 stay on the closed-form light cone of x0."""
        geometry = builtin_geometry("kapadia")

        trajectory = integrate_geodesic(geometry, kapadia_start, t_end=0.25, samples=26)

        assert not trajectory.truncated
        for t, point in trajectory.samples:
            if abs(t) >= 1e-2:
                assert geometry.light_cone(kapadia_start.x, point.x) <= 1e-6

    def test_kapadia_drift(self, kapadia_start):
        """Test that G stays near zero along the geodesic."""
        tol = 1e-10
        trajectory = integrate_geodesic(
            builtin_geometry("kapadia"), kapadia_start, t_end=0.25, tol=tol
        )

        assert trajectory.max_drift <= drift_tolerance(tol)
        assert trajectory.semispray_defect() <= 1e-6

    def test_polished_integration(self, kapadia_start):
        """Test that projecting back to the cone keeps the trajectory valid."""
        trajectory = integrate_geodesic(
            builtin_geometry("kapadia"), kapadia_start, t_end=0.25, polish=True
        )

        assert not trajectory.truncated
        assert trajectory.max_drift <= 1e-8

    def test_polish_steps_along_the_contact_covector(self, kapadia_start):
        """Test that the velocity moves along g_a and G drops quadratically."""
        geometry = builtin_geometry("kapadia")
        x = kapadia_start.x
        contact = evaluate_jets(geometry.field, kapadia_start, 0, 1).contact
        v_off = kapadia_start.v + 1e-4 * contact / np.linalg.norm(contact)
        off = evaluate_jets(geometry.field, PhasePoint(x, v_off), 0, 1)

        polished = polish_velocity(geometry, x, v_off)

        step = polished - v_off
        assert abs(off.value) > 1e-6
        assert np.linalg.matrix_rank(np.vstack([step, off.contact]), tol=1e-12) == 1
        assert abs(geometry.value(PhasePoint(x, polished))) <= 10 * off.value**2

    def test_conservation_report(self, kapadia_start):
        """Test that the contact pairing equals k G along the trajectory."""
        geometry = builtin_geometry("kapadia")
        trajectory = integrate_geodesic(geometry, kapadia_start, t_end=0.25, samples=11)

        report = conservation_report(trajectory, geometry)

        assert report.samples == 11
        assert report.pairing_defect <= 1e-12
        assert report.contact_pairing <= 2 * report.max_drift + 1e-12

    def test_truncation_at_chart_boundary(self):
        """Test that leaving the chart truncates instead of raising."""
        geometry = builtin_geometry("frw_like")
        start = PhasePoint([0.0, 0.3, math.pi / 2, 0.0], [1.0, -1.0, 0.0, 0.0])

        trajectory = integrate_geodesic(geometry, start, t_end=1.0, samples=11)

        assert trajectory.truncated
        assert trajectory.exit_reason
        assert trajectory.times.max() <= 0.3 + 1e-9
        with pytest.raises(ValidationError, match="outside the integrated range"):
            trajectory.state_at(0.9)

    def test_rows(self):
        """Test the exported table rows."""
        trajectory = integrate_geodesic(
            builtin_geometry("minkowski4"),
            PhasePoint([0, 0, 0, 0], [1, 1, 0, 0]),
            t_end=1.0,
            samples=2,
        )

        rows = trajectory.rows()
        assert list(rows[0]) == ["t", "x1", "x2", "x3", "x4", "v1", "v2", "v3", "v4", "G"]
        assert rows[1]["x2"] == pytest.approx(1.0)
