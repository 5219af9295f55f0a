"""Tests for shadow frames, the Weyl tensor and conformal invariance."""

import numpy as np
import pytest

from causal_geometry.catalog import ConformalFactor, builtin_geometry
from causal_geometry.errors import PreconditionError, ValidationError
from causal_geometry.fields import PhasePoint
from causal_geometry.oracle import ClassicalMetric
from causal_geometry.sampling import sample_cone_points
from causal_geometry.weyl import (
    basis_independence,
    conformal_compare,
    shadow_frame,
    weyl_tensor,
)

SPEED = "sqrt(v1^2 + v2^2 + v3^2 + v4^2)"


def conformal_verdict(report):
    """Relative deviation, or the scaled absolute one where W is negligible."""
    return min(report.weyl_deviation, 1e3 * report.weyl_absolute)


class TestShadowFrame:
    """Test the basis of ker(g_a) modulo v."""

    def test_minkowski_frame(self):
        """Test E = (e3, e4) and gE = diag(-1, -1) for v = (1, 1, 0, 0)."""
        frame = shadow_frame(builtin_geometry("minkowski4"), PhasePoint([0] * 4, [1, 1, 0, 0]))

        assert np.allclose(frame.E, [[0, 0], [0, 0], [1, 0], [0, 1]], atol=1e-14)
        assert np.allclose(frame.gE, -np.eye(2), atol=1e-14)
        assert frame.signature == (0, 2)
        assert frame.kernel_residual == 0.0

    def test_pivot_frame_spans_the_same_quotient(self):
        """Test that the alternative basis also lies in the kernel."""
        point = sample_cone_points(builtin_geometry("kapadia"), 1, seed=1)[0]

        frame = shadow_frame(builtin_geometry("kapadia"), point, "pivot")

        assert frame.dimension == 2
        assert frame.kernel_residual <= 1e-12
        assert abs(frame.determinant) > 1e-6

    def test_shifted_frame(self):
        """Test that e + c v stays in the kernel with the same gE."""
        point = sample_cone_points(builtin_geometry("kapadia"), 1, seed=1)[0]
        frame = shadow_frame(builtin_geometry("kapadia"), point)

        shifted = frame.shifted(3.0)

        assert shifted.kernel_residual <= 1e-10
        assert np.allclose(shifted.gE, frame.gE, atol=1e-9)

    def test_off_cone_point(self):
        """Test that a timelike vector has no shadow frame."""
        with pytest.raises(PreconditionError, match="on-cone"):
            shadow_frame(builtin_geometry("minkowski4"), PhasePoint([0] * 4, [1, 0, 0, 0]))

    def test_unknown_method(self):
        """Test that only the two frame constructions are accepted."""
        with pytest.raises(ValidationError):
            shadow_frame(
                builtin_geometry("minkowski4"), PhasePoint([0] * 4, [1, 1, 0, 0]), "svd"
            )


class TestWeylTensor:
    """Test the trace-free part of the restricted tidal force."""

    @pytest.fixture(scope="class")
    def kapadia_points(self):
        return sample_cone_points(builtin_geometry("kapadia"), 3, seed=21)

    def test_residuals(self, kapadia_points):
        """Test kernel, trace, symmetry and quotient residuals."""
        for point in kapadia_points:
            residuals = weyl_tensor(builtin_geometry("kapadia"), point).residuals
            assert residuals["kernel"] <= 1e-10
            assert residuals["trace_free"] <= 1e-10
            assert residuals["W_symmetry"] <= 1e-10
            assert residuals["quotient"] <= 1e-9

    def test_basis_independence(self, kapadia_points):
        """Test that both frame constructions give the same W spectrum."""
        for point in kapadia_points:
            assert basis_independence(builtin_geometry("kapadia"), point) <= 1e-8

    def test_three_dimensional_weyl_vanishes(self):
        """Test that a one-dimensional shadow space carries no Weyl part."""
        geometry = builtin_geometry("wuenschmann_cone")

        for point in sample_cone_points(geometry, 2, seed=8):
            data = weyl_tensor(geometry, point)
            assert data.frame.dimension == 1
            assert np.max(np.abs(data.W)) <= 1e-10 * (1 + abs(data.trS))

    def test_matches_classical_weyl(self):
        """Test W against the trace-free restriction of C(., k, k, .)."""
        geometry = builtin_geometry("poly_diag")
        oracle = ClassicalMetric.from_geometry(geometry)

        for point in sample_cone_points(geometry, 2, seed=13):
            data = weyl_tensor(geometry, point)
            E, gE = data.frame.E, data.frame.gE
            C = E.T @ oracle.weyl_tidal(point.x, point.v) @ E
            C = 0.5 * (C + C.T)
            expected = C - np.trace(np.linalg.solve(gE, C)) / 2 * gE
            scale = 1 + np.max(np.abs(data.Sproj))
            assert np.max(np.abs(data.W - expected)) <= 1e-6 * scale

    def test_trace_part_matches_ricci(self):
        """Test tr S = -Ric(k, k) and X = -2 Ric(k, k) in four dimensions."""
        geometry = builtin_geometry("poly_diag")
        oracle = ClassicalMetric.from_geometry(geometry)

        for point in sample_cone_points(geometry, 2, seed=13):
            data = weyl_tensor(geometry, point)
            ricci = float(point.v @ oracle.ricci(point.x) @ point.v)
            assert data.trS == pytest.approx(-ricci, abs=1e-8 * (1 + abs(ricci)))
            assert data.X == pytest.approx(-2 * ricci, abs=1e-8 * (1 + abs(ricci)))

    def test_static_universe_trace(self):
        """Test tr S = -2 and W = 0 in a conformally flat geometry."""
        geometry = builtin_geometry("frw_like")
        point = PhasePoint([0.0, np.pi / 2, np.pi / 2, 0.0], [1.0, 0.0, 0.0, 1.0])

        data = weyl_tensor(geometry, point)

        assert data.trS == pytest.approx(-2.0, abs=1e-9)
        assert np.allclose(data.W, 0.0, atol=1e-9)

    def test_to_dict(self):
        """Test the record of a Weyl evaluation."""
        record = weyl_tensor(
            builtin_geometry("minkowski4"), PhasePoint([0] * 4, [1, 1, 0, 0])
        ).to_dict()

        assert record["gE_signature"] == [0, 2]
        assert record["X"] == pytest.approx(0.0, abs=1e-14)


class TestConformalInvariance:
    """Test W(J G) = W(G) and the transformation law of X."""

    @pytest.mark.parametrize(
        "name,expression,q",
        [
            ("minkowski4", "exp(0.3*x1 - 0.2*x3)", 0),
            ("minkowski4", f"exp(0.3*x1 - 0.2*x3)*{SPEED}", 1),
            ("kapadia", "1 + 0.1*x3^2", 0),
            ("kapadia", f"(1 + 0.1*x3^2)*{SPEED}", 1),
        ],
    )
    def test_invariance(self, name, expression, q):
        """Test the Weyl verdict, the trace law and the frame identification."""
        geometry = builtin_geometry(name)
        factor = ConformalFactor.from_source(expression, geometry.n, q)

        for point in sample_cone_points(geometry, 2, seed=17):
            report = conformal_compare(geometry, factor, point)
            assert conformal_verdict(report) <= 1e-6
            assert report.trace_law_residual <= 1e-6
            assert report.identification_defect <= 1e-8
            assert not report.identification_suspect

    def test_trace_law_for_exponential_factor(self):
        """Test X' = X - (k.d log J)^2 for J = exp(linear) on Minkowski space.

        Classically Ric'(k, k) = 2 (k.d omega)^2 for g' = e^(2 omega) g with
        omega linear, so X' = -2 Ric'(k, k) = -0.09 here.
        """
        geometry = builtin_geometry("minkowski4")
        factor = ConformalFactor.from_source("exp(0.3*x1 - 0.2*x3)", 4, 0)

        report = conformal_compare(geometry, factor, PhasePoint([0] * 4, [1, 1, 0, 0]))

        assert report.X == pytest.approx(0.0, abs=1e-12)
        assert report.X_measured == pytest.approx(-0.09, abs=1e-9)
        assert report.X_predicted == pytest.approx(-0.09, abs=1e-12)

    def test_degree_one_is_refused(self):
        """Test that J G of degree 1 is rejected."""
        geometry = builtin_geometry("minkowski4")
        factor = ConformalFactor.from_source(f"1/{SPEED}", 4, -1)

        with pytest.raises(ValidationError, match="differ from 1"):
            conformal_compare(geometry, factor, PhasePoint([0] * 4, [1, 1, 0, 0]))

    def test_report_fields(self):
        """Test the record of a comparison."""
        geometry = builtin_geometry("minkowski4")
        factor = ConformalFactor.from_source("exp(x2)", 4, 0)

        report = conformal_compare(geometry, factor, PhasePoint([0] * 4, [1, 1, 0, 0]))

        record = report.to_dict()
        assert record["J"] == pytest.approx(1.0)
        assert {"X_predicted", "X_measured", "weyl_deviation", "trace_law_residual"} <= set(record)
