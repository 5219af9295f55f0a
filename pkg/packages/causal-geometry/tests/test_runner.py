"""Tests for the run harness."""

from pathlib import Path

import pytest

from causal_geometry.config import (
    GeometrySpec,
    IntegratorSpec,
    PointsSpec,
    RunConfig,
    load_config,
)
from causal_geometry.errors import ConfigError
from causal_geometry.report import STATUS_PASS, STATUS_RUNTIME_ERROR
from causal_geometry.runner import RunContext, run, run_points

FIXTURES = Path(__file__).parent / "fixtures"


def kapadia_config(operation, **kwargs):
    return RunConfig(
        operation=operation,
        geometry=GeometrySpec(builtin="kapadia"),
        points=PointsSpec(seed=5, count=2),
        **kwargs,
    )


class TestOperations:
    """Test each operation end to end on small runs."""

    def test_invariants(self):
        """Test identity residuals and the oracle comparison on a quadratic geometry."""
        report = run(kapadia_config("invariants"))

        assert report.status == STATUS_PASS
        assert len(report.records) == 2
        names = {summary.name for summary in report.summaries}
        assert {"bianchi", "curl_S", "oracle_U", "oracle_S"} <= names

    def test_eval_checks_homogeneity(self):
        """Test that eval reports homogeneity once and spray checks per point."""
        report = run(kapadia_config("eval"))

        assert report.summary("homogeneity").count == 1
        assert report.summary("homogeneity").maximum <= 1e-9
        assert report.summary("vg").count == 2
        assert "oracle_u" in {summary.name for summary in report.summaries}

    def test_weyl(self):
        """Test Weyl residuals with the classical comparison."""
        report = run(kapadia_config("weyl"))

        assert report.status == STATUS_PASS
        assert report.summary("weyl_oracle").count == 2

    def test_geodesic_cone_formula(self):
        """Test that Kapadia geodesics stay on the closed-form light cone."""
        config = kapadia_config("geodesic", integrator=IntegratorSpec(t_end=0.25, grid=11))

        report = run(config)

        assert report.summary("cone_formula").maximum <= 1e-6
        assert report.summary("drift").passed
        assert len(report.records[0]["rows"]) == 11

    def test_conformal_check(self):
        """Test the invariance of W under a position-dependent rescaling."""
        config = RunConfig(
            operation="conformal-check",
            geometry=GeometrySpec(
                builtin="minkowski4",
                conformal={"expression": "exp(0.3*x1 - 0.2*x3)", "q": 0},
            ),
            points=PointsSpec(seed=2, count=2),
        )

        report = run(config)

        assert report.status == STATUS_PASS
        assert report.summary("trace_law").count == 2

    def test_raychaudhuri(self):
        """Test a flat congruence through the vertex."""
        config = RunConfig(
            operation="raychaudhuri",
            geometry=GeometrySpec(builtin="minkowski4"),
            points=PointsSpec(count=1, base=[0.0, 0.0, 0.0, 0.0]),
            integrator=IntegratorSpec(t_start=-0.5, t_end=0.5, grid=21),
        )

        report = run(config)

        assert report.status == STATUS_PASS
        record = report.records[0]
        assert len(record["rows"]) == 21
        assert record["focusing"]["triggered"] is True


class TestRunBehaviour:
    """Test ordering, errors and determinism."""

    def test_conformal_check_needs_factor(self):
        """Test that a missing conformal table stops the run."""
        with pytest.raises(ConfigError):
            run(kapadia_config("conformal-check"))

    def test_workers_preserve_order(self):
        """Test that a process pool yields the same records in input order."""
        serial = run(kapadia_config("weyl"))
        parallel = run(kapadia_config("weyl", workers=2))

        assert parallel.to_dict()["records"] == serial.to_dict()["records"]

    def test_fixed_seed_is_reproducible(self):
        """Test that two runs with one seed give identical records."""
        first = run(kapadia_config("eval")).to_dict()["records"]
        second = run(kapadia_config("eval")).to_dict()["records"]

        assert first == second

    def test_point_errors_become_records(self):
        """Test that an off-domain point is reported without stopping the run."""
        report = run(load_config(FIXTURES / "off_domain.toml"))

        assert report.status == STATUS_RUNTIME_ERROR
        assert len(report.records) == 1
        assert report.errors[0]["index"] == 1
        assert report.errors[0]["error"] == "DomainError"

    def test_explicit_point_dimension(self):
        """Test that explicit points must match the geometry dimension."""
        config = RunConfig(
            geometry=GeometrySpec(builtin="kapadia"),
            points=PointsSpec(explicit=[([1.0, 0.0], [1.0, 1.0])]),
        )

        with pytest.raises(ConfigError, match="dimension 2"):
            run(config)

    def test_sampled_base_point_is_shared(self):
        """Test that geodesic runs start every direction at one base point."""
        config = kapadia_config("geodesic")
        context = RunContext.build(config)

        points = run_points(context)

        assert len(points) == 2
        assert (points[0].x == points[1].x).all()

    def test_timing(self):
        """Test that the report carries timing for the run."""
        report = run(kapadia_config("eval"))

        assert report.timing["points"] == 2
        assert report.timing["total_seconds"] >= report.timing["points_seconds"]
