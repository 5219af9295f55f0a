"""Tests for run configuration."""

import logging
from pathlib import Path

import pytest

from causal_geometry.catalog import GeometryRegistry
from causal_geometry.config import (
    DEFAULT_TOLERANCES,
    ConformalSpec,
    GeometrySpec,
    IntegratorSpec,
    PointsSpec,
    RunConfig,
    apply_overrides,
    config_from_dict,
    load_config,
)
from causal_geometry.errors import ConfigError

FIXTURES = Path(__file__).parent / "fixtures"


class TestRunConfig:
    """Test RunConfig defaults and validation."""

    def test_default_values(self):
        """Test default configuration values."""
        config = RunConfig()

        assert config.operation == "invariants"
        assert config.workers == 1
        assert config.strict_mode is False
        assert config.points.seed == 0
        assert config.points.count == 10
        assert config.integrator.tol == 1e-10
        assert config.output.format == "json"
        assert config.tolerances == DEFAULT_TOLERANCES

    def test_tolerance_overrides_merge(self):
        """Test that [tolerances] entries replace only their own defaults."""
        config = RunConfig(tolerances={"identity": 1e-5})

        assert config.tolerance("identity") == 1e-5
        assert config.tolerance("euler") == DEFAULT_TOLERANCES["euler"]
        assert config.overrides == {"identity": 1e-5}

    def test_valid_config_has_no_issues(self):
        """Test that a complete built-in configuration validates cleanly."""
        config = RunConfig(geometry=GeometrySpec(builtin="kapadia"))

        assert config.validate() == []

    def test_fatal_issues(self):
        """Test that unusable settings are reported."""
        config = RunConfig(
            operation="curl",
            geometry=GeometrySpec(builtin="schwarzschild"),
            workers=0,
            tolerances={"euler": -1.0},
        )

        issues = config.fatal_issues()

        assert any("Unknown operation 'curl'" in issue for issue in issues)
        assert any("Unknown geometry 'schwarzschild'" in issue for issue in issues)
        assert any("workers must be >= 1" in issue for issue in issues)
        assert any("tolerances.euler" in issue for issue in issues)

    def test_conformal_check_needs_factor(self):
        """Test that conformal-check without a factor is fatal."""
        config = RunConfig(
            operation="conformal-check", geometry=GeometrySpec(builtin="minkowski4")
        )

        with pytest.raises(ConfigError, match="geometry.conformal"):
            config.check()

    def test_advisories_warn(self, caplog):
        """Test that loose settings are logged when strict mode is off."""
        config = RunConfig(
            geometry=GeometrySpec(builtin="kapadia"),
            integrator=IntegratorSpec(tol=1e-6),
            tolerances={"made_up": 1.0},
        )

        with caplog.at_level(logging.WARNING, logger="causal_geometry"):
            config.check()

        assert "integrator.tol = 1e-06 is loose" in caplog.text
        assert "tolerances.made_up is not a known check" in caplog.text

    def test_strict_mode_raises(self):
        """Test that advisories raise in strict mode."""
        config = RunConfig(
            geometry=GeometrySpec(builtin="kapadia"),
            integrator=IntegratorSpec(tol=1e-6),
            strict_mode=True,
        )

        with pytest.raises(ConfigError, match="loose"):
            config.check()

    def test_integrator_window(self):
        """Test that the vertex must lie inside the integration window."""
        issues = IntegratorSpec(t_start=0.5, t_end=1.0).validate()

        assert issues == ["integrator window needs t_start <= 0 < t_end, got [0.5, 1.0]"]

    def test_coarse_grid_advisory(self):
        """Test that a coarse grid is flagged but not fatal."""
        spec = IntegratorSpec(t_end=10.0, grid=11)

        assert spec.validate() == []
        assert any("coarse" in issue for issue in spec.advisories())

    def test_to_dict(self):
        """Test the configuration echo used in reports."""
        echo = RunConfig(geometry=GeometrySpec(builtin="kapadia")).to_dict()

        assert echo["geometry"] == {"builtin": "kapadia", "k": 2.0}
        assert echo["integrator"]["grid"] == 101
        assert echo["tolerances"]["identity"] == 1e-7


class TestGeometrySpec:
    """Test geometry tables."""

    def test_builtin_excludes_expression(self):
        """Test that builtin and expression cannot be combined."""
        spec = GeometrySpec(builtin="kapadia", expression="v1^2 - v2^2")

        assert spec.validate() == ["geometry.builtin excludes expression and metric"]

    def test_user_geometry_needs_dimension(self):
        """Test that a user expression needs n."""
        issues = GeometrySpec(name="cone", expression="v1^2 - v2^2").validate()

        assert any("geometry.n" in issue for issue in issues)

    def test_unnamed_user_geometry(self):
        """Test that an unnamed user geometry is called 'user'."""
        assert GeometrySpec(n=2, expression="v1^2 - v2^2").label == "user"

    def test_build_registers_user_geometry(self):
        """Test that a user expression is registered with user provenance."""
        registry = GeometryRegistry()
        spec = GeometrySpec(
            name="tilted", n=2, expression="v1^2 - v2^2 + x1*v1*v2", domain=["x1 > -1"]
        )

        geometry = spec.build(registry)

        assert geometry.provenance == "user"
        assert registry.get("tilted") is geometry
        assert geometry.domain_text == ("x1 > -1",)

    def test_build_user_metric(self):
        """Test that metric components build a quadratic geometry."""
        spec = GeometrySpec(name="warped", n=2, metric=[[1, 0], [0, "-exp(x1)"]])

        geometry = spec.build(GeometryRegistry())

        assert geometry.metric is not None
        assert geometry.k == 2.0

    def test_build_reports_first_issue(self):
        """Test that an incomplete spec raises ConfigError."""
        with pytest.raises(ConfigError, match="geometry needs builtin"):
            GeometrySpec(name="empty", n=2).build()

    def test_conformal_table_is_converted(self):
        """Test that a conformal dict becomes a ConformalSpec."""
        spec = GeometrySpec(builtin="minkowski4", conformal={"expression": "exp(x1)", "q": 0})

        assert spec.conformal == ConformalSpec("exp(x1)", 0)
        assert spec.factor(4).q == 0

    def test_bad_conformal_expression(self):
        """Test that a factor parse failure is a config error."""
        spec = ConformalSpec("exp(x1", 0)

        with pytest.raises(ConfigError, match="geometry.conformal.expression"):
            spec.build(4)


class TestPointsSpec:
    """Test point tables."""

    def test_explicit_points_from_tables(self):
        """Test that [[points.explicit]] tables become (x, v) pairs."""
        spec = PointsSpec(explicit=[{"x": [0, 0], "v": [1, 1]}])

        assert spec.explicit == [([0, 0], [1, 1])]
        assert spec.phase_points()[0].n == 2

    def test_length_mismatch(self):
        """Test that x and v must have the same length."""
        spec = PointsSpec(explicit=[([0, 0], [1, 1, 0])])

        assert spec.validate() == ["points.explicit[0]: x and v lengths differ"]

    def test_negative_seed(self):
        """Test that seeds are non-negative."""
        assert PointsSpec(seed=-1).validate()


class TestLoadConfig:
    """Test TOML loading."""

    def test_load_valid_file(self):
        """Test a complete configuration file."""
        config = load_config(FIXTURES / "invariants.toml")

        assert config.operation == "invariants"
        assert config.geometry.builtin == "kapadia"
        assert config.points.seed == 7
        assert config.points.count == 3
        assert config.tolerance("identity") == 1e-6

    def test_load_user_geometry(self):
        """Test nested conformal tables and explicit point arrays."""
        config = load_config(FIXTURES / "user_geometry.toml")

        assert config.geometry.name == "log_cone"
        assert config.geometry.conformal == ConformalSpec("exp(0.2*x1)", 0)
        assert config.points.explicit == [([0.0, 0.0, 0.0], [-1.0, 1.0, 1.0])]
        assert config.fatal_issues() == []

    def test_malformed_file(self):
        """Test that TOML syntax errors carry a line and column."""
        with pytest.raises(ConfigError) as excinfo:
            load_config(FIXTURES / "malformed.toml")

        line, column = excinfo.value.position
        assert line >= 1 and column >= 0
        assert "malformed.toml" in str(excinfo.value)
        assert f"line {line}" in str(excinfo.value)

    def test_unknown_section_key(self):
        """Test that misspelled keys are rejected."""
        with pytest.raises(ConfigError, match="Unknown key geometry.colour"):
            load_config(FIXTURES / "unknown_key.toml")

    def test_unknown_top_level_key(self):
        """Test that unknown top-level keys are rejected."""
        with pytest.raises(ConfigError, match="Unknown key 'seeds'"):
            config_from_dict({"seeds": 3})

    def test_section_must_be_table(self):
        """Test that a section given as a scalar is rejected."""
        with pytest.raises(ConfigError, match="must be a table"):
            config_from_dict({"points": 5})

    def test_missing_file(self, tmp_path):
        """Test that an unreadable path is a config error."""
        with pytest.raises(ConfigError, match="Cannot read config file"):
            load_config(tmp_path / "absent.toml")

    def test_round_trip_through_tmp_path(self, tmp_path):
        """Test loading a file written at test time."""
        path = tmp_path / "run.toml"
        path.write_text('operation = "weyl"\nworkers = 2\n[output]\nformat = "CSV"\n')

        config = load_config(path)

        assert config.operation == "weyl"
        assert config.workers == 2
        assert config.output.format == "csv"


class TestApplyOverrides:
    """Test command-line flags over file settings."""

    @pytest.fixture
    def base(self):
        return config_from_dict(
            {
                "operation": "conformal-check",
                "geometry": {
                    "builtin": "kapadia",
                    "conformal": {"expression": "1 + 0.1*x3^2", "q": 0},
                },
                "points": {"seed": 1, "count": 4},
                "tolerances": {"trace_law": 1e-5},
            }
        )

    def test_flags_win(self, base):
        """Test that every given flag replaces the file value."""
        config = apply_overrides(
            base, seed=9, points=2, tol=1e-9, out="r.csv", format="csv", workers=3
        )

        assert config.points.seed == 9
        assert config.points.count == 2
        assert config.integrator.tol == 1e-9
        assert config.output.path == "r.csv"
        assert config.output.format == "csv"
        assert config.workers == 3
        assert config.tolerance("trace_law") == 1e-5

    def test_unset_flags_keep_file_values(self, base):
        """Test that None flags leave the configuration alone."""
        config = apply_overrides(base)

        assert config.operation == "conformal-check"
        assert config.points.seed == 1
        assert base.points.seed == 1

    def test_geometry_flag_keeps_conformal(self, base):
        """Test that --geometry swaps the geometry but keeps the factor."""
        config = apply_overrides(base, geometry="minkowski4")

        assert config.geometry.builtin == "minkowski4"
        assert config.geometry.conformal == ConformalSpec("1 + 0.1*x3^2", 0)
