"""Tests for the geom command line."""

import json
import logging
from pathlib import Path

import pytest

from causal_geometry import cli
from causal_geometry.cli import build_parser, main
from causal_geometry.errors import SamplingError
from causal_geometry.report import (
    STATUS_CONFIG_ERROR,
    STATUS_FAIL,
    STATUS_PASS,
    STATUS_RUNTIME_ERROR,
)

FIXTURES = Path(__file__).parent / "fixtures"


class TestParser:
    """Test argument parsing."""

    def test_operations_are_subcommands(self):
        """Test that each operation parses with its flags."""
        args = build_parser().parse_args(
            ["raychaudhuri", "--geometry", "frw_like", "--seed", "3", "--format", "csv"]
        )

        assert args.command == "raychaudhuri"
        assert args.geometry == "frw_like"
        assert args.seed == 3
        assert args.format == "csv"

    def test_seed_range(self):
        """Test that seeds outside unsigned 64-bit are refused."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["eval", "--seed", "-1"])

    def test_unknown_format(self):
        """Test that only json and csv are accepted."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["eval", "--format", "xml"])


class TestMain:
    """Test exit statuses and report destinations."""

    def test_list(self, capsys):
        """Test that list prints the catalog."""
        assert main(["list"]) == STATUS_PASS

        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("minkowski4")
        assert "kapadia_conformal" in out

    def test_list_with_user_geometry(self, capsys):
        """Test that a config's user geometry is listed after the built-ins."""
        assert main(["list", "--config", str(FIXTURES / "user_geometry.toml")]) == STATUS_PASS

        last = capsys.readouterr().out.splitlines()[-1]
        assert last.startswith("log_cone")
        assert "user" in last

    def test_invariants_json_to_stdout(self, capsys):
        """Test a passing run printing JSON."""
        status = main(["invariants", "--geometry", "kapadia", "--points", "2", "--seed", "5"])

        assert status == STATUS_PASS
        document = json.loads(capsys.readouterr().out)
        assert document["geometry"] == "kapadia"
        assert len(document["records"]) == 2

    def test_csv_to_file(self, tmp_path):
        """Test --format csv with --out."""
        path = tmp_path / "weyl.csv"

        status = main(
            ["weyl", "--geometry", "minkowski4", "--points", "2", "--format", "csv", "--out", str(path)]
        )

        assert status == STATUS_PASS
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "record"
        assert "trS" in header

    def test_unknown_geometry(self, capsys):
        """Test that an unknown geometry is a config error."""
        assert main(["eval", "--geometry", "schwarzschild"]) == STATUS_CONFIG_ERROR

        assert "Unknown geometry" in capsys.readouterr().err

    def test_malformed_config(self, capsys):
        """Test that a TOML syntax error is a config error."""
        status = main(["weyl", "--config", str(FIXTURES / "malformed.toml")])

        assert status == STATUS_CONFIG_ERROR
        assert "Malformed config file" in capsys.readouterr().err

    def test_runtime_error(self, capsys):
        """Test that a failing point gives status 3 and still writes the report."""
        status = main(["invariants", "--config", str(FIXTURES / "off_domain.toml")])

        assert status == STATUS_RUNTIME_ERROR
        captured = capsys.readouterr()
        assert json.loads(captured.out)["errors"][0]["index"] == 1
        assert "error at point 1" in captured.err

    def test_negative_control_fails(self, capsys):
        """Test that a non-homogeneous G is caught by the eval checks."""
        status = main(["eval", "--config", str(FIXTURES / "not_homogeneous.toml")])

        assert status == STATUS_FAIL
        err = capsys.readouterr().err
        assert "FAIL homogeneity" in err
        assert "FAIL euler" in err

    def test_list_with_singular_user_metric(self, tmp_path, caplog):
        """Test that a failing user geometry is logged against the list command."""
        path = tmp_path / "singular.toml"
        path.write_text(
            'operation = "eval"\n\n'
            "[geometry]\n"
            'name = "degenerate_x1"\n'
            "n = 2\n"
            'metric = [["x1", "0"], ["0", "-1"]]\n'
        )

        with caplog.at_level(logging.ERROR, logger="causal_geometry"):
            status = main(["list", "--config", str(path)])

        assert status == STATUS_RUNTIME_ERROR
        assert "Cannot list geometries: degenerate_x1: metric is singular" in caplog.text

    def test_setup_error_names_the_operation(self, monkeypatch, caplog, capsys):
        """Test that a failure before the run is logged with the requested operation."""

        def failing_load(path):
            raise SamplingError("no cone points in the chart")

        monkeypatch.setattr(cli, "load_config", failing_load)

        with caplog.at_level(logging.ERROR, logger="causal_geometry"):
            status = main(["weyl", "--config", "any.toml"])

        assert status == STATUS_RUNTIME_ERROR
        assert "Cannot prepare weyl: no cone points in the chart" in caplog.text
        assert "list geometries" not in caplog.text
        assert "error: no cone points in the chart" in capsys.readouterr().err

    def test_subcommand_overrides_config_operation(self, capsys):
        """Test that the subcommand replaces the operation in the file."""
        status = main(
            ["eval", "--config", str(FIXTURES / "invariants.toml"), "--points", "1"]
        )

        assert status == STATUS_PASS
        assert json.loads(capsys.readouterr().out)["operation"] == "eval"
