"""Tests for the defining-function expression language."""

import math

import pytest

from causal_geometry.errors import DomainError, ExpressionError
from causal_geometry.expression import parse_expression, parse_inequality, tokenize


class TestParser:
    """Test parsing and evaluation."""

    def test_precedence(self):
        """Test that products bind tighter than sums."""
        expression = parse_expression("1 + 2*3 - 4/2", 2)

        assert expression.evaluate([0, 0], [1, 1]) == pytest.approx(5.0)

    def test_power_is_right_associative(self):
        """Test that 2^3^2 parses as 2^(3^2)."""
        expression = parse_expression("2^3^2", 2)

        assert expression.evaluate([0, 0], [1, 1]) == pytest.approx(512.0)

    def test_unary_minus_below_power(self):
        """Test that -2^2 is -(2^2)."""
        expression = parse_expression("-2^2", 2)

        assert expression.evaluate([0, 0], [1, 1]) == pytest.approx(-4.0)

    def test_variables_and_functions(self):
        """Test evaluation with base and velocity variables."""
        expression = parse_expression("exp(x1)*v2^2 - log(v1) + sqrt(x2)", 2)

        value = expression.evaluate([0.5, 4.0], [2.0, 3.0])
        assert value == pytest.approx(math.exp(0.5) * 9 - math.log(2.0) + 2.0)

    def test_pow_with_variable_exponent(self):
        """Test that a non-constant exponent is evaluated as exp(b log a)."""
        expression = parse_expression("pow(v1, x1) + v1^x1", 2)

        assert expression.evaluate([2.5, 0], [3.0, 1.0]) == pytest.approx(2 * 3.0**2.5)

    def test_depends_on_velocity(self):
        """Test velocity dependence detection."""
        assert parse_expression("x1^2 + 1", 2).depends_on_velocity is False
        assert parse_expression("x1*v2", 2).depends_on_velocity is True

    def test_to_source_round_trip(self):
        """Test that the pretty-printed source parses to the same values."""
        expression = parse_expression("-(v1 - 2)^2 / (1 + x2) * sin(x1)", 2)
        reparsed = parse_expression(expression.to_source(), 2)

        point = ([0.3, 0.9], [1.7, -0.4])
        assert reparsed.evaluate(*point) == pytest.approx(expression.evaluate(*point))

    def test_to_sympy(self):
        """Test conversion to a sympy expression."""
        import sympy

        v1, x2 = sympy.symbols("v1 x2")
        expression = parse_expression("v1^2*cos(x2)", 2)

        converted = expression.to_sympy({"v1": v1, "x2": x2})
        assert sympy.simplify(converted - v1**2 * sympy.cos(x2)) == 0

    def test_log_domain(self):
        """Test that log of a negative number raises DomainError."""
        expression = parse_expression("log(v1)", 2)

        with pytest.raises(DomainError):
            expression.evaluate([0, 0], [-1.0, 1.0])

    def test_division_by_zero(self):
        """Test that dividing by zero raises DomainError."""
        with pytest.raises(DomainError):
            parse_expression("1/v1", 2).evaluate([0, 0], [0.0, 1.0])


class TestParseErrors:
    """Test error reporting with byte offsets."""

    def test_unexpected_token(self):
        """Test the position of a misplaced operator."""
        with pytest.raises(ExpressionError) as excinfo:
            parse_expression("v1 + * v2", 2)

        assert excinfo.value.position == 5

    def test_unknown_variable(self):
        """Test that variables beyond n are rejected."""
        with pytest.raises(ExpressionError) as excinfo:
            parse_expression("v1 + x3", 2)

        assert excinfo.value.position == 5
        assert "x3" in str(excinfo.value)

    def test_unknown_function(self):
        """Test that unknown functions are rejected."""
        with pytest.raises(ExpressionError, match="unknown function"):
            parse_expression("tanh(v1)", 2)

    def test_arity(self):
        """Test that pow needs two arguments."""
        with pytest.raises(ExpressionError, match="argument"):
            parse_expression("pow(v1)", 2)

    def test_unbalanced_parenthesis(self):
        """Test a missing closing parenthesis."""
        with pytest.raises(ExpressionError):
            parse_expression("(v1 + v2", 2)

    def test_bad_character(self):
        """Test a character outside the token set."""
        with pytest.raises(ExpressionError) as excinfo:
            parse_expression("v1 $ v2", 2)

        assert excinfo.value.position == 3

    def test_offsets_are_bytes(self):
        """Test that offsets count UTF-8 bytes."""
        # a no-break space is whitespace but two bytes long
        with pytest.raises(ExpressionError) as excinfo:
            tokenize(" $")

        assert excinfo.value.position == 2

    def test_trailing_input(self):
        """Test that trailing tokens are reported."""
        with pytest.raises(ExpressionError, match="unexpected token"):
            parse_expression("v1 v2", 2)


class TestInequality:
    """Test domain predicates."""

    def test_strict_and_loose(self):
        """Test strict and non-strict comparisons."""
        positive = parse_inequality("v2 > 0", 2)
        non_negative = parse_inequality("v2 >= 0", 2)

        assert positive.holds([0, 0], [1, 1]) is True
        assert positive.holds([0, 0], [1, 0]) is False
        assert non_negative.holds([0, 0], [1, 0]) is True

    def test_margin_sign(self):
        """Test that the margin is positive inside the region."""
        below = parse_inequality("x1 < 2", 2)

        assert below.margin([1.5, 0], [1, 1]) == pytest.approx(0.5)
        assert below.margin([2.5, 0], [1, 1]) == pytest.approx(-0.5)

    def test_requires_comparison(self):
        """Test that a bare expression is not a predicate."""
        with pytest.raises(ExpressionError, match="comparison"):
            parse_inequality("v1 + 1", 2)
