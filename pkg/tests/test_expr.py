import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbfcompat.expr import (
    BinOp,
    Const,
    EvaluationError,
    ExprSyntaxError,
    Func,
    Neg,
    Pow,
    Var,
    differentiate,
    evaluate,
    gradient,
    parse,
    substitute,
    to_string,
    variables,
)

from helpers import random_expr

H1 = "0.5*x1^2 + 0.2*x1*x2 + 0.3*x2^2 - 1"
H2 = "2 - (0.5*x1^2 + 0.2*x1*x2 + 0.3*x2^2)"
Q = np.array([[0.5, 0.1], [0.1, 0.3]])


class TestParse:
    def test_sum_of_variables(self):
        assert parse("x1 + x2", 2) == BinOp("+", Var(1), Var(2))

    def test_quadratic_barrier_matches_matrix_form(self):
        h1 = parse(H1, 2)
        rng = np.random.default_rng(0)
        for x in rng.uniform(-3, 3, (20, 2)):
            assert evaluate(h1, x) == pytest.approx(x @ Q @ x - 1, rel=1e-14, abs=1e-14)

    def test_variable_out_of_range(self):
        with pytest.raises(ExprSyntaxError, match="out of range"):
            parse("x3", 2)
        with pytest.raises(ExprSyntaxError):
            parse("x0", 2)

    @pytest.mark.parametrize("text", ["x1^2.5", "x1^-1", "x1^x2"])
    def test_bad_exponents(self, text):
        with pytest.raises(ExprSyntaxError):
            parse(text, 2)

    @pytest.mark.parametrize("text", ["", "x1 +", "(x1", "x1 x2", "foo(x1)", "x1 $ 2", "sin x1"])
    def test_syntax_errors_carry_position(self, text):
        with pytest.raises(ExprSyntaxError) as info:
            parse(text, 2)
        assert isinstance(info.value.position, int)
        assert 0 <= info.value.position <= len(text)

    def test_power_binds_tighter_than_unary_minus(self):
        assert evaluate(parse("-x1^2", 1), [3.0]) == -9.0
        assert evaluate(parse("(-x1)^2", 1), [3.0]) == 9.0

    def test_power_is_right_associative(self):
        assert evaluate(parse("2^3^2", 1), [0.0]) == 512.0

    def test_left_associativity(self):
        assert evaluate(parse("8/4/2", 1), [0.0]) == 1.0
        assert evaluate(parse("5-3-1", 1), [0.0]) == 1.0

    def test_products_before_sums(self):
        assert evaluate(parse("1 + 2*3", 1), [0.0]) == 7.0

    def test_numbers_with_exponents_and_whitespace(self):
        assert evaluate(parse("  1.5e-1 *  x1 ", 1), [2.0]) == pytest.approx(0.3)
        assert evaluate(parse("2E2", 1), [0.0]) == 200.0

    def test_functions(self):
        e = parse("sin(x1) + cos(x2) + exp(0) + sqrt(4)", 2)
        assert evaluate(e, [0.0, 0.0]) == pytest.approx(4.0)

    def test_named_variable(self):
        e = parse("v + v^3", 1, names={"v": 1})
        assert evaluate(e, [2.0]) == 10.0

    def test_variables(self):
        assert variables(parse(H1, 2)) == {1, 2}
        assert variables(parse("3 + sin(2)", 2)) == set()


class TestEvaluate:
    def test_simple(self):
        assert evaluate(parse("x1 + x2", 2), [1, 2]) == 3

    def test_barriers_at_example_state(self):
        # 0.96875 and 0.03125 exactly; the two-decimal figures 0.96 / 0.03 are truncations
        x = [-1.5, -1.25]
        h1 = evaluate(parse(H1, 2), x)
        h2 = evaluate(parse(H2, 2), x)
        assert h1 == pytest.approx(0.96875, abs=1e-12)
        assert h2 == pytest.approx(0.03125, abs=1e-12)
        assert abs(h1 - 0.96) < 1e-2 and abs(h2 - 0.03) < 1e-2

    def test_batch_shape(self):
        e = parse("x1*x2", 2)
        X = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        np.testing.assert_array_equal(evaluate(e, X), [4.0, 10.0, 18.0])

    def test_constant_broadcasts_over_batch(self):
        assert evaluate(parse("2", 2), np.zeros((2, 5))).shape == (5,)

    def test_division_by_zero(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("1/x1", 1), [0.0])

    def test_sqrt_of_negative(self):
        with pytest.raises(EvaluationError):
            evaluate(parse("sqrt(x1)", 1), [-1.0])


class TestDifferentiate:
    def test_square(self):
        d = differentiate(parse("x1^2", 1), 1)
        assert evaluate(d, [3.0]) == 6.0

    def test_barrier_gradient_is_2Qx(self):
        grad = gradient(parse(H1, 2), 2)
        assert [evaluate(g, [1.0, 0.0]) for g in grad] == pytest.approx([1.0, 0.2])
        x = np.array([0.7, -1.3])
        assert [evaluate(g, x) for g in grad] == pytest.approx(2 * Q @ x)

    def test_product_with_sine(self):
        d = differentiate(parse("sin(x1)*x2", 2), 1)
        assert evaluate(d, [0.0, 3.0]) == pytest.approx(3.0)

    def test_simplification(self):
        assert differentiate(parse("x2", 2), 1) == Const(0.0)
        assert differentiate(parse("x1", 2), 1) == Const(1.0)
        assert differentiate(parse("3*x1", 2), 1) == Const(3.0)

    @pytest.mark.parametrize("text", ["sqrt(1 + x1^2)", "exp(x1*x2)", "x1/(1 + x2^2)", "cos(x1)^3", "-x1^4"])
    def test_against_central_differences(self, text):
        e = parse(text, 2)
        x = np.array([0.3, -0.7])
        for j in (1, 2):
            step = np.zeros(2)
            step[j - 1] = 1e-6
            fd = (evaluate(e, x + step) - evaluate(e, x - step)) / 2e-6
            assert evaluate(differentiate(e, j), x) == pytest.approx(fd, abs=1e-5 * (1 + abs(fd)))


class TestPrinting:
    @pytest.mark.parametrize(
        "text",
        [H1, H2, "-x1^2/2", "(x1 - x2) - (x1 - x2)", "x1/(x2*x1)", "(-2)^3", "-(x1 + 1)", "2^3^2", "(2^3)^2", "x1 - -0.5"],
    )
    def test_round_trip(self, text):
        e = parse(text, 2)
        again = parse(to_string(e), 2)
        x = np.array([0.37, -1.9])
        assert evaluate(again, x) == pytest.approx(evaluate(e, x), rel=1e-12)

    def test_constants_print_exactly(self):
        c = 0.1 + 0.2
        assert evaluate(parse(to_string(Const(c)), 1), [0.0]) == c


def test_substitute():
    e = substitute(parse("x1^2 + 1", 1), {1: parse("x1 + x2", 2)})
    assert evaluate(e, [1.0, 2.0]) == 10.0


def test_nodes_are_hashable_and_immutable():
    e = parse(H1, 2)
    assert hash(e) == hash(parse(H1, 2))
    with pytest.raises(AttributeError):
        e.op = "-"  # type: ignore[misc]


def _random_case(seed):
    rng = np.random.default_rng(seed)
    return rng, random_expr(rng, 3, depth=4)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_derivatives_match_finite_differences(seed):
    rng, e = _random_case(seed)
    x = rng.uniform(-1.5, 1.5, 3)
    for j in (1, 2, 3):
        step = np.zeros(3)
        step[j - 1] = 1e-6
        fd = (evaluate(e, x + step) - evaluate(e, x - step)) / 2e-6
        exact = evaluate(differentiate(e, j), x)
        assert abs(exact - fd) <= 1e-5 * (1 + abs(fd))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_round_trip(seed):
    rng, e = _random_case(seed)
    again = parse(to_string(e), 3)
    X = rng.uniform(-2, 2, (3, 20))
    a, b = evaluate(e, X), evaluate(again, X)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-300)


def test_node_types_cover_grammar():
    e = parse("-sin(x1)^2 / (1 + exp(x2)) - sqrt(4) * cos(x1)", 2)
    kinds = set()

    def walk(node):
        kinds.add(type(node))
        for child in ("arg", "left", "right", "base"):
            if hasattr(node, child):
                walk(getattr(node, child))

    walk(e)
    assert {BinOp, Neg, Pow, Func, Var, Const} <= kinds
    assert math.isfinite(evaluate(e, [0.1, 0.2]))
