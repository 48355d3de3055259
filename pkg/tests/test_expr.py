import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretiv import expr
from accretiv.grid import GridSpec


@pytest.mark.parametrize("text,value", [
    ("1 + 2 * 3", 7),
    ("(1 + 2) * 3", 9),
    ("-2^2", -4),
    ("2^3^2", 512),
    ("2^-1", 0.5),
    ("8 / 4 / 2", 1),
    ("1 - 2 - 3", -4),
    ("--3", 3),
    ("i * i", -1),
    ("exp(0) + cos(0) + sqrt(4)", 4),
])
def test_precedence(text, value):
    assert expr.evaluate(text, [0.0]) == pytest.approx(value)


def test_abs_x_is_euclidean_norm():
    assert expr.evaluate("abs(x)", [3.0, 4.0]) == pytest.approx(5.0)
    assert expr.evaluate("abs(x1 - 7)", [3.0, 4.0]) == pytest.approx(4.0)
    assert expr.evaluate("log(abs(x))", [0.0, np.e]) == pytest.approx(1.0)


def test_grid_evaluation_with_parameters():
    g = GridSpec.box([2.0, 2.0], 8)
    x1, x2 = g.coords()
    out = expr.eval_on_grid("i*lambda*log(abs(x))", g, {"lambda": 0.5})
    np.testing.assert_allclose(out, 0.5j * np.log(np.hypot(x1, x2)), rtol=1e-14)
    assert expr.free_parameters(expr.parse("a*x1 + b^2 - sin(c)")) == {"a", "b", "c"}


_atoms = st.sampled_from(["x1", "x2", "i", "1.5", "k", "abs(x)", "(x1 - 0.3)"])


@st.composite
def _exprs(draw, depth=3):
    if depth == 0:
        return draw(_atoms)
    kind = draw(st.sampled_from(["atom", "bin", "neg", "call", "pow"]))
    if kind == "atom":
        return draw(_atoms)
    if kind == "neg":
        return "-" + draw(_exprs(depth - 1))
    if kind == "call":
        return f"{draw(st.sampled_from(['sin', 'cos', 'exp']))}({draw(_exprs(depth - 1))})"
    if kind == "pow":
        return f"({draw(_exprs(depth - 1))})^{draw(st.integers(0, 3))}"
    op = draw(st.sampled_from(["+", "-", "*"]))
    return f"{draw(_exprs(depth - 1))} {op} {draw(_exprs(depth - 1))}"


@settings(max_examples=200, deadline=None)
@given(_exprs())
def test_pretty_round_trip(text):
    tree = expr.parse(text)
    again = expr.parse(expr.pretty(tree))
    assert again == tree
    pt, params = [0.4, -0.7], {"k": 1.25}
    assert expr.evaluate(again, pt, params) == pytest.approx(expr.evaluate(text, pt, params), rel=1e-12)


@pytest.mark.parametrize("text,line,col", [
    ("1 +\n  * 2", 2, 3),
    ("sin(x1", 1, 7),
    ("3 $ 4", 1, 3),
    ("2^x1", 1, 3),
    ("x + 1", 1, 1),
])
def test_errors_carry_position(text, line, col):
    with pytest.raises(expr.ExprError) as info:
        expr.parse(text)
    assert (info.value.line, info.value.col) == (line, col)
    assert f"line {line}, column {col}" in str(info.value)


def test_unknown_identifier_with_declared_params():
    with pytest.raises(expr.ExprError, match="unknown identifier 'mu'"):
        expr.parse("lambda * mu", {"lambda"})


def test_evaluation_errors_name_the_node():
    g = GridSpec.interval(-1.0, 1.0, 4)
    with pytest.raises(expr.ExprError, match="log of a nonpositive real at node"):
        expr.eval_on_grid("log(x1)", g)
    with pytest.raises(expr.ExprError, match="unbound parameter"):
        expr.eval_on_grid("t * x1", g)
    with pytest.raises(expr.ExprError, match="x2 used on a 1-dimensional grid"):
        expr.eval_on_grid("x2", g)
