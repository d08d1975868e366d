"""Jets against symbolic differentiation and algebraic identities."""

from math import factorial

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from koiter_dg import jets
from koiter_dg.jets import Jet, constant, index_of, multi_indices, nterms, variable

coord = st.floats(-0.9, 0.9, allow_nan=False)

X, Y = sym.symbols("x y")
SYMBOLIC = {
    "product": (lambda a, b: jets.sin(a * b) + a * a * b, sym.sin(X * Y) + X**2 * Y),
    "quotient": (lambda a, b: jets.exp(a) / (2.0 + jets.cos(b)), sym.exp(X) / (2 + sym.cos(Y))),
    "sqrt": (lambda a, b: jets.sqrt(1.0 + a * a + b * b), sym.sqrt(1 + X**2 + Y**2)),
    "power": (lambda a, b: (1.5 + a * b) ** 5 - (1.5 + a) ** 0.5, (sym.Rational(3, 2) + X * Y) ** 5 - sym.sqrt(sym.Rational(3, 2) + X)),
}


def _jet_at(fn, x, order):
    a = variable(np.array([x[0]]), 0, order)
    b = variable(np.array([x[1]]), 1, order)
    return fn(a, b)


@pytest.mark.parametrize("name", sorted(SYMBOLIC))
@given(x=coord, y=coord)
@settings(max_examples=15, deadline=None)
def test_partials_match_sympy(name, x, y):
    fn, expr = SYMBOLIC[name]
    order = 4
    jet = _jet_at(fn, (x, y), order)
    for i, j in multi_indices(order):
        exact = float(sym.diff(expr, X, i, Y, j).subs({X: x, Y: y})) if i + j else float(expr.subs({X: x, Y: y}))
        assert jet.partial(i, j)[0] == pytest.approx(exact, rel=1e-11, abs=1e-11)


def test_index_layout():
    idx = multi_indices(3)
    assert len(idx) == nterms(3) == 10
    assert idx[:6] == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert all(index_of(i, j) == k for k, (i, j) in enumerate(idx))


@given(x=coord, y=coord, axis=st.integers(0, 1))
@settings(max_examples=25, deadline=None)
def test_derivative_shifts_coefficients(x, y, axis):
    f = _jet_at(lambda a, b: jets.exp(a - 2.0 * b) * jets.sin(a + b), (x, y), 4)
    g = f.d(axis)
    assert g.order == 3
    for i, j in multi_indices(3):
        di, dj = (i + 1, j) if axis == 0 else (i, j + 1)
        assert g.partial(i, j)[0] == pytest.approx(f.partial(di, dj)[0], rel=1e-12, abs=1e-12)


@given(x=coord, y=coord)
@settings(max_examples=25, deadline=None)
def test_product_rule_and_reciprocal(x, y):
    f = _jet_at(lambda a, b: 2.0 + jets.sin(a) * b, (x, y), 3)
    g = _jet_at(lambda a, b: jets.cos(a * b) + a, (x, y), 3)
    lhs = (f * g).d(0)
    rhs = f.d(0) * g.truncate(2) + f.truncate(2) * g.d(0)
    np.testing.assert_allclose(lhs.c, rhs.c, atol=1e-12)
    np.testing.assert_allclose((f * f.reciprocal()).c, constant(np.ones(1), 3).c, atol=1e-12)


def test_mixed_orders_truncate_to_minimum():
    a = variable(np.zeros(2), 0, 4)
    b = variable(np.zeros(2), 1, 2)
    assert (a * b).order == 2
    assert (a + b).order == 2


def test_integer_power_matches_repeated_product():
    a = variable(np.linspace(-1, 1, 5), 0, 3) + 0.3
    np.testing.assert_allclose((a**3).c, (a * a * a).c, atol=1e-14)


def test_batch_broadcasting_and_indexing():
    x = np.linspace(0, 1, 6).reshape(2, 3)
    a = variable(x, 0, 2)
    assert a.shape == (2, 3)
    assert a[1].shape == (3,)
    assert a.expand().shape == (2, 3, 1)
    assert (a * np.ones((2, 3))).shape == (2, 3)


def test_invalid_construction_and_derivative():
    with pytest.raises(ValueError):
        Jet(np.zeros((4, 2)), 2)
    with pytest.raises(ValueError):
        constant(1.0, 0).d(0)
    with pytest.raises(ValueError):
        variable(0.0, 0, 1).truncate(2)


def test_scalar_dispatch_on_arrays():
    x = np.array([0.1, 0.2])
    np.testing.assert_allclose(jets.sin(x), np.sin(x))
    np.testing.assert_allclose(jets.value(variable(x, 0, 1)), x)


def test_normalized_coefficients():
    f = jets.exp(variable(np.array([0.0]), 0, 5))
    for k in range(6):
        assert f.coef(k, 0)[0] == pytest.approx(1.0 / factorial(k))
