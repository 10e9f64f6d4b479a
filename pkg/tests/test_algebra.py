from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from conftest import polynomials, rational_functions
from nijkit.algebra import (
    DivisionByZeroError,
    DimensionError,
    RationalFunction,
    SingularMatrixError,
    UnknownSymbolError,
    as_matrix,
    det,
    faddeev_leverrier,
    identity,
    inverse,
    lambdify,
    linear_solve,
    partial,
    rf,
    var,
)

x, y, z = var("x"), var("y"), var("z")


def test_field_identities():
    assert x / y + (1 - x / y) == 1
    assert (x**2 - 1) / (x - 1) == x + 1
    assert (x / (x + y)) * ((x + y) / x) == 1


def test_canonical_form_normalises_denominator():
    f = (2 * x) / (4 * y + 2)
    assert f.denominator() == 2 * y + 1 or f.denominator() == y + Fraction(1, 2)
    assert f == x / (2 * y + 1)


def test_division_by_zero_is_structured():
    with pytest.raises(DivisionByZeroError):
        x / (y - y)


def test_partials():
    assert partial(x**2 * y, "x") == 2 * x * y
    assert partial(x / y, "y") == -x / y**2
    assert partial(x, "z") == 0


def test_partial_rejects_undeclared_symbol():
    assert partial(x, "x", declared=("x", "y")) == 1
    with pytest.raises(UnknownSymbolError):
        partial(x, "w", declared=("x", "y"))


def test_linear_solve_examples():
    b = as_matrix([[3], [x / y]])[:, 0]
    assert list(linear_solve(identity(2), b)) == [3, x / y]
    V = as_matrix([["x1", 1], ["x2", 1]])
    assert list(linear_solve(V, as_matrix([[1], [1]])[:, 0])) == [0, 1]
    with pytest.raises(SingularMatrixError):
        linear_solve(as_matrix([[x, y], [2 * x, 2 * y]]), as_matrix([[1], [1]])[:, 0])
    with pytest.raises(DimensionError):
        linear_solve(as_matrix([[x, y]]), as_matrix([[1]])[:, 0])


def test_det_and_inverse():
    A = as_matrix([[x, 1], [y, x]])
    assert det(A) == x**2 - y
    Ainv = inverse(A)
    prod = A.dot(Ainv)
    assert all(prod[i, j] == (1 if i == j else 0) for i in range(2) for j in range(2))


def test_faddeev_leverrier_matches_determinant_and_adjugate():
    A = as_matrix([[x, 1, 0], [0, y, 1], [z, 0, 1]])
    sigma, B = faddeev_leverrier(A)
    t = var("t")
    tI_A = identity(3) * t - A
    chi = det(tI_A)
    assert chi == t**3 + sigma[0] * t**2 + sigma[1] * t + sigma[2]
    adj = B[0] * t**2 + B[1] * t + B[2]
    prod = tI_A.dot(adj)
    assert all(prod[i, j] == (chi if i == j else 0) for i in range(3) for j in range(3))


def test_lambdify_agrees_with_exact_evaluation():
    f = (x**2 + y) / (1 + x * y)
    g = lambdify([f], ["x", "y"])
    assert g([0.5, 2.0])[0] == pytest.approx(float(f.evaluate({"x": Fraction(1, 2), "y": Fraction(2)})))


@given(polynomials(), polynomials(), polynomials())
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c


@given(rational_functions())
def test_partials_commute(f):
    assert partial(partial(f, "x"), "y") == partial(partial(f, "y"), "x")


@given(rational_functions(), rational_functions(), rational_functions(), rational_functions())
def test_linear_solve_residual_is_zero(a, b, c, d):
    A = np.array([[a, b], [c, d]], dtype=object)
    if det(A).is_zero():
        return
    rhs = np.array([rf(1), var("x")], dtype=object)
    sol = linear_solve(A, rhs)
    assert all((A[i, 0] * sol[0] + A[i, 1] * sol[1] - rhs[i]).is_zero() for i in range(2))


def test_string_inputs_parse():
    assert rf("x^2 - 1") == (x - 1) * (x + 1)
    assert RationalFunction(Fraction(3, 4)).constant_value() == Fraction(3, 4)
