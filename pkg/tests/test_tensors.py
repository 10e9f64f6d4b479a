import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nijkit.acceptance import diagonal_operator, random_operator, random_poly
from nijkit.algebra import RationalFunction, var
from nijkit.tensors import (
    NonCommutingError,
    OperatorField,
    Tensor12,
    VectorField,
    apply_poly,
    canonical_form,
    char_poly,
    companion_operator,
    is_strong_symmetry,
    is_symmetry,
    lie_derivative,
    minimal_polynomial_degree,
    nijenhuis_bracket,
    nijenhuis_torsion,
    regularity_report,
    verify_core_identities,
)

u1, u2 = var("u1"), var("u2")
C2 = ("u1", "u2")


def _bracket(coords, X, Y):
    # independent coordinate Lie bracket of vector fields
    return [sum((X[a] * Y[i].diff(coords[a]) - Y[a] * X[i].diff(coords[a]) for a in range(len(coords))), RationalFunction(0)) for i in range(len(coords))]


def _apply(L, X):
    n = len(X)
    return [sum((L.comps[i, a] * X[a] for a in range(n)), RationalFunction(0)) for i in range(n)]


def torsion_on_fields(L, X, Y):
    """``[LX,LY] + L²[X,Y] − L[LX,Y] − L[X,LY]`` straight from the invariant definition."""
    c = L.coords
    LX, LY = _apply(L, X), _apply(L, Y)
    t1 = _bracket(c, LX, LY)
    t2 = _apply(L, _apply(L, _bracket(c, X, Y)))
    t3 = _apply(L, _bracket(c, LX, Y))
    t4 = _apply(L, _bracket(c, X, LY))
    return [a + b - p - q for a, b, p, q in zip(t1, t2, t3, t4)]


def test_torsion_of_normal_forms():
    assert nijenhuis_torsion(OperatorField(C2, [[u1, 0], [0, u1]])).is_zero()
    assert nijenhuis_torsion(OperatorField(C2, [[-u1, 1], [-u2, 0]])).is_zero()


def test_torsion_hand_expansion():
    N = nijenhuis_torsion(OperatorField(C2, [[0, u1], [u2, 0]]))
    assert [N.comps[i, 0, 1] for i in range(2)] == [u1, -u2]
    assert [N.comps[i, 1, 0] for i in range(2)] == [-u1, u2]


@pytest.mark.parametrize("seed", range(6))
def test_torsion_matches_invariant_definition(seed):
    rng = random.Random(seed)
    n = 2 + seed % 2
    L = random_operator(rng, n)
    c = L.coords
    X = [random_poly(rng, c, 1, 2) for _ in range(n)]
    Y = [random_poly(rng, c, 1, 2) for _ in range(n)]
    N = nijenhuis_torsion(L)
    contracted = [sum((N.comps[i, j, k] * X[j] * Y[k] for j in range(n) for k in range(n)), RationalFunction(0)) for i in range(n)]
    assert contracted == torsion_on_fields(L, X, Y)


@given(st.integers(0, 10**6))
def test_bracket_of_operator_with_itself_is_minus_torsion(seed):
    rng = random.Random(seed)
    L = random_operator(rng, 2 + seed % 2)
    assert (nijenhuis_bracket(L, L) + nijenhuis_torsion(L)).is_zero()


@given(st.integers(0, 10**6))
def test_torsion_is_antisymmetric(seed):
    L = random_operator(random.Random(seed), 2)
    assert nijenhuis_torsion(L).is_antisymmetric()


def test_bracket_examples():
    L = OperatorField(C2, [[0, 1], [0, 0]])
    M = OperatorField(C2, [[u2, u1], [0, u2]])
    assert is_strong_symmetry(L, M)
    K = OperatorField(C2, [[u1, 0], [0, u1]])
    assert not nijenhuis_bracket(L, K).symmetric_part().is_zero()
    assert not is_symmetry(L, K)


def test_bracket_requires_commuting_pair():
    with pytest.raises(NonCommutingError):
        nijenhuis_bracket(OperatorField(C2, [[0, 1], [0, 0]]), OperatorField(C2, [[0, 0], [1, 0]]))


def test_char_poly_examples():
    t = var("t")
    assert char_poly(companion_operator(C2)).polynomial() == t**2 + u1 * t + u2
    assert char_poly(diagonal_operator(C2)).polynomial() == t**2 - (u1 + u2) * t + u1 * u2
    assert char_poly(OperatorField.identity(C2)).polynomial() == t**2 - 2 * t + 1


@pytest.mark.parametrize("L", [companion_operator(C2), diagonal_operator(C2), OperatorField(C2, [[1, 2], [3, 4]])], ids=["companion", "diagonal", "constant"])
def test_core_identities(L):
    r = verify_core_identities(L)
    assert r.det_identity and r.chi_identity and r.companion_identity


def test_core_identities_report_failures_for_non_nijenhuis():
    r = verify_core_identities(OperatorField(C2, [[0, u1], [u2, 0]]))
    assert not (r.det_identity and r.chi_identity)


def test_lie_derivative_examples():
    assert lie_derivative(VectorField(C2, [0, 1]), OperatorField(C2, [[1, 2], [3, 4]])).is_zero()
    M = OperatorField(C2, [[u2, u1], [0, u2]])
    assert lie_derivative(VectorField(C2, [0, 1]), M) == OperatorField.identity(C2)
    a = Tensor12(C2, [[[1, 2], [3, 4]], [[5, 6], [7, 8]]])
    assert lie_derivative(VectorField(C2, [u1, u2]), a) == a


def test_apply_poly_examples():
    L = companion_operator(C2)
    assert apply_poly(L, [0, 1]) == L
    assert apply_poly(L, [1]) == OperatorField.identity(C2)
    assert nijenhuis_torsion(apply_poly(L, [0, 0, 1])).is_zero()


@given(st.lists(st.fractions(min_value=-9, max_value=9, max_denominator=5), min_size=1, max_size=5), st.sampled_from([2, 3]))
def test_polynomials_of_nijenhuis_operators_are_nijenhuis(coeffs, n):
    L = companion_operator(tuple(f"u{i + 1}" for i in range(n)))
    assert nijenhuis_torsion(apply_poly(L, coeffs)).is_zero()


def test_regularity_examples():
    r = regularity_report(companion_operator(C2), [3, -2])
    assert r.diff_nondegenerate and r.gl_regular
    assert regularity_report(diagonal_operator(C2), [1, 2]).gl_regular
    r = regularity_report(OperatorField(C2, [[u1, 0], [0, u1]]), [5, 1])
    assert not r.gl_regular and r.scalar_type


@given(st.integers(0, 10**6))
def test_diff_nondegenerate_implies_gl_regular(seed):
    rng = random.Random(seed)
    L = random_operator(rng, 2)
    point = [Fraction(rng.randint(-3, 3), rng.randint(1, 2)) for _ in range(2)]
    try:
        r = regularity_report(L, point)
    except Exception:
        return
    assert r.gl_regular or not r.diff_nondegenerate


def test_minimal_polynomial_degree():
    assert minimal_polynomial_degree([[1, 0], [0, 1]]) == 1
    assert minimal_polynomial_degree([[0, 1], [0, 0]]) == 2
    assert minimal_polynomial_degree([[2, 0, 0], [0, 2, 0], [0, 0, 3]]) == 2


def test_companion_forms_sharing_chi_coincide():
    L = companion_operator(C2)
    assert np.array_equal(canonical_form(L), canonical_form(OperatorField(C2, L.comps.copy())))
