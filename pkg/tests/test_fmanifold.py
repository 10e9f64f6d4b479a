import random

import numpy as np
import pytest

from nijkit.acceptance import jordan_example, random_poly
from nijkit.algebra import RationalFunction, SingularMatrixError, var
from nijkit.fmanifold import (
    DerogatoryError,
    NotCommutativeError,
    assoc_check,
    build_TM,
    compatibility_experiment,
    construct_unity,
    contract_hm,
    cyclic_check,
    cyclic_determinant,
    decompose_symmetry,
    euler_check,
    exchange_identity,
    f_manifold_check,
    frobenius_check,
    frobenius_metric,
    hm_evaluate,
    hm_tensor,
    is_commutative,
    lie_unity_symmetry_experiment,
    multiplication_operator,
    regular_symmetry_check,
    symmetry_structure,
    unity_check,
)
from nijkit.tensors import OneForm, OperatorField, Tensor12, VectorField, apply_poly, companion_operator, nijenhuis_torsion

U = ("u1", "u2")
u1, u2 = var("u1"), var("u2")
ZERO = RationalFunction(0)


def tensor12(entries):
    A = np.full((2, 2, 2), ZERO, dtype=object)
    for (i, j, k), v in entries.items():
        A[i, j, k] = RationalFunction(0) + v
    return Tensor12(U, A)


DUAL_NUMBERS = tensor12({(0, 0, 0): 1, (1, 0, 1): 1, (1, 1, 0): 1})  # e0 = 1, e1 = s, s² = 0
SPLIT = tensor12({(0, 0, 0): 1, (1, 1, 1): 1})
CURVED = tensor12({(0, 0, 0): u2, (1, 1, 1): u1 + 1})  # commutative, associative, not Hertling-Manin


def test_constant_algebras():
    for a in (DUAL_NUMBERS, SPLIT):
        assert is_commutative(a) and assoc_check(a) and hm_tensor(a).is_zero()


def test_associativity_failure_exhibited():
    a = tensor12({(0, 0, 0): 1, (0, 1, 1): 1})
    assert is_commutative(a) and not assoc_check(a)


def test_hm_rejects_noncommutative():
    with pytest.raises(NotCommutativeError):
        hm_tensor(tensor12({(0, 0, 1): 1}))


def test_hm_is_tensorial_on_random_frames():
    H = hm_tensor(CURVED)
    assert not H.is_zero()
    rng = random.Random(9)
    fields = [np.array([random_poly(rng, U, 2, 2) for _ in range(2)], dtype=object) for _ in range(4)]
    direct = hm_evaluate(CURVED, *fields)
    assert all(a == b for a, b in zip(direct, contract_hm(H, *fields)))


def test_euler_examples():
    E = VectorField(U, [u1, u2])
    assert euler_check(DUAL_NUMBERS, E)
    assert not euler_check(DUAL_NUMBERS, VectorField(U, [0, 0]))


def test_unity_and_cyclic_examples():
    L, M = jordan_example()
    e = VectorField(U, [0, 1])
    assert unity_check(M, e)
    assert cyclic_determinant(M, e) == -u1 and cyclic_check(M, e)
    assert not unity_check(OperatorField(U, [[1, 2], [0, 3]]), VectorField(U, [1, 1]))


def test_decompose_symmetry_examples():
    L, M = jordan_example()
    assert decompose_symmetry(M, L) == [u1, u2]
    C = companion_operator(U)
    assert decompose_symmetry(apply_poly(C, [0, 0, 1]), C) == [-u1, -u2]
    assert decompose_symmetry(OperatorField.identity(U), C) == [0, 1]
    with pytest.raises(DerogatoryError):
        decompose_symmetry(M, OperatorField.identity(U))


def test_worked_example_structure():
    L, M = jordan_example()
    T = build_TM(M, L)
    assert T.comps[0, 0, 1] == 1 and T.comps[0, 1, 0] == 1 and T.comps[1, 1, 1] == 1 and T.comps[0, 0, 0] == 0
    assert is_commutative(T) and assoc_check(T) and exchange_identity(T, L)
    assert regular_symmetry_check(M, L)
    res = construct_unity(M, L)
    assert list(res.e.comps) == [0, 1] and res.lie_e_L_zero and res.lie_e_M_identity
    a, e, E = symmetry_structure(M, L)
    assert list(E.comps) == [u1, u2]
    assert multiplication_operator(a, E) == M
    assert f_manifold_check(a, e, E).ok


def test_identity_symmetry_is_not_regular():
    L, _ = jordan_example()
    Id = OperatorField.identity(U)
    assert build_TM(Id, L).is_zero()
    assert not regular_symmetry_check(Id, L)
    with pytest.raises(SingularMatrixError):
        construct_unity(Id, L)


def test_frobenius_examples():
    L, M = jordan_example()
    a, e, E = symmetry_structure(M, L)
    g = frobenius_metric(a, OneForm(U, [1, 0]))
    assert [[str(x) for x in row] for row in g] == [["0", "1"], ["1", "0"]]
    assert frobenius_check(a, e, E, OneForm(U, [1, 0]), 0).ok
    rep = frobenius_check(a, e, E, OneForm(U, [0, 1]), 0)
    assert not rep.cond1 and rep.details["nondegenerate"] is False
    rep = frobenius_check(a, e, E, OneForm(U, [u2, 0]), 0)
    assert not rep.cond2
    assert not frobenius_check(a, e, E, OneForm(U, [1, 0]), 1).cond4


@pytest.mark.parametrize("f", [[0, 0, 1], [1, 0, 1, 1], [0, 3]])
def test_symmetry_products_of_constant_operator(f):
    L, M = jordan_example()
    N = apply_poly(M, f)
    T = build_TM(N, L)
    assert is_commutative(T) and assoc_check(T) and exchange_identity(T, L) and hm_tensor(T).is_zero()
    res = construct_unity(N, L)
    assert res.lie_e_L_zero and res.lie_e_M_identity


def test_non_constant_operator_has_no_invariant_unity():
    # associativity survives, but the solved e does not preserve L and the bracket does not vanish
    C = companion_operator(U)
    M = apply_poly(C, [0, 0, 1])
    T = build_TM(M, C)
    assert is_commutative(T) and assoc_check(T) and exchange_identity(T, C)
    res = construct_unity(M, C)
    assert not res.lie_e_L_zero
    assert not hm_tensor(T).is_zero()


def test_f_axioms_give_nijenhuis_operator():
    L, M = jordan_example()
    a, e, E = symmetry_structure(M, L)
    assert nijenhuis_torsion(multiplication_operator(a, E)).is_zero()


def test_experiments_report_without_asserting():
    L, M = jordan_example()
    out = lie_unity_symmetry_experiment(M, L, VectorField(U, [0, 1]))
    assert set(out) >= {"lie_e_M", "commutes", "symmetry", "strong_symmetry"}
    out = compatibility_experiment(M, apply_poly(M, [0, 0, 1]), L)
    assert out["T_M_associative"] and isinstance(out["compatible"], bool)
