import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nijkit.acceptance import random_jet_polynomial
from nijkit.algebra import RationalFunction, var
from nijkit.diffpoly import (
    BracketSpec,
    InvalidBracketError,
    JetSpace,
    bracket,
    first_jacobi_failure,
    jacobi_check,
    monomial_densities,
    random_densities,
    raw_bracket,
    sample_triples,
    skew_check,
    skew_residuals,
)

S1 = JetSpace(("u",))
S2 = JetSpace(("u1", "u2"))
u, ux, uxx, uxxx = (S1.jet(0, k) for k in range(4))
u1, u2, u1x, u2x = S2.jet(0, 0), S2.jet(1, 0), S2.jet(0, 1), S2.jet(1, 1)


def test_total_derivative_examples():
    assert S2.D(u1) == u1x
    assert S2.D(u1x**2) == 2 * u1x * S2.jet(0, 2)
    assert S2.D(u1 * u2) == u1x * u2 + u1 * u2x
    assert S1.D(u**3, 2) == 6 * u * ux**2 + 3 * u**2 * uxx


def test_total_derivative_raises_differential_degree_by_one():
    H = u**2 * ux * uxx + uxxx
    assert S1.differential_degree(H) == 3
    assert S1.differential_degree(S1.D(H)) == 4


def test_variational_derivative_examples():
    assert S1.delta(ux**2 / 2) == [-uxx]
    assert S1.delta(S1.D(u**3)) == [0]
    assert S1.delta(u**3) == [3 * u**2]
    assert S2.delta(u1 * u2x) == [u2x, -u1x]


def test_jet_names_and_parameters():
    assert S1.jet_name(0, 12) == "u_x12"
    assert S1.classify("u_x12") == (0, 12)
    assert S1.classify("k") is None
    k = var("k")
    assert S1.D(k * u) == k * ux


@given(st.integers(0, 10**6))
def test_delta_kills_total_derivatives(seed):
    H = random_jet_polynomial(random.Random(seed), S2)
    assert S2.is_total_derivative(S2.D(H))


@given(st.integers(0, 10**6), st.integers(-3, 3), st.integers(-3, 3))
def test_chain_rule_along_curves(seed, a, b):
    rng = random.Random(seed)
    H = random_jet_polynomial(rng, S2, degree=4)
    x = var("x")
    curve = {"u1": x**2 + a * x + 1, "u2": b * x**3 - x}
    lhs = S2.along_curve(S2.D(H), curve)
    rhs = S2.along_curve(H, curve).diff("x")
    assert lhs == rhs


def test_density_equality_is_modulo_total_derivatives():
    assert S1.density(u * uxx) == -(ux**2)
    assert S1.density(S1.D(u**5)).is_zero()
    assert S1.density(u) != S1.density(u**2)


def test_order_one_examples():
    spec = BracketSpec(1, ("u",), [[1]])
    assert bracket(spec, u**2 / 2, u**2 / 2).is_zero()
    assert (bracket(spec, u**2 / 2, u**2 / 2).expr) == u * ux
    rng = random.Random(1)
    for _ in range(5):
        assert bracket(spec, u, random_jet_polynomial(rng, S1)).is_zero()


def test_order_three_example():
    spec = BracketSpec(3, ("u",), [[1]])
    b = bracket(spec, u**2 / 2, u**2 / 2)
    assert b.expr == u * uxxx and b.is_zero()


def test_raw_bracket_matches_order_one_spec():
    spec = BracketSpec(1, ("u1", "u2"), [[1, 2], [2, 3]])
    H, F = u1**2 * u2, u2x**2 + u1
    assert raw_bracket(S2, [([[1, 2], [2, 3]], 1)], H, F) == bracket(spec, H, F)


def test_bracket_class_is_independent_of_representative():
    spec = BracketSpec(3, ("u1", "u2"), [[1, 0], [0, 2]])
    rng = random.Random(4)
    for _ in range(3):
        H, F, noise = (random_jet_polynomial(rng, S2, degree=3, max_order=1) for _ in range(3))
        assert bracket(spec, H + S2.D(noise), F) == bracket(spec, H, F)


@pytest.mark.parametrize(
    "order,g",
    [(1, [[1, 1], [0, 1]]), (1, [["u1", 0], [0, 1]]), (2, [[1, 0], [0, 1]]), (3, [[1, 0], [1, 1]]), (3, [["u1", 0], [0, 1]]), (1, [[0, 0], [0, 0]])],
)
def test_invalid_specs_are_rejected(order, g):
    spec = BracketSpec(order, ("u1", "u2"), [[var(x) if isinstance(x, str) else x for x in row] for row in g])
    with pytest.raises(InvalidBracketError):
        bracket(spec, u1, u2)


def test_invalid_order_rejected():
    with pytest.raises(InvalidBracketError):
        BracketSpec(4, ("u",), [[1]])


def test_skew_examples():
    samples = monomial_densities(S2, 2, 1)
    assert skew_check(BracketSpec(1, ("u1", "u2"), [[1, 2], [2, -1]]), samples)
    assert not skew_check(BracketSpec(1, ("u1", "u2"), [[1, 2], [0, 1]]), samples)
    assert skew_check(BracketSpec(2, ("u1", "u2"), [[0, 1], [-1, 0]]), samples)
    residuals = skew_residuals(BracketSpec(2, ("u1", "u2"), [[1, 0], [0, 1]]), samples)
    assert residuals and all(any(not r.is_zero() for r in d) for _, _, d in residuals)


def test_jacobi_darboux_cases():
    samples = monomial_densities(S1, 2, 2)
    triples = list(itertools.combinations(samples, 3))
    assert jacobi_check(BracketSpec(1, ("u",), [[1]]), triples)
    assert jacobi_check(BracketSpec(3, ("u",), [[3]]), triples)
    two = random_densities(S2, 6, seed=2)
    assert jacobi_check(BracketSpec(3, ("u1", "u2"), [[1, 0], [0, -2]]), sample_triples(two, 5, seed=3))


def test_jacobi_fails_for_non_killing_order_three():
    spec = BracketSpec(3, ("u",), [[u]], [[[Fraction(1, 2)]]])
    samples = monomial_densities(S1, 2, 3)
    assert skew_check(spec, samples)
    hit = first_jacobi_failure(spec, itertools.combinations(samples, 3))
    assert hit is not None
    (H, F, G), residual = hit
    assert any(not r.is_zero() for r in residual)
    with pytest.raises(InvalidBracketError):
        bracket(spec, H, F)


def test_sampling_is_reproducible():
    assert random_densities(S2, 4, seed=7) == random_densities(S2, 4, seed=7)
    assert sample_triples(list(range(10)), 3, seed=1) == sample_triples(list(range(10)), 3, seed=1)
