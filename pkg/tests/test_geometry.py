import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nijkit.acceptance import diagonal_operator, random_connection, random_poly, separable_metric
from nijkit.algebra import RationalFunction, var
from nijkit.geometry import (
    Connection,
    NotSelfAdjointError,
    connection_equiv_check,
    covariant_derivative,
    equivalent_partner,
    geodesic_compat_check,
    geodesic_equiv_check,
    is_flat,
    killing_check,
    killing_tensor_operator,
    killing_yano_check,
    killing_yano_operator,
    levi_civita,
    metric_from_sigma,
    metrisability_operator,
    projective_change,
    riemann,
    scalar_curvature,
    sigma_from_metric,
)
from nijkit.tensors import DegenerateMetricError, MetricField, OneForm, OperatorField, Tensor

x1, x2, x3 = var("x1"), var("x2"), var("x3")
C2 = ("x1", "x2")
C3 = ("x1", "x2", "x3")
EUCLID = MetricField(C2, [[1, 0], [0, 1]])


def test_christoffel_examples():
    assert levi_civita(EUCLID) == Connection.flat(C2)
    G = levi_civita(MetricField(C2, [[x1 - x2, 0], [0, x2 - x1]])).gamma
    assert G[0, 0, 0] == 1 / (2 * (x1 - x2))
    G = levi_civita(MetricField(C2, [[x1, 0], [0, x1]])).gamma
    half = 1 / (2 * x1)
    assert (G[0, 0, 0], G[0, 1, 1], G[1, 0, 1], G[1, 1, 0]) == (half, -half, half, half)


def test_degenerate_metric_is_rejected():
    with pytest.raises(DegenerateMetricError):
        levi_civita(MetricField(C2, [[x1, 0], [0, 0]]))


def test_curvature_examples():
    assert riemann(Connection.flat(C2)).is_zero()
    assert is_flat(levi_civita(separable_metric(C2)))
    assert is_flat(levi_civita(separable_metric(C3)))
    x, y = var("x"), var("y")
    conf = 4 / (1 + x**2 + y**2) ** 2
    sphere = MetricField(("x", "y"), [[conf, 0], [0, conf]])
    assert scalar_curvature(sphere) == 2


def test_riemann_matches_hand_formula_on_random_connection():
    rng = random.Random(3)
    conn = random_connection(rng, C2)
    R = riemann(conn).comps
    G = conn.gamma
    c = conn.coords
    for i, j, k, l in itertools.product(range(2), repeat=4):
        expect = G[i, l, j].diff(c[k]) - G[i, k, j].diff(c[l])
        for a in range(2):
            expect = expect + G[i, k, a] * G[a, l, j] - G[i, l, a] * G[a, k, j]
        assert R[i, j, k, l] == expect


def test_geodesic_compat_examples():
    assert geodesic_compat_check(EUCLID, OperatorField.identity(C2)).holds
    assert geodesic_compat_check(separable_metric(C2), diagonal_operator(C2)).holds
    r = geodesic_compat_check(EUCLID, OperatorField(C2, [[x1, 0], [0, x1]]))
    assert not r.holds
    assert r.at_direction(1) == OperatorField(C2, [[0, 1], [1, 0]])


def test_compat_requires_self_adjoint():
    with pytest.raises(NotSelfAdjointError):
        geodesic_compat_check(EUCLID, OperatorField(C2, [[0, 1], [0, 0]]))


def test_geodesic_equivalence_examples():
    r = geodesic_equiv_check(EUCLID, MetricField(C2, [[3, 0], [0, 3]]))
    assert r.equivalent and all(p.is_zero() for p in r.phi.comps)
    g, L = separable_metric(C2), diagonal_operator(C2)
    assert geodesic_equiv_check(g, equivalent_partner(g, L)).equivalent
    r = geodesic_equiv_check(EUCLID, MetricField(C2, [[1, 0], [0, x1]]))
    assert not r.equivalent and not r.residual.is_zero()


def test_equivalent_partner_for_three_dimensional_pair():
    g, L = separable_metric(C3), diagonal_operator(C3)
    r = geodesic_equiv_check(g, equivalent_partner(g, L))
    assert r.equivalent
    assert isinstance(r.phi_closed, bool)


def test_killing_examples():
    assert killing_check(EUCLID.comps, levi_civita(EUCLID)).holds
    flat = Connection.flat(C2)
    rot = [[x2**2, -x1 * x2], [-x1 * x2, x1**2]]
    assert killing_check(rot, flat).holds
    r = killing_check([[x1, 0], [0, 0]], flat)
    assert not r.holds and r.residual.comps[0, 0, 0] == 1


def test_killing_yano_examples():
    flat = Connection.flat(C2)
    assert killing_yano_check([[0, 1], [-1, 0]], flat).holds
    r = killing_yano_check([[0, x1], [-x1, 0]], flat)
    assert not r.holds and r.residual.comps[0, 1, 0] == Fraction(1, 2)


def test_killing_yano_cyclic_three_form_example():
    # σ = x3 dx1∧dx2 + x1 dx2∧dx3 + x2 dx3∧dx1
    s = [[0, x3, -x2], [-x3, 0, x1], [x2, -x1, 0]]
    r = killing_yano_check(s, Connection.flat(C3))
    D = [[[s[i][j].diff(C3[k]) if hasattr(s[i][j], "diff") else 0 for k in range(3)] for j in range(3)] for i in range(3)]
    expected_zero = all((D[i][j][k] + D[i][k][j]) == 0 for i, j, k in itertools.product(range(3), repeat=3))
    assert r.holds == expected_zero


def test_projective_change_examples():
    flat = Connection.flat(C2)
    assert projective_change(flat, OneForm(C2, [0, 0])) == flat
    G = projective_change(flat, OneForm(C2, [1, 0])).gamma
    assert G[0, 0, 0] == 2 and G[1, 0, 1] == 1 and G[1, 1, 0] == 1
    assert all(G[idx].is_zero() for idx in [(0, 0, 1), (0, 1, 0), (0, 1, 1), (1, 0, 0), (1, 1, 1)])
    conn = random_connection(random.Random(1), C2)
    phi = OneForm(C2, [x1, x2**2])
    assert projective_change(projective_change(conn, phi), phi.scale(-1)) == conn


def test_weighted_derivative_examples():
    flat = Connection.flat(C2)
    T = Tensor(C2, [[x1 * x2, 1], [0, x2]], 0, 2, weight=3)
    D = covariant_derivative(T, flat).comps
    assert D[0, 0, 1] == x1 and D[1, 1, 1] == 1
    f = Tensor(C2, x1**2 * x2, 0, 0)
    assert list(covariant_derivative(f, random_connection(random.Random(2), C2)).comps) == [2 * x1 * x2, x1**2]


@pytest.mark.parametrize("w", [-2, 1, 3, 4])
def test_weighted_scalar_transformation_law(w):
    conn = random_connection(random.Random(w + 10), C2)
    phi = OneForm(C2, [x2, 1 + x1])
    omega = Tensor(C2, x1 * x2 + 1, 0, 0, weight=w)
    diff = covariant_derivative(omega, projective_change(conn, phi)).comps - covariant_derivative(omega, conn).comps
    assert all(diff[k] == phi.comps[k] * omega.comps[()] * w for k in range(2))


def test_metrisability_examples():
    g = MetricField(C2, [[x1, 0], [0, x1**2]])
    sigma = sigma_from_metric(g)
    assert metrisability_operator(sigma, levi_civita(g)).is_zero()
    const = Tensor(C2, [[1, 2], [2, 5]], 2, 0, weight=-2)
    assert metrisability_operator(const, Connection.flat(C2)).is_zero()
    assert geodesic_equiv_check(metric_from_sigma(sigma), g).equivalent


def test_levi_civita_is_metric_on_random_metrics():
    rng = random.Random(5)
    for _ in range(4):
        a, b, c = (random_poly(rng, C2, 1, 2) + 7 for _ in range(3))
        g = MetricField(C2, [[a, b], [b, c]])
        if g.det().is_zero():
            continue
        assert covariant_derivative(g, levi_civita(g)).is_zero()


@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_projective_invariance_property(seed, n):
    rng = random.Random(seed)
    c = C2 if n == 2 else C3
    conn = random_connection(rng, c)
    phi = OneForm(c, [random_poly(rng, c, 1, 2) for _ in range(n)])
    bar = projective_change(conn, phi)
    S = np.empty((n, n), dtype=object)
    A = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(i, n):
            S[i, j] = S[j, i] = random_poly(rng, c, 1, 2)
            A[i, j] = random_poly(rng, c, 1, 2) if i != j else RationalFunction(0)
            A[j, i] = -A[i, j]
    assert killing_tensor_operator(S, conn, 4) == killing_tensor_operator(S, bar, 4)
    assert killing_yano_operator(A, conn, 3) == killing_yano_operator(A, bar, 3)
    sig = Tensor(c, S, 2, 0, weight=-2)
    assert metrisability_operator(sig, conn) == metrisability_operator(sig, bar)


def test_wrong_weight_breaks_invariance():
    rng = random.Random(11)
    conn = random_connection(rng, C2)
    phi = OneForm(C2, [x1, x2])
    S = [[x1, x2], [x2, 1]]
    assert killing_tensor_operator(S, conn, 0) != killing_tensor_operator(S, projective_change(conn, phi), 0)


def test_equivalence_round_trip_recovers_phi():
    conn = random_connection(random.Random(4), C2)
    phi = OneForm(C2, [x1 * x2, 3])
    r = connection_equiv_check(conn, projective_change(conn, phi))
    assert r.equivalent and r.phi == phi
