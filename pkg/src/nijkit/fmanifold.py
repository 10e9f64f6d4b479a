"""F-manifold structures from symmetries of Nijenhuis operators, and Frobenius checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraError, DimensionError, RationalFunction, SingularMatrixError, det, identity, rf, solve_overdetermined
from .geometry import is_flat, levi_civita
from .integrable import exterior_derivative
from .tensors import (
    DegenerateMetricError,
    MetricField,
    OneForm,
    OperatorField,
    Tensor,
    Tensor12,
    _sum,
    _zeros,
    jacobian,
    lie_derivative,
    matmul,
    nijenhuis_bracket,
    nijenhuis_torsion,
)


class NotCommutativeError(AlgebraError):
    pass


class DerogatoryError(AlgebraError):
    """Powers of the operator are linearly dependent over the function field."""


def is_commutative(a: Tensor12) -> bool:
    n = a.n
    return all(a.comps[i, j, k] == a.comps[i, k, j] for i in range(n) for j in range(n) for k in range(j))


# --------------------------------------------------------------------------
# vector-field operations


def product(a: Tensor12, X, Y) -> np.ndarray:
    """``(X∘Y)^i = a^i_{jk} X^j Y^k``."""
    n = a.n
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = _sum(a.comps[i, j, k] * X[j] * Y[k] for j in range(n) for k in range(n) if not (X[j].is_zero() or Y[k].is_zero()))
    return out


def lie_bracket(coords, X, Y) -> np.ndarray:
    """``[X,Y]^i = X^a ∂_a Y^i − Y^a ∂_a X^i``."""
    n = len(coords)
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = _sum(X[a] * Y[i].diff(coords[a]) - Y[a] * X[i].diff(coords[a]) for a in range(n))
    return out


def hm_evaluate(a: Tensor12, xi, eta, zeta, theta) -> np.ndarray:
    """The Hertling–Manin expression on four vector fields (component arrays)."""
    c = a.coords
    m = lambda X, Y: product(a, X, Y)
    b = lambda X, Y: lie_bracket(c, X, Y)
    xe = m(xi, eta)
    zt = m(zeta, theta)
    return (
        b(xe, zt)
        - m(b(xe, zeta), theta)
        - m(zeta, b(xe, theta))
        - m(xi, b(eta, zt))
        + m(m(xi, b(eta, zeta)), theta)
        + m(m(xi, zeta), b(eta, theta))
        - m(eta, b(xi, zt))
        + m(m(eta, b(xi, zeta)), theta)
        + m(m(eta, zeta), b(xi, theta))
    )


def _basis(n: int, j: int) -> np.ndarray:
    v = _zeros((n,))
    v[j] = RationalFunction(1)
    return v


def hm_tensor(a: Tensor12) -> Tensor:
    """Components ``H^i_{jklm}`` of the Hertling–Manin expression on coordinate fields."""
    if not is_commutative(a):
        raise NotCommutativeError("multiplication is not commutative")
    n = a.n
    H = np.empty((n,) * 5, dtype=object)
    basis = [_basis(n, j) for j in range(n)]
    for j, k, l, m in itertools.product(range(n), repeat=4):
        v = hm_evaluate(a, basis[j], basis[k], basis[l], basis[m])
        for i in range(n):
            H[i, j, k, l, m] = v[i]
    return Tensor(a.coords, H, 1, 4)


def contract_hm(H: Tensor, xi, eta, zeta, theta) -> np.ndarray:
    n = H.n
    out = np.empty(n, dtype=object)
    for i in range(n):
        out[i] = _sum(
            H.comps[i, j, k, l, m] * xi[j] * eta[k] * zeta[l] * theta[m]
            for j, k, l, m in itertools.product(range(n), repeat=4)
            if not H.comps[i, j, k, l, m].is_zero()
        )
    return out


def assoc_check(a: Tensor12) -> bool:
    """``a^i_{js} a^s_{kl} = a^i_{ks} a^s_{jl}``."""
    return associator(a, a).is_zero()


def associator(a: Tensor12, b: Tensor12) -> Tensor:
    n = a.n
    out = np.empty((n,) * 4, dtype=object)
    for i, j, k, l in itertools.product(range(n), repeat=4):
        out[i, j, k, l] = _sum(a.comps[i, j, s] * b.comps[s, k, l] - a.comps[i, k, s] * b.comps[s, j, l] for s in range(n))
    return Tensor(a.coords, out, 1, 3)


def compatible_products(a: Tensor12, b: Tensor12) -> bool:
    """Every combination ``a + s b`` is associative: both are, and the mixed associator vanishes."""
    mixed = associator(a, b) + associator(b, a)
    return assoc_check(a) and assoc_check(b) and mixed.is_zero()


def euler_check(a: Tensor12, E) -> bool:
    """``𝓛_E a = a``."""
    return (lie_derivative(E, a) - a).is_zero()


def unity_check(L: OperatorField, e) -> bool:
    """``𝓛_e L = Id``."""
    return lie_derivative(e, L) == OperatorField.identity(L.coords)


def cyclic_determinant(L: OperatorField, e) -> RationalFunction:
    """``det[e, Le, …, L^{n−1}e]``."""
    n = L.n
    cols = [np.array(e.comps, dtype=object)]
    for _ in range(n - 1):
        cols.append(L.act(type(e)(e.coords, cols[-1])).comps)
    K = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            K[i, j] = cols[j][i]
    return det(K)


def cyclic_check(L: OperatorField, e) -> bool:
    return not cyclic_determinant(L, e).is_zero()


def is_unital(a: Tensor12, e) -> bool:
    """``a(e, ·) = Id``."""
    n = a.n
    return all(
        _sum(e.comps[j] * a.comps[i, j, k] for j in range(n)) == (1 if i == k else 0) for i in range(n) for k in range(n)
    )


def multiplication_operator(a: Tensor12, E) -> OperatorField:
    """``ξ ↦ E∘ξ``."""
    n = a.n
    comps = [[_sum(a.comps[i, j, k] * E.comps[j] for j in range(n)) for k in range(n)] for i in range(n)]
    return OperatorField(a.coords, comps)


@dataclass
class FStructureReport:
    commutative: bool
    associative: bool
    unital: bool
    hertling_manin: bool
    euler: bool
    operator_nijenhuis: bool

    @property
    def ok(self) -> bool:
        return all(vars(self).values())


def f_manifold_check(a: Tensor12, e, E) -> FStructureReport:
    comm = is_commutative(a)
    return FStructureReport(
        commutative=comm,
        associative=assoc_check(a),
        unital=is_unital(a, e),
        hertling_manin=comm and hm_tensor(a).is_zero(),
        euler=euler_check(a, E),
        operator_nijenhuis=nijenhuis_torsion(multiplication_operator(a, E)).is_zero(),
    )


# --------------------------------------------------------------------------
# symmetries and T_M


def _powers(L: OperatorField) -> list[np.ndarray]:
    P = [identity(L.n)]
    for _ in range(L.n - 1):
        P.append(matmul(P[-1], L.comps))
    return P


def decompose_symmetry(M: OperatorField, L: OperatorField) -> list[RationalFunction]:
    """``g_1..g_n`` with ``M = g_1 L^{n−1} + … + g_n Id``."""
    n = L.n
    P = _powers(L)[::-1]  # L^{n-1}, ..., Id
    A = np.empty((n * n, n), dtype=object)
    b = np.empty(n * n, dtype=object)
    for r, (i, j) in enumerate(itertools.product(range(n), repeat=2)):
        for m in range(n):
            A[r, m] = P[m][i, j]
        b[r] = M.comps[i, j]
    try:
        g = solve_overdetermined(A, b)
    except SingularMatrixError:
        raise DerogatoryError("Id, L, ..., L^(n-1) are linearly dependent") from None
    return list(g)


def build_TM(M: OperatorField, L: OperatorField, g=None) -> Tensor12:
    """``T^i_{jk} = Σ_m ∂_j g_m (L^{n−m})^i_k``."""
    n = L.n
    if g is None:
        g = decompose_symmetry(M, L)
    P = _powers(L)[::-1]
    dg = jacobian(g, L.coords)  # dg[m, j] = ∂_j g_m
    T = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        T[i, j, k] = _sum(dg[m, j] * P[m][i, k] for m in range(n))
    return Tensor12(L.coords, T)


def exchange_identity(T: Tensor12, L: OperatorField) -> bool:
    """``T(Lξ, η) = T(ξ, Lη)``."""
    n = L.n
    return all(
        _sum(T.comps[i, a, k] * L.comps[a, j] for a in range(n)) == _sum(T.comps[i, j, a] * L.comps[a, k] for a in range(n))
        for i, j, k in itertools.product(range(n), repeat=3)
    )


def regular_symmetry_check(M: OperatorField, L: OperatorField) -> bool:
    """``dg_1 ∧ … ∧ dg_n ≠ 0``."""
    g = decompose_symmetry(M, L)
    return not det(jacobian(g, L.coords)).is_zero()


@dataclass
class UnityResult:
    e: object
    lie_e_L_zero: bool
    lie_e_M_identity: bool
    cyclic_det: RationalFunction


def construct_unity(M: OperatorField, L: OperatorField) -> UnityResult:
    """The unique ``e`` with ``T_M(e, ·) = Id``."""
    from .tensors import VectorField

    n = L.n
    T = build_TM(M, L)
    A = np.empty((n * n, n), dtype=object)
    b = np.empty(n * n, dtype=object)
    for r, (i, k) in enumerate(itertools.product(range(n), repeat=2)):
        for j in range(n):
            A[r, j] = T.comps[i, j, k]
        b[r] = RationalFunction(1 if i == k else 0)
    try:
        sol = solve_overdetermined(A, b)
    except SingularMatrixError:
        raise SingularMatrixError("T_M(e, .) = Id has no unique solution; the symmetry is not regular") from None
    e = VectorField(L.coords, sol)
    return UnityResult(
        e=e,
        lie_e_L_zero=lie_derivative(e, L).is_zero(),
        lie_e_M_identity=unity_check(M, e),
        cyclic_det=cyclic_determinant(L, e),
    )


def symmetry_structure(M: OperatorField, L: OperatorField):
    """``(a, e, E) = (T_M, e, M e)``."""
    a = build_TM(M, L)
    e = construct_unity(M, L).e
    return a, e, M.act(e)


# --------------------------------------------------------------------------
# Frobenius


@dataclass
class FrobeniusReport:
    cond1: bool
    cond2: bool
    cond3: bool
    cond4: bool
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3 and self.cond4

    def as_dict(self) -> dict:
        return {
            "cond1_flat_metric": self.cond1,
            "cond2_closed": self.cond2,
            "cond3_unity_killing": self.cond3,
            "cond4_euler": self.cond4,
            **{k: (v if isinstance(v, (bool, int, str)) or v is None else str(v)) for k, v in self.details.items()},
        }


def frobenius_metric(a: Tensor12, alpha: OneForm) -> np.ndarray:
    """``g_{jk} = α_i a^i_{jk}``."""
    n = a.n
    g = np.empty((n, n), dtype=object)
    for j, k in itertools.product(range(n), repeat=2):
        g[j, k] = _sum(alpha.comps[i] * a.comps[i, j, k] for i in range(n))
    return g


def frobenius_check(a: Tensor12, e, E, alpha: OneForm, d) -> FrobeniusReport:
    n = a.n
    d = rf(d)
    gc = frobenius_metric(a, alpha)
    details = {}
    symmetric = all(gc[i, j] == gc[j, i] for i in range(n) for j in range(i))
    nondeg = not det(gc).is_zero()
    flat = False
    g = None
    if symmetric and nondeg:
        g = MetricField(a.coords, gc)
        try:
            flat = is_flat(levi_civita(g))
        except DegenerateMetricError:
            nondeg = False
    details.update(symmetric=symmetric, nondegenerate=nondeg, flat=flat, metric=str([[str(x) for x in row] for row in gc]))
    cond1 = symmetric and nondeg and flat
    cond2 = all(x.is_zero() for x in exterior_derivative(alpha).flat)
    gt = Tensor(a.coords, gc, 0, 2)
    cond3 = lie_derivative(e, gt).is_zero()
    euler_a = euler_check(a, E)
    euler_g = (lie_derivative(E, gt) - gt.scale(2 - d)).is_zero()
    details.update(euler_multiplication=euler_a, euler_metric=euler_g)
    return FrobeniusReport(cond1, cond2, cond3, euler_a and euler_g, details)


# --------------------------------------------------------------------------
# experiments on open questions (report only)


def lie_unity_symmetry_experiment(M: OperatorField, L: OperatorField, e) -> dict:
    """Is ``𝓛_e M`` again a (strong) symmetry of ``L``?  Reports, asserts nothing."""
    K = lie_derivative(e, M)
    out = {"lie_e_M": str(K), "commutes": L.commutes_with(K)}
    if out["commutes"]:
        br = nijenhuis_bracket(L, K)
        out["symmetry"] = br.symmetric_part().is_zero()
        out["strong_symmetry"] = br.is_zero()
    else:
        out["symmetry"] = out["strong_symmetry"] = False
    return out


def compatibility_experiment(M: OperatorField, N: OperatorField, L: OperatorField) -> dict:
    a, b = build_TM(M, L), build_TM(N, L)
    return {"T_M_associative": assoc_check(a), "T_N_associative": assoc_check(b), "compatible": compatible_products(a, b)}
