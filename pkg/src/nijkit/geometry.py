"""Affine connections, curvature and projective geometry of metrics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import AlgebraError, DimensionError, RationalFunction, det, inverse, rf
from .tensors import (
    DegenerateMetricError,
    MetricField,
    OneForm,
    OperatorField,
    Tensor,
    Tensor12,
    _sum,
    _zeros,
    grad,
    matmul,
)


class NotSelfAdjointError(AlgebraError):
    pass


class NotAPerfectPowerError(AlgebraError):
    pass


class Connection:
    """Christoffel symbols ``G[i, j, k] = Γ^i_{jk}``."""

    def __init__(self, coords, comps, check_symmetric: bool = True):
        self.coords = tuple(coords)
        self.gamma = Tensor12(self.coords, comps).comps
        n = self.n
        if check_symmetric:
            for i, j, k in itertools.product(range(n), repeat=3):
                if k < j and self.gamma[i, j, k] != self.gamma[i, k, j]:
                    raise DimensionError(f"connection has torsion at ({i}, {j}, {k})")

    @property
    def n(self) -> int:
        return len(self.coords)

    @classmethod
    def flat(cls, coords) -> "Connection":
        n = len(coords)
        return cls(coords, _zeros((n, n, n)))

    def __getitem__(self, idx):
        return self.gamma[idx]

    def __eq__(self, other):
        if not isinstance(other, Connection):
            return NotImplemented
        return self.coords == other.coords and all(a == b for a, b in zip(self.gamma.flat, other.gamma.flat))

    __hash__ = None

    def trace(self) -> list[RationalFunction]:
        """``Γ^a_{ka}`` for each k."""
        return [_sum(self.gamma[a, k, a] for a in range(self.n)) for k in range(self.n)]

    def __repr__(self):
        nz = {idx: str(v) for idx, v in np.ndenumerate(self.gamma) if not v.is_zero()}
        return f"Connection({self.coords}, nonzero={nz})"


# --------------------------------------------------------------------------
# covariant derivatives


def covariant_derivative(T: Tensor, conn: Connection) -> Tensor:
    """``∇T`` with the derivative index appended last; the weight term is included.

    For weight ``w`` the extra term is ``+(w/(n+1)) Γ^a_{ka} T``.
    """
    if T.coords != conn.coords:
        raise DimensionError("tensor and connection live on different charts")
    n = T.n
    up, down = T.valence
    C = T.comps
    dC = grad(T.coords, C)
    G = conn.gamma
    tr = conn.trace() if T.weight else None
    wf = Fraction(T.weight, n + 1)
    out = np.empty(C.shape + (n,), dtype=object)
    for idx in np.ndindex(C.shape):
        for k in range(n):
            acc = dC[(k,) + idx]
            for s in range(up + down):
                for a in range(n):
                    src = idx[:s] + (a,) + idx[s + 1 :]
                    if s < up:
                        acc = acc + G[idx[s], k, a] * C[src]
                    else:
                        acc = acc - G[a, k, idx[s]] * C[src]
            if T.weight:
                acc = acc + tr[k] * C[idx] * wf
            out[idx + (k,)] = acc
    return Tensor(T.coords, out, up, down + 1, weight=T.weight)


def weighted_cov_derivative(T: Tensor, conn: Connection) -> Tensor:
    return covariant_derivative(T, conn)


# --------------------------------------------------------------------------
# Levi-Civita and curvature


def levi_civita(g: MetricField) -> Connection:
    """``Γ^i_{jk} = ½ g^{ia}(∂_j g_{ak} + ∂_k g_{aj} − ∂_a g_{jk})``; verifies ``∇g = 0``."""
    n = g.n
    ginv = g.inverse_matrix()
    dg = grad(g.coords, g.comps)  # dg[a, i, j] = ∂_a g_ij
    half = Fraction(1, 2)
    G = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        if k < j:
            G[i, j, k] = G[i, k, j]
            continue
        G[i, j, k] = _sum(ginv[i, a] * (dg[j, a, k] + dg[k, a, j] - dg[a, j, k]) for a in range(n)) * half
    conn = Connection(g.coords, G)
    if not covariant_derivative(g, conn).is_zero():
        raise AlgebraError("Levi-Civita postcondition failed: nabla g != 0")
    return conn


def riemann(conn: Connection) -> Tensor:
    """``R^i_{jkl} = ∂_kΓ^i_{lj} − ∂_lΓ^i_{kj} + Γ^i_{ka}Γ^a_{lj} − Γ^i_{la}Γ^a_{kj}``."""
    n = conn.n
    G = conn.gamma
    dG = grad(conn.coords, G)  # dG[a, i, j, k] = ∂_a Γ^i_{jk}
    R = np.empty((n,) * 4, dtype=object)
    for i, j, k, l in itertools.product(range(n), repeat=4):
        if l < k:
            R[i, j, k, l] = -R[i, j, l, k]
            continue
        R[i, j, k, l] = dG[k, i, l, j] - dG[l, i, k, j] + _sum(
            G[i, k, a] * G[a, l, j] - G[i, l, a] * G[a, k, j] for a in range(n)
        )
    return Tensor(conn.coords, R, 1, 3)


def is_flat(conn: Connection) -> bool:
    return riemann(conn).is_zero()


def ricci(conn: Connection) -> np.ndarray:
    """``R_{jl} = R^k_{jkl}``."""
    R = riemann(conn).comps
    n = conn.n
    out = np.empty((n, n), dtype=object)
    for j, l in itertools.product(range(n), repeat=2):
        out[j, l] = _sum(R[k, j, k, l] for k in range(n))
    return out


def scalar_curvature(g: MetricField) -> RationalFunction:
    ric = ricci(levi_civita(g))
    ginv = g.inverse_matrix()
    return _sum(ginv[j, l] * ric[j, l] for j, l in itertools.product(range(g.n), repeat=2))


# --------------------------------------------------------------------------
# compatibility and equivalence


def lower_operator(g: MetricField, L: OperatorField) -> np.ndarray:
    """``(gL)_{ij} = g_{ia} L^a_j``."""
    return matmul(g.comps, L.comps)


def is_self_adjoint(g: MetricField, L: OperatorField) -> bool:
    gL = lower_operator(g, L)
    return all(gL[i, j] == gL[j, i] for i in range(g.n) for j in range(i))


@dataclass
class CompatResult:
    holds: bool
    residual: Tensor  # residual[i, j, k]: component (i, j) of RHS − LHS for η = ∂_k

    def at_direction(self, k: int) -> OperatorField:
        return OperatorField(self.residual.coords, self.residual.comps[:, :, k])


def geodesic_compat_check(g: MetricField, L: OperatorField) -> CompatResult:
    """Test ``∇_η L = ½(η ⊗ d tr L + (η ⊗ d tr L)*)`` for the Levi-Civita ``∇`` of ``g``.

    The adjoint ``*`` is taken with respect to ``g``.
    """
    if g.coords != L.coords:
        raise DimensionError("metric and operator live on different charts")
    if not is_self_adjoint(g, L):
        raise NotSelfAdjointError("L is not self-adjoint with respect to g")
    n = g.n
    conn = levi_civita(g)
    lhs = covariant_derivative(L, conn).comps  # [i, j, k] = (∇_k L)^i_j
    lam = OneForm.d(g.coords, L.trace()).comps
    ginv = g.inverse_matrix()
    lam_up = [_sum(ginv[i, a] * lam[a] for a in range(n)) for i in range(n)]
    half = Fraction(1, 2)
    res = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        rhs = (lam[j] if i == k else RationalFunction(0)) + lam_up[i] * g.comps[k, j]
        res[i, j, k] = rhs * half - lhs[i, j, k]
    residual = Tensor(g.coords, res, 1, 2)
    return CompatResult(residual.is_zero(), residual)


@dataclass
class EquivResult:
    equivalent: bool
    phi: OneForm
    residual: Tensor12
    phi_closed: bool


def connection_equiv_check(conn: Connection, conn_bar: Connection) -> EquivResult:
    """Whether ``Γ̄ − Γ = φ_k δ^i_j + φ_j δ^i_k`` for ``φ_j = (Γ̄ − Γ)^a_{aj}/(n+1)``."""
    n = conn.n
    D = conn_bar.gamma - conn.gamma
    phi = [_sum(D[a, a, j] for a in range(n)) * Fraction(1, n + 1) for j in range(n)]
    res = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        expect = (phi[k] if i == j else RationalFunction(0)) + (phi[j] if i == k else RationalFunction(0))
        res[i, j, k] = D[i, j, k] - expect
    residual = Tensor12(conn.coords, res)
    closed = all(phi[k].diff(conn.coords[j]) == phi[j].diff(conn.coords[k]) for j in range(n) for k in range(j))
    return EquivResult(residual.is_zero(), OneForm(conn.coords, phi), residual, closed)


def geodesic_equiv_check(g: MetricField, g_bar: MetricField) -> EquivResult:
    g.check_nondegenerate()
    g_bar.check_nondegenerate()
    return connection_equiv_check(levi_civita(g), levi_civita(g_bar))


def equivalent_partner(g: MetricField, L: OperatorField) -> MetricField:
    """``ḡ = (1/det L) g L^{-1}``; geodesically equivalent to ``g`` when (g, L) is compatible
    and det L > 0 on the chart."""
    gl = matmul(g.comps, inverse(L.comps))
    d = det(L.comps)
    comps = np.vectorize(lambda x: x / d, otypes=[object])(gl)
    return MetricField(g.coords, comps)


def projective_change(conn: Connection, phi: OneForm) -> Connection:
    """``Γ̄^i_{jk} = Γ^i_{jk} + φ_k δ^i_j + φ_j δ^i_k``."""
    n = conn.n
    G = conn.gamma.copy()
    for i, j, k in itertools.product(range(n), repeat=3):
        if i == j:
            G[i, j, k] = G[i, j, k] + phi.comps[k]
        if i == k:
            G[i, j, k] = G[i, j, k] + phi.comps[j]
    return Connection(conn.coords, G)


# --------------------------------------------------------------------------
# Killing-type equations and the metrisability operator


@dataclass
class CheckResult:
    holds: bool
    residual: Tensor

    def __bool__(self):
        return self.holds


def _sym_check(sigma: Tensor, antisym: bool):
    n = sigma.n
    for i in range(n):
        for j in range(i + 1):
            a, b = sigma.comps[i, j], sigma.comps[j, i]
            if antisym and a != -b:
                raise DimensionError("tensor is not antisymmetric")
            if not antisym and a != b:
                raise DimensionError("tensor is not symmetric")


def _as_covariant2(sigma, coords=None, weight=0) -> Tensor:
    if isinstance(sigma, Tensor):
        if sigma.valence != (0, 2):
            raise DimensionError(f"expected a (0,2) tensor, got valence {sigma.valence}")
        return Tensor(sigma.coords, sigma.comps, 0, 2, weight=weight)
    return Tensor(coords, sigma, 0, 2, weight=weight)


def killing_tensor_operator(sigma, conn: Connection, weight: int = 0) -> Tensor:
    """Full symmetrization ``σ_{(ij,k)}`` as a (0,3) tensor."""
    s = _as_covariant2(sigma, conn.coords, weight)
    _sym_check(s, antisym=False)
    D = covariant_derivative(s, conn).comps
    n = conn.n
    out = np.empty((n, n, n), dtype=object)
    third = Fraction(1, 3)
    for i, j, k in itertools.product(range(n), repeat=3):
        # σ symmetric, so the six permutations collapse to three
        out[i, j, k] = (D[i, j, k] + D[j, k, i] + D[k, i, j]) * third
    return Tensor(conn.coords, out, 0, 3, weight=weight)


def killing_check(sigma, conn: Connection, weight: int = 0) -> CheckResult:
    r = killing_tensor_operator(sigma, conn, weight)
    return CheckResult(r.is_zero(), r)


def killing_yano_operator(sigma, conn: Connection, weight: int = 0) -> Tensor:
    """``σ_{i(j,k)} = ½(σ_{ij,k} + σ_{ik,j})``."""
    s = _as_covariant2(sigma, conn.coords, weight)
    _sym_check(s, antisym=True)
    D = covariant_derivative(s, conn).comps
    n = conn.n
    out = np.empty((n, n, n), dtype=object)
    half = Fraction(1, 2)
    for i, j, k in itertools.product(range(n), repeat=3):
        out[i, j, k] = (D[i, j, k] + D[i, k, j]) * half
    return Tensor(conn.coords, out, 0, 3, weight=weight)


def killing_yano_check(sigma, conn: Connection, weight: int = 0) -> CheckResult:
    r = killing_yano_operator(sigma, conn, weight)
    return CheckResult(r.is_zero(), r)


def metrisability_operator(sigma: Tensor, conn: Connection) -> Tensor:
    """``σ^{ij}_{,k} − (σ^{is}_{,s} δ^j_k + σ^{js}_{,s} δ^i_k)/(n+1)`` for σ of weight −2."""
    if sigma.valence != (2, 0):
        raise DimensionError(f"expected a (2,0) tensor, got valence {sigma.valence}")
    if sigma.weight != -2:
        sigma = Tensor(sigma.coords, sigma.comps, 2, 0, weight=-2)
    _sym_check(sigma, antisym=False)
    n = conn.n
    D = covariant_derivative(sigma, conn).comps
    div = [_sum(D[i, s, s] for s in range(n)) for i in range(n)]
    f = Fraction(1, n + 1)
    out = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        corr = (div[i] if j == k else RationalFunction(0)) + (div[j] if i == k else RationalFunction(0))
        out[i, j, k] = D[i, j, k] - corr * f
    return Tensor(conn.coords, out, 2, 1, weight=-2)


def exact_root(f: RationalFunction, k: int) -> RationalFunction:
    """The rational function ``r`` with ``r^k = f`` (positive leading coefficient), if one exists."""
    f = rf(f)
    if f.is_zero():
        return f
    parts = []
    for poly in (f.num, f.den):
        c, factors = poly.factor()
        root_c = _rational_root(Fraction(int(c.p), int(c.q)), k)
        if root_c is None:
            raise NotAPerfectPowerError(f"{f} is not a perfect {k}-th power")
        acc = RationalFunction(root_c)
        for g, e in factors:
            if int(e) % k:
                raise NotAPerfectPowerError(f"{f} is not a perfect {k}-th power")
            acc = acc * RationalFunction._make(g, g.context().constant(1)) ** (int(e) // k)
        parts.append(acc)
    return parts[0] / parts[1]


def _iroot(m: int, k: int) -> int | None:
    if m < 0:
        return None
    r = round(m ** (1.0 / k)) if m else 0
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**k == m:
            return cand
    lo, hi = 0, m + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if mid**k < m:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo**k == m else None


def _rational_root(q: Fraction, k: int) -> Fraction | None:
    sign = 1
    if q < 0:
        if k % 2 == 0:
            return None
        sign, q = -1, -q
    a, b = _iroot(q.numerator, k), _iroot(q.denominator, k)
    if a is None or b is None:
        return None
    return sign * Fraction(a, b)


def sigma_from_metric(g: MetricField, sign: int = 1) -> Tensor:
    """``σ^{ij} = g^{ij} |det g|^{1/(n+1)}`` as a weight −2 tensor.

    ``sign`` is the sign of ``det g`` on the chart; the root must be rational.
    """
    n = g.n
    root = exact_root(g.det() * sign, n + 1)
    ginv = g.inverse_matrix()
    comps = np.vectorize(lambda x: x * root, otypes=[object])(ginv)
    return Tensor(g.coords, comps, 2, 0, weight=-2)


def metric_from_sigma(sigma: Tensor, sign: int = 1) -> MetricField:
    """Invert the previous map: ``g^{ij} = |det σ| σ^{ij}``."""
    d = det(sigma.comps) * sign
    if d.is_zero():
        raise DegenerateMetricError("sigma is degenerate")
    upper = np.vectorize(lambda x: x * d, otypes=[object])(sigma.comps)
    return MetricField(sigma.coords, inverse(upper))


def sigma_from_pair(g: MetricField, L: OperatorField, sign: int = 1) -> Tensor:
    """``σ̄ = L g^{-1} |det g|^{1/(n+1)}``, a second metrisability solution built from a compatible pair."""
    base = sigma_from_metric(g, sign)
    return Tensor(g.coords, matmul(L.comps, base.comps), 2, 0, weight=-2)
