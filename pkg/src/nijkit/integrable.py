"""Quadratic integrals on the cotangent bundle and conservation laws of operators."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import AlgebraError, DimensionError, RationalFunction, faddeev_leverrier, rank_q, rf, solve_overdetermined
from .geometry import geodesic_compat_check
from .tensors import MetricField, OneForm, OperatorField, _sum, apply_poly, fresh_symbol, matmul, point_dict


class NotExactError(AlgebraError):
    """A closed form whose primitive leaves the class of rational functions."""


def momentum_names(coords) -> tuple[str, ...]:
    names = []
    for i in range(1, len(coords) + 1):
        names.append(fresh_symbol(coords, f"p{i}"))
    return tuple(names)


@dataclass(frozen=True)
class PhaseFunction:
    """Function of positions ``coords`` and momenta ``momenta``."""

    expr: RationalFunction
    coords: tuple[str, ...]
    momenta: tuple[str, ...]

    @classmethod
    def of(cls, expr, coords, momenta=None) -> "PhaseFunction":
        coords = tuple(coords)
        return cls(rf(expr), coords, tuple(momenta) if momenta else momentum_names(coords))

    def _same(self, other: "PhaseFunction"):
        if (self.coords, self.momenta) != (other.coords, other.momenta):
            raise DimensionError("phase functions live on different phase spaces")

    def __add__(self, other):
        if isinstance(other, PhaseFunction):
            self._same(other)
            other = other.expr
        return PhaseFunction(self.expr + other, self.coords, self.momenta)

    def __sub__(self, other):
        if isinstance(other, PhaseFunction):
            self._same(other)
            other = other.expr
        return PhaseFunction(self.expr - other, self.coords, self.momenta)

    def __mul__(self, other):
        if isinstance(other, PhaseFunction):
            self._same(other)
            other = other.expr
        return PhaseFunction(self.expr * other, self.coords, self.momenta)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, PhaseFunction):
            return self.expr == other.expr
        return self.expr == rf(other)

    def __hash__(self):
        return hash(self.expr)

    def is_zero(self) -> bool:
        return self.expr.is_zero()

    def momentum_degree(self) -> int:
        num = max((sum(m.get(p, 0) for p in self.momenta) for m, _ in self.expr.numerator().terms()), default=0)
        return num

    def quadratic_form(self) -> np.ndarray:
        """Symmetric ``K`` with ``expr = pᵀ K p`` (for quadratic-in-momenta functions)."""
        n = len(self.momenta)
        K = np.empty((n, n), dtype=object)
        for i, j in itertools.product(range(n), repeat=2):
            c = self.expr.diff(self.momenta[i]).diff(self.momenta[j]) * Fraction(1, 2)
            K[i, j] = c
        return K

    def __str__(self):
        return str(self.expr)


def canonical_bracket(F: PhaseFunction, G: PhaseFunction) -> PhaseFunction:
    """``{F,G} = Σ_i (∂F/∂p_i ∂G/∂x_i − ∂F/∂x_i ∂G/∂p_i)``, so ``{x1, p1} = −1``."""
    F._same(G)
    acc = RationalFunction(0)
    for x, p in zip(F.coords, F.momenta):
        acc = acc + F.expr.diff(p) * G.expr.diff(x) - F.expr.diff(x) * G.expr.diff(p)
    return PhaseFunction(acc, F.coords, F.momenta)


def quadratic(K: np.ndarray, coords, momenta=None) -> PhaseFunction:
    """``pᵀ K p``."""
    coords = tuple(coords)
    momenta = tuple(momenta) if momenta else momentum_names(coords)
    ps = [RationalFunction.var(p) for p in momenta]
    n = len(coords)
    expr = _sum(K[i, j] * ps[i] * ps[j] for i in range(n) for j in range(n))
    return PhaseFunction(expr, coords, momenta)


def benenti_integrals(g: MetricField, L: OperatorField, check: bool = True) -> list[PhaseFunction]:
    """Coefficients of ``I_t = pᵀ adj(t Id − L) g^{-1} p = Σ_k I_k t^{n−1−k}``.

    ``I_0`` is the kinetic form ``pᵀ g^{-1} p``.  With ``check`` the pair must be
    geodesically compatible.
    """
    if check and not geodesic_compat_check(g, L).holds:
        raise AlgebraError("(g, L) is not geodesically compatible")
    ginv = g.inverse_matrix()
    _, B = faddeev_leverrier(L.comps)
    return [quadratic(matmul(Bk, ginv), g.coords) for Bk in B]


def commutation_matrix(integrals) -> dict[tuple[int, int], PhaseFunction]:
    out = {}
    for i, j in itertools.combinations(range(len(integrals)), 2):
        out[(i, j)] = canonical_bracket(integrals[i], integrals[j])
    return out


def in_involution(integrals) -> bool:
    return all(v.is_zero() for v in commutation_matrix(integrals).values())


def independence_rank(integrals, point) -> int:
    """Rank of the Jacobian of the integrals in (x, p) at a rational phase-space point."""
    F = integrals[0]
    names = F.coords + F.momenta
    if isinstance(point, dict):
        p = {k: Fraction(v) for k, v in point.items()}
    else:
        p = {k: Fraction(v) for k, v in zip(names, point)}
    rows = [[I.expr.diff(v).evaluate(p) for v in names] for I in integrals]
    return rank_q(rows)


# --------------------------------------------------------------------------
# conservation laws


def exterior_derivative(alpha: OneForm) -> np.ndarray:
    """``(dα)_{jk} = ∂_j α_k − ∂_k α_j``."""
    n = alpha.n
    out = np.empty((n, n), dtype=object)
    for j, k in itertools.product(range(n), repeat=2):
        out[j, k] = alpha.comps[k].diff(alpha.coords[j]) - alpha.comps[j].diff(alpha.coords[k])
    return out


@dataclass
class ConservationResult:
    holds: bool
    form: OneForm  # L* df
    residual: np.ndarray  # d(L* df)

    def __bool__(self):
        return self.holds


def conservation_check(L: OperatorField, f) -> ConservationResult:
    alpha = L.transpose_act(OneForm.d(L.coords, f))
    res = exterior_derivative(alpha)
    return ConservationResult(all(x.is_zero() for x in res.flat), alpha, res)


def _poly_in(expr: RationalFunction, x: str) -> list[RationalFunction]:
    """Ascending coefficients in ``x`` of a polynomial numerator."""
    coeffs = expr.coefficients(x)
    top = max(coeffs, default=0)
    return [coeffs.get(k, RationalFunction(0)) for k in range(top + 1)]


def _from_coeffs(cs, xv: RationalFunction) -> RationalFunction:
    acc = RationalFunction(0)
    for c in reversed(cs):
        acc = acc * xv + c
    return acc


def _divmod(P: list, Q: list):
    P = list(P)
    while len(P) > 1 and P[-1].is_zero():
        P.pop()
    dq = len(Q) - 1
    if len(P) - 1 < dq:
        return [RationalFunction(0)], P
    quo = [RationalFunction(0)] * (len(P) - dq)
    for k in range(len(P) - 1 - dq, -1, -1):
        c = P[k + dq] / Q[dq]
        quo[k] = c
        for i in range(dq + 1):
            P[k + i] = P[k + i] - c * Q[i]
    return quo, P[:dq] if dq else [RationalFunction(0)]


def integrate(expr, x: str) -> RationalFunction:
    """A rational primitive in ``x`` (other symbols are parameters).

    Uses polynomial division and Ostrogradsky's reduction; raises NotExactError
    if a logarithmic part remains.
    """
    expr = rf(expr)
    xv = RationalFunction.var(x)
    num, den = expr.numerator(), expr.denominator()
    if x not in den.variables:
        cs = _poly_in(num, x)
        return _sum(c / den * xv ** (k + 1) * Fraction(1, k + 1) for k, c in enumerate(cs))
    P, Q = _poly_in(num, x), _poly_in(den, x)
    quo, R = _divmod(P, Q)
    poly_part = _sum(c * xv ** (k + 1) * Fraction(1, k + 1) for k, c in enumerate(quo))
    # Ostrogradsky: ∫R/Q = A/Q1 + ∫B/Q2 with Q1 = gcd(Q, Q'), Q2 = Q/Q1
    dQ = den.diff(x)
    g = den.num.gcd(dQ.num)
    Q1 = RationalFunction._make(g, g.context().constant(1))
    Q2 = den / Q1
    T = Q2 * Q1.diff(x) / Q1
    d1, d2 = Q1.degree(x), Q2.degree(x)
    Rexpr = _from_coeffs(R, xv)
    # unknowns a_0..a_{d1-1}, b_0..b_{d2-1}
    basis = []
    for k in range(d1):
        a = xv**k
        basis.append(a.diff(x) * Q2 - a * T)
    for k in range(d2):
        basis.append(xv**k * Q1)
    deg = max([Rexpr.degree(x)] + [b.degree(x) for b in basis] + [0])
    cols = [_poly_in(b, x) + [RationalFunction(0)] * (deg + 1 - len(_poly_in(b, x))) for b in basis]
    rhs = _poly_in(Rexpr, x) + [RationalFunction(0)] * (deg + 1 - len(_poly_in(Rexpr, x)))
    A = np.empty((deg + 1, len(basis)), dtype=object)
    for r in range(deg + 1):
        for c in range(len(basis)):
            A[r, c] = cols[c][r]
    sol = solve_overdetermined(A, np.array(rhs, dtype=object))
    a, b = sol[:d1], sol[d1:]
    if any(not bi.is_zero() for bi in b):
        raise NotExactError(f"integral of {expr} in {x} is not exact in the rational class")
    rational_part = _from_coeffs(list(a), xv) / Q1 if d1 else RationalFunction(0)
    return poly_part + rational_part


def primitive(alpha: OneForm) -> RationalFunction:
    """``f`` with ``df = α`` for a closed rational 1-form (Poincaré construction)."""
    coords = alpha.coords
    f = RationalFunction(0)
    rest = list(alpha.comps)
    for i, x in enumerate(coords):
        if rest[i].is_zero():
            continue
        fi = integrate(rest[i], x)
        f = f + fi
        rest = [r - fi.diff(c) for r, c in zip(rest, coords)]
    if any(not r.is_zero() for r in rest):
        raise AlgebraError("form is not closed")
    return f


@dataclass
class ConservationHierarchy:
    L: OperatorField
    laws: list[RationalFunction] = field(default_factory=list)

    def verify(self) -> bool:
        for a, b in zip(self.laws, self.laws[1:]):
            if self.L.transpose_act(OneForm.d(self.L.coords, a)) != OneForm.d(self.L.coords, b):
                return False
        return all(conservation_check(self.L, f).holds for f in self.laws)


def hierarchy(L: OperatorField, f1, k: int) -> ConservationHierarchy:
    """``f_1..f_k`` with ``df_{j+1} = L* df_j``."""
    laws = [rf(f1)]
    for _ in range(k - 1):
        res = conservation_check(L, laws[-1])
        if not res.holds:
            raise AlgebraError(f"L* d({laws[-1]}) is not closed")
        laws.append(primitive(res.form))
    h = ConservationHierarchy(L, laws)
    if not h.verify():
        raise AlgebraError("hierarchy verification failed")
    return h


def trace_laws(L: OperatorField, F) -> tuple[RationalFunction, ConservationResult]:
    """``f = tr F(L)`` together with its conservation check."""
    f = apply_poly(L, F).trace()
    return f, conservation_check(L, f)


def is_regular_law_set(laws, coords, point) -> bool:
    """``df_1 ∧ … ∧ df_n ≠ 0`` at a rational point."""
    p = point_dict(coords, point)
    rows = [[rf(f).diff(c).evaluate(p) for c in coords] for f in laws]
    return rank_q(rows) == len(coords)
