"""Differential polynomials on a jet space, densities and local Poisson brackets.

Jet symbols of a field coordinate ``u`` are ``u_x``, ``u_x2``, ``u_x3``, …
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .algebra import AlgebraError, DimensionError, RationalFunction, det, inverse, rf
from .geometry import Connection, killing_check, killing_yano_check
from .tensors import Tensor

_JET = re.compile(r"^(?P<base>.+)_x(?P<order>[2-9]|[1-9][0-9]+)?$")


class InvalidBracketError(AlgebraError, ValueError):
    pass


class JetSpace:
    """Jet variables over field coordinates ``coords``."""

    def __init__(self, coords: Sequence[str]):
        self.coords = tuple(coords)
        self._index = {c: i for i, c in enumerate(self.coords)}

    @property
    def n(self) -> int:
        return len(self.coords)

    def jet_name(self, i: int, k: int) -> str:
        c = self.coords[i]
        if k == 0:
            return c
        return f"{c}_x" if k == 1 else f"{c}_x{k}"

    def jet(self, i: int, k: int) -> RationalFunction:
        return RationalFunction.var(self.jet_name(i, k))

    def classify(self, name: str) -> tuple[int, int] | None:
        """``(i, k)`` for the k-th jet of coordinate i, or None for a parameter."""
        if name in self._index:
            return self._index[name], 0
        m = _JET.match(name)
        if m and m.group("base") in self._index:
            return self._index[m.group("base")], int(m.group("order") or 1)
        return None

    def D(self, H, times: int = 1) -> RationalFunction:
        """Total x-derivative."""
        H = rf(H)
        for _ in range(times):
            acc = RationalFunction(0)
            for v in H.variables:
                ik = self.classify(v)
                if ik is None:
                    continue
                acc = acc + H.diff(v) * self.jet(ik[0], ik[1] + 1)
            H = acc
        return H

    def order(self, H) -> int:
        """Highest jet order present (0 if only coordinates)."""
        ks = [self.classify(v) for v in rf(H).variables]
        return max((ik[1] for ik in ks if ik), default=0)

    def delta(self, H) -> list[RationalFunction]:
        """``δH/δu^i = Σ_k (−D)^k ∂H/∂u^i_{x^k}``."""
        H = rf(H)
        K = self.order(H)
        out = []
        for i in range(self.n):
            acc = RationalFunction(0)
            for k in range(K + 1):
                part = H.diff(self.jet_name(i, k))
                if part.is_zero():
                    continue
                term = self.D(part, k)
                acc = acc + term if k % 2 == 0 else acc - term
            out.append(acc)
        return out

    def is_total_derivative(self, H) -> bool:
        return all(d.is_zero() for d in self.delta(H))

    def differential_degree(self, H) -> int:
        """Max over numerator monomials of Σ k·(exponent of k-th jets)."""
        H = rf(H)
        best = 0
        for mono, _ in H.numerator().terms():
            w = 0
            for v, e in mono.items():
                ik = self.classify(v)
                if ik:
                    w += ik[1] * e
            best = max(best, w)
        return best

    def along_curve(self, H, curve: dict, x: str = "x") -> RationalFunction:
        """Substitute ``u^i = c^i(x)`` and jets by x-derivatives of the curve."""
        H = rf(H)
        sub = {}
        for v in H.variables:
            ik = self.classify(v)
            if ik is None:
                continue
            c = rf(curve[self.coords[ik[0]]])
            for _ in range(ik[1]):
                c = c.diff(x)
            sub[v] = c
        return H.subs(sub)

    def density(self, H) -> "Density":
        return Density(self, rf(H))


@dataclass(frozen=True)
class Density:
    """Class of a differential polynomial modulo total derivatives."""

    space: JetSpace
    expr: RationalFunction

    def __eq__(self, other):
        if isinstance(other, Density):
            other = other.expr
        return self.space.is_total_derivative(self.expr - rf(other))

    __hash__ = None

    def __add__(self, other):
        return Density(self.space, self.expr + (other.expr if isinstance(other, Density) else rf(other)))

    def __sub__(self, other):
        return Density(self.space, self.expr - (other.expr if isinstance(other, Density) else rf(other)))

    def __neg__(self):
        return Density(self.space, -self.expr)

    def scale(self, c):
        return Density(self.space, self.expr * rf(c))

    def is_zero(self) -> bool:
        return self.space.is_total_derivative(self.expr)

    def delta(self) -> list[RationalFunction]:
        return self.space.delta(self.expr)

    def __str__(self):
        return str(self.expr)


# --------------------------------------------------------------------------
# brackets


def _as_density(space: JetSpace, H) -> Density:
    return H if isinstance(H, Density) else Density(space, rf(H))


def operator_bracket(space: JetSpace, op: Callable[[list], list], H, F) -> Density:
    """``Σ_i δH_i · op(δF)_i``."""
    H, F = _as_density(space, H), _as_density(space, F)
    dH = H.delta()
    image = op(F.delta())
    acc = RationalFunction(0)
    for a, b in zip(dH, image):
        if not a.is_zero() and not b.is_zero():
            acc = acc + a * b
    return Density(space, acc)


def raw_bracket(space: JetSpace, terms: Sequence[tuple], H, F) -> Density:
    """General evaluator ``Σ_terms δH_i A^{ij} D^p δF_j`` for ``terms = [(A, p), …]``.

    ``A`` may contain jet variables.  No validity conditions are imposed.
    """
    n = space.n
    mats = [(np.asarray(A, dtype=object), int(p)) for A, p in terms]

    def op(dF):
        out = [RationalFunction(0)] * n
        for A, p in mats:
            Dp = [space.D(f, p) for f in dF]
            for i in range(n):
                out[i] = out[i] + _row_dot(A[i], Dp)
        return out

    return operator_bracket(space, op, H, F)


def _row_dot(row, vec) -> RationalFunction:
    acc = RationalFunction(0)
    for a, v in zip(row, vec):
        a = rf(a)
        if not a.is_zero() and not v.is_zero():
            acc = acc + a * v
    return acc


@dataclass
class BracketSpec:
    """Geometric Poisson bracket data in flat coordinates.

    ``g`` is ``g^{ij}``; ``c[i][j][r]`` is ``c^{ij}_r`` (order 3 only).
    """

    order: int
    coords: tuple[str, ...]
    g: np.ndarray
    c: np.ndarray | None = None
    space: JetSpace = field(init=False)

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise InvalidBracketError("order must be 1, 2 or 3")
        self.coords = tuple(self.coords)
        n = len(self.coords)
        g = np.empty((n, n), dtype=object)
        src = np.asarray(self.g, dtype=object)
        if src.shape != (n, n):
            raise DimensionError(f"g must be {n}x{n}")
        for idx in np.ndindex(n, n):
            g[idx] = rf(src[idx])
        self.g = g
        c = np.empty((n, n, n), dtype=object)
        if self.c is None:
            for idx in np.ndindex(n, n, n):
                c[idx] = RationalFunction(0)
        else:
            csrc = np.asarray(self.c, dtype=object)
            if csrc.shape != (n, n, n):
                raise DimensionError(f"c must have shape ({n}, {n}, {n})")
            for idx in np.ndindex(n, n, n):
                c[idx] = rf(csrc[idx])
        self.c = c
        self.space = JetSpace(self.coords)

    def validate(self):
        """Raise InvalidBracketError if the geometric conditions fail."""
        n = len(self.coords)
        g = self.g
        if det(g).is_zero():
            raise InvalidBracketError("g is singular")
        sym = all(g[i, j] == g[j, i] for i in range(n) for j in range(i))
        skew = all(g[i, j] == -g[j, i] for i in range(n) for j in range(i + 1))
        flat = Connection.flat(self.coords)
        if self.order == 1:
            if not sym or not all(x.is_constant() for x in g.flat):
                raise InvalidBracketError("order 1 requires a constant symmetric g")
        elif self.order == 2:
            if not skew:
                raise InvalidBracketError("order 2 requires a skew-symmetric g")
            if not killing_yano_check(Tensor(self.coords, inverse(g), 0, 2), flat).holds:
                raise InvalidBracketError("inverse of g is not a Killing-Yano tensor")
        else:
            if not sym:
                raise InvalidBracketError("order 3 requires a symmetric g")
            if not killing_check(Tensor(self.coords, inverse(g), 0, 2), flat).holds:
                raise InvalidBracketError("inverse of g is not a Killing tensor")
        if self.order != 3 and any(not x.is_zero() for x in self.c.flat):
            raise InvalidBracketError("c is only used at order 3")

    def operator(self) -> Callable[[list], list]:
        sp = self.space
        n = len(self.coords)
        g, c = self.g, self.c
        ux = [sp.jet(r, 1) for r in range(n)]

        def gdot(vec):
            return [_row_dot(g[i], vec) for i in range(n)]

        if self.order == 1:
            return lambda dF: gdot([sp.D(f) for f in dF])
        if self.order == 2:
            return lambda dF: [sp.D(v) for v in gdot([sp.D(f) for f in dF])]

        cu = np.empty((n, n), dtype=object)  # c^{ij}_r u^r_x
        for i, j in itertools.product(range(n), repeat=2):
            cu[i, j] = _row_dot(c[i, j], ux)

        def op3(dF):
            d1 = [sp.D(f) for f in dF]
            d2 = [sp.D(f) for f in d1]
            inner = [_row_dot(g[i], d2) + _row_dot(cu[i], d1) for i in range(n)]
            return [sp.D(v) for v in inner]

        return op3


def bracket(spec: BracketSpec, H, F, validate: bool = True) -> Density:
    """Order 1: ``δH g D δF``; order 2: ``δH D g D δF``; order 3: ``δH D(g D + c u_x) D δF``."""
    if validate:
        spec.validate()
    return operator_bracket(spec.space, spec.operator(), H, F)


def skew_residuals(spec: BracketSpec, samples) -> list[tuple[int, int, list]]:
    sp = spec.space
    out = []
    for a, b in itertools.combinations_with_replacement(range(len(samples)), 2):
        s = bracket(spec, samples[a], samples[b], validate=False) + bracket(spec, samples[b], samples[a], validate=False)
        d = s.delta()
        if any(not x.is_zero() for x in d):
            out.append((a, b, d))
    return out


def skew_check(spec: BracketSpec, samples) -> bool:
    """``δ({H,F} + {F,H}) ≡ 0`` for all sampled pairs."""
    return not skew_residuals(spec, samples)


def jacobi_residual(spec: BracketSpec, H, F, G) -> list[RationalFunction]:
    b = lambda X, Y: bracket(spec, X, Y, validate=False)
    total = b(H, b(F, G)) + b(F, b(G, H)) + b(G, b(H, F))
    return total.delta()


def jacobi_check(spec: BracketSpec, triples) -> bool:
    """``δ({H,{F,G}} + {F,{G,H}} + {G,{H,F}}) ≡ 0`` for every sampled triple."""
    return all(all(x.is_zero() for x in jacobi_residual(spec, *t)) for t in triples)


def first_jacobi_failure(spec: BracketSpec, triples):
    for t in triples:
        r = jacobi_residual(spec, *t)
        if any(not x.is_zero() for x in r):
            return t, r
    return None


# --------------------------------------------------------------------------
# sampling corpus


def monomial_densities(space: JetSpace, max_diff_degree: int = 4, max_u_degree: int = 2) -> list[RationalFunction]:
    """Monomials in ``u`` (degree ≤ max_u_degree) times jet monomials of differential degree ≤ max_diff_degree."""
    n = space.n
    u_monos = [RationalFunction(1)]
    for d in range(1, max_u_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            m = RationalFunction(1)
            for i in combo:
                m = m * space.jet(i, 0)
            u_monos.append(m)
    jets = [(i, k) for k in range(1, max_diff_degree + 1) for i in range(n)]
    jet_monos = [(RationalFunction(1), 0)]

    def grow(start, cur, weight):
        for idx in range(start, len(jets)):
            i, k = jets[idx]
            w = weight + k
            if w > max_diff_degree:
                continue
            m = cur * space.jet(i, k)
            jet_monos.append((m, w))
            grow(idx, m, w)

    grow(0, RationalFunction(1), 0)
    out = []
    for um in u_monos:
        for jm, _ in jet_monos:
            out.append(um * jm)
    return out


def random_densities(space: JetSpace, count: int, seed: int, max_diff_degree: int = 2, max_u_degree: int = 2, terms: int = 3):
    """Random rational-coefficient combinations of monomial densities."""
    rng = random.Random(seed)
    basis = monomial_densities(space, max_diff_degree, max_u_degree)
    out = []
    for _ in range(count):
        acc = RationalFunction(0)
        for m in rng.sample(basis, min(terms, len(basis))):
            acc = acc + m * Fraction(rng.randint(-5, 5) or 1, rng.randint(1, 4))
        out.append(acc)
    return out


def sample_triples(samples, count: int, seed: int):
    rng = random.Random(seed)
    return [tuple(rng.sample(list(samples), 3)) for _ in range(count)]
