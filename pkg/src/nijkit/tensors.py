"""Coordinate tensor calculus over exact rational functions.

Components are stored in numpy object arrays with contravariant indices first,
then covariant ones.  ``OperatorField`` is a (1,1) tensor ``L[i, j] = L^i_j``,
``Tensor12`` holds ``T[i, j, k] = T^i_{jk}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .algebra import (
    AlgebraError,
    DimensionError,
    PoleError,
    RationalFunction,
    det,
    faddeev_leverrier,
    identity,
    inverse,
    rank_q,
    rf,
)


class NonCommutingError(AlgebraError):
    """The pair of operators does not commute, so the bracket is undefined."""


class DegenerateMetricError(AlgebraError):
    pass


def fresh_symbol(coords: Sequence[str], base: str = "t") -> str:
    name = base
    while name in coords:
        name += "_"
    return name


def to_array(comps, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Nested sequences or arrays of numbers/strings/RationalFunctions as an object array."""
    if isinstance(comps, np.ndarray) and comps.dtype == object:
        raw = comps
    else:
        raw = np.empty(np.shape(comps) if not isinstance(comps, np.ndarray) else comps.shape, dtype=object)
        src = np.asarray(comps, dtype=object) if not isinstance(comps, np.ndarray) else comps.astype(object)
        raw[...] = src
    out = np.empty(raw.shape, dtype=object)
    for idx in np.ndindex(raw.shape):
        out[idx] = rf(raw[idx])
    if shape is not None and out.shape != shape:
        raise DimensionError(f"expected components of shape {shape}, got {out.shape}")
    return out


def point_dict(coords: Sequence[str], p) -> dict[str, Fraction]:
    if isinstance(p, Mapping):
        return {k: Fraction(v) for k, v in p.items()}
    p = list(p)
    if len(p) != len(coords):
        raise DimensionError(f"point has {len(p)} coordinates, expected {len(coords)}")
    return {c: Fraction(v) for c, v in zip(coords, p)}


def grad(coords: Sequence[str], arr: np.ndarray) -> np.ndarray:
    """``out[a, ...] = ∂_a arr[...]``."""
    out = np.empty((len(coords),) + arr.shape, dtype=object)
    for a, c in enumerate(coords):
        for idx in np.ndindex(arr.shape):
            out[(a,) + idx] = arr[idx].diff(c)
    return out


def jacobian(funcs: Sequence[RationalFunction], coords: Sequence[str]) -> np.ndarray:
    """``J[i, j] = ∂ f_i / ∂ x_j``."""
    J = np.empty((len(funcs), len(coords)), dtype=object)
    for i, f in enumerate(funcs):
        for j, c in enumerate(coords):
            J[i, j] = rf(f).diff(c)
    return J


def _sum(terms) -> RationalFunction:
    acc = RationalFunction(0)
    for t in terms:
        acc = acc + t
    return acc


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.empty((A.shape[0], B.shape[1]), dtype=object)
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            out[i, j] = _sum(A[i, k] * B[k, j] for k in range(A.shape[1]))
    return out


def matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty(A.shape[0], dtype=object)
    for i in range(A.shape[0]):
        out[i] = _sum(A[i, k] * v[k] for k in range(len(v)))
    return out


def _zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(shape):
        out[idx] = RationalFunction(0)
    return out


class Tensor:
    """Tensor field with ``up`` contravariant and ``down`` covariant indices.

    ``weight`` is the projective weight relative to the coordinate volume form.
    """

    up = None
    down = None

    def __init__(self, coords, comps, up: int | None = None, down: int | None = None, weight: int = 0):
        self.coords = tuple(coords)
        n = len(self.coords)
        if up is None:
            up = type(self).up
        if down is None:
            down = type(self).down
        if up is None or down is None:
            raise TypeError("valence must be given for a generic Tensor")
        self.valence = (up, down)
        self.weight = weight
        self.comps = to_array(comps, (n,) * (up + down))
        self._validate()

    def _validate(self):
        pass

    @property
    def n(self) -> int:
        return len(self.coords)

    def _like(self, comps):
        if type(self) is Tensor:
            return Tensor(self.coords, comps, *self.valence, weight=self.weight)
        return type(self)(self.coords, comps)

    @classmethod
    def zeros(cls, coords, up=None, down=None, weight=0):
        up = cls.up if up is None else up
        down = cls.down if down is None else down
        arr = _zeros((len(coords),) * (up + down))
        if cls is Tensor:
            return Tensor(coords, arr, up, down, weight)
        return cls(coords, arr)

    def __getitem__(self, idx):
        return self.comps[idx]

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.coords == other.coords
            and self.valence == other.valence
            and all(a == b for a, b in zip(self.comps.flat, other.comps.flat))
        )

    __hash__ = None

    def __add__(self, other):
        return self._like(self.comps + other.comps)

    def __sub__(self, other):
        return self._like(self.comps - other.comps)

    def __neg__(self):
        return self._like(-self.comps)

    def scale(self, c):
        c = rf(c)
        return self._like(np.vectorize(lambda x: c * x, otypes=[object])(self.comps))

    def is_zero(self) -> bool:
        return all(x.is_zero() for x in self.comps.flat)

    def nonzero(self) -> dict[tuple[int, ...], RationalFunction]:
        return {idx: self.comps[idx] for idx in np.ndindex(self.comps.shape) if not self.comps[idx].is_zero()}

    def at(self, point) -> np.ndarray:
        p = point_dict(self.coords, point)
        out = np.empty(self.comps.shape, dtype=object)
        for idx in np.ndindex(self.comps.shape):
            out[idx] = self.comps[idx].evaluate(p)
        return out

    def partial(self) -> np.ndarray:
        return grad(self.coords, self.comps)

    def tolist(self):
        return self.comps.tolist()

    def __repr__(self):
        return f"{type(self).__name__}({self.coords}, {_fmt(self.comps)})"

    __str__ = __repr__


def _fmt(arr):
    if isinstance(arr, np.ndarray):
        return "[" + ", ".join(_fmt(a) for a in arr) + "]"
    return str(arr)


class OperatorField(Tensor):
    up, down = 1, 1

    def matrix(self) -> np.ndarray:
        return self.comps

    def __matmul__(self, other: "OperatorField") -> "OperatorField":
        return OperatorField(self.coords, matmul(self.comps, other.comps))

    def commutes_with(self, other: "OperatorField") -> bool:
        return (self @ other) == (other @ self)

    def trace(self) -> RationalFunction:
        return _sum(self.comps[i, i] for i in range(self.n))

    def det(self) -> RationalFunction:
        return det(self.comps)

    def inverse(self) -> "OperatorField":
        return OperatorField(self.coords, inverse(self.comps))

    def transpose_act(self, alpha: "OneForm") -> "OneForm":
        """``(L* α)_j = L^i_j α_i``."""
        return OneForm(self.coords, [_sum(self.comps[i, j] * alpha.comps[i] for i in range(self.n)) for j in range(self.n)])

    def act(self, v: "VectorField") -> "VectorField":
        return VectorField(self.coords, matvec(self.comps, v.comps))

    @classmethod
    def identity(cls, coords):
        return cls(coords, identity(len(coords)))


class MetricField(Tensor):
    """Symmetric nondegenerate (0,2) tensor ``g[i, j] = g_{ij}``."""

    up, down = 0, 2

    def _validate(self):
        n = self.n
        for i in range(n):
            for j in range(i):
                if self.comps[i, j] != self.comps[j, i]:
                    raise DimensionError(f"metric is not symmetric at ({i}, {j})")

    def det(self) -> RationalFunction:
        return det(self.comps)

    def check_nondegenerate(self):
        if self.det().is_zero():
            raise DegenerateMetricError("metric determinant vanishes identically")

    def inverse_matrix(self) -> np.ndarray:
        self.check_nondegenerate()
        return inverse(self.comps)


class VectorField(Tensor):
    up, down = 1, 0


class OneForm(Tensor):
    up, down = 0, 1

    @classmethod
    def d(cls, coords, f) -> "OneForm":
        f = rf(f)
        return cls(coords, [f.diff(c) for c in coords])


class Tensor12(Tensor):
    up, down = 1, 2

    def symmetric_part(self) -> "Tensor12":
        n = self.n
        half = Fraction(1, 2)
        comps = [[[(self.comps[i, j, k] + self.comps[i, k, j]) * half for k in range(n)] for j in range(n)] for i in range(n)]
        return Tensor12(self.coords, comps)

    def is_antisymmetric(self) -> bool:
        n = self.n
        return all(self.comps[i, j, k] == -self.comps[i, k, j] for i, j, k in itertools.product(range(n), repeat=3))


# --------------------------------------------------------------------------
# torsion and brackets


def nijenhuis_torsion(L: OperatorField) -> Tensor12:
    """``N^i_{jk} = L^a_j ∂_a L^i_k − L^a_k ∂_a L^i_j + L^i_a ∂_k L^a_j − L^i_a ∂_j L^a_k``."""
    n = L.n
    A = L.comps
    dA = L.partial()  # dA[a, i, j] = ∂_a L^i_j
    N = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        if k < j:
            N[i, j, k] = -N[i, k, j]
            continue
        N[i, j, k] = _sum(
            A[a, j] * dA[a, i, k] - A[a, k] * dA[a, i, j] + A[i, a] * dA[k, a, j] - A[i, a] * dA[j, a, k]
            for a in range(n)
        )
    return Tensor12(L.coords, N)


def is_nijenhuis(L: OperatorField) -> bool:
    return nijenhuis_torsion(L).is_zero()


def nijenhuis_bracket(L: OperatorField, M: OperatorField, check: bool = True) -> Tensor12:
    """``<L,M>^i_{jk} = −M^i_a ∂_k L^a_j + L^i_a ∂_j M^a_k − L^a_j ∂_a M^i_k + M^a_k ∂_a L^i_j``.

    With this convention ``<L,L> = −N_L``.
    """
    if L.coords != M.coords:
        raise DimensionError("operators live on different coordinate charts")
    if check and not L.commutes_with(M):
        raise NonCommutingError("LM != ML; the bracket is only defined for commuting operators")
    n = L.n
    A, B = L.comps, M.comps
    dA, dB = L.partial(), M.partial()
    T = np.empty((n, n, n), dtype=object)
    for i, j, k in itertools.product(range(n), repeat=3):
        T[i, j, k] = _sum(
            -B[i, a] * dA[k, a, j] + A[i, a] * dB[j, a, k] - A[a, j] * dB[a, i, k] + B[a, k] * dA[a, i, j]
            for a in range(n)
        )
    return Tensor12(L.coords, T)


def is_symmetry(L: OperatorField, M: OperatorField) -> bool:
    """Symmetric part (in the lower indices) of <L,M> vanishes."""
    return nijenhuis_bracket(L, M).symmetric_part().is_zero()


def is_strong_symmetry(L: OperatorField, M: OperatorField) -> bool:
    return nijenhuis_bracket(L, M).is_zero()


# --------------------------------------------------------------------------
# Lie derivative


def lie_derivative(v: VectorField, T: Tensor) -> Tensor:
    """Coordinate Lie derivative of an arbitrary (p,q) tensor along ``v``."""
    if v.coords != T.coords:
        raise DimensionError("vector field and tensor live on different charts")
    n = T.n
    up, down = T.valence
    C = T.comps
    dC = T.partial()
    dv = grad(v.coords, v.comps)  # dv[a, i] = ∂_a v^i
    out = np.empty(C.shape, dtype=object)
    for idx in np.ndindex(C.shape):
        acc = _sum(v.comps[a] * dC[(a,) + idx] for a in range(n))
        for s in range(up + down):
            for a in range(n):
                src = idx[:s] + (a,) + idx[s + 1 :]
                if s < up:
                    acc = acc - C[src] * dv[a, idx[s]]
                else:
                    acc = acc + C[src] * dv[idx[s], a]
        out[idx] = acc
    return T._like(out)


# --------------------------------------------------------------------------
# characteristic polynomial and identities


@dataclass(frozen=True)
class CharPoly:
    """``χ(t) = t^n + σ_1 t^{n−1} + … + σ_n``."""

    sigmas: tuple[RationalFunction, ...]

    @property
    def degree(self) -> int:
        return len(self.sigmas)

    @property
    def coefficients(self) -> tuple[RationalFunction, ...]:
        return (RationalFunction(1),) + tuple(self.sigmas)

    def __call__(self, t) -> RationalFunction:
        acc = RationalFunction(1)
        for s in self.sigmas:
            acc = acc * t + s
        return acc

    def polynomial(self, t: str = "t") -> RationalFunction:
        return self(RationalFunction.var(t))

    def __str__(self):
        return str(self.polynomial())


def char_poly(L: OperatorField) -> CharPoly:
    sigmas, _ = faddeev_leverrier(L.comps)
    chi = CharPoly(tuple(sigmas))
    t = fresh_symbol(L.coords)
    tv = RationalFunction.var(t)
    shifted = identity(L.n) * tv - L.comps
    if det(shifted) != chi.polynomial(t):
        raise AlgebraError("characteristic polynomial side check failed")
    return chi


def companion_matrix(sigmas: Sequence[RationalFunction]) -> np.ndarray:
    """First companion form: first column ``−σ``, ones on the superdiagonal."""
    n = len(sigmas)
    S = _zeros((n, n))
    for i in range(n):
        S[i, 0] = -rf(sigmas[i])
        if i + 1 < n:
            S[i, i + 1] = RationalFunction(1)
    return S


def companion_operator(coords) -> OperatorField:
    """The operator whose σ_k are the coordinates themselves."""
    return OperatorField(coords, companion_matrix([RationalFunction.var(c) for c in coords]))


def canonical_form(L: OperatorField) -> np.ndarray:
    """``J L J^{-1}`` with ``J`` the Jacobian of (σ_1..σ_n); the companion form in σ-coordinates."""
    chi = char_poly(L)
    J = jacobian(chi.sigmas, L.coords)
    return matmul(matmul(J, L.comps), inverse(J))


@dataclass
class CoreIdentityReport:
    det_identity: bool
    chi_identity: bool
    companion_identity: bool
    residuals: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return self.det_identity and self.chi_identity and self.companion_identity


def verify_core_identities(L: OperatorField) -> CoreIdentityReport:
    """Check the three identities satisfied by a Nijenhuis operator.

    1. ``L* d(det L) = det L · d tr L``
    2. ``L* dχ(t) − t dχ(t) = χ(t) d tr L`` coefficientwise in ``t``
    3. ``J L = S_χ J``
    """
    n = L.n
    coords = L.coords
    dtr = OneForm.d(coords, L.trace())
    detL = L.det()
    r1 = L.transpose_act(OneForm.d(coords, detL)) - dtr.scale(detL)

    chi = char_poly(L)
    sig = chi.coefficients  # σ_0 = 1
    dsig = [OneForm.d(coords, s) for s in sig]
    # coefficient of t^m, m = 0..n
    r2 = []
    for m in range(n + 1):
        acc = OneForm.zeros(coords)
        k = n - m  # L* dσ_k and σ_k dtr sit at power n−k
        acc = acc + L.transpose_act(dsig[k]) - dtr.scale(sig[k])
        if 0 <= n - m + 1 <= n:  # −t dσ_{k'} sits at power n−k'+1
            acc = acc - dsig[n - m + 1]
        r2.append(acc)

    J = jacobian(chi.sigmas, coords)
    r3 = matmul(J, L.comps) - matmul(companion_matrix(chi.sigmas), J)
    ok3 = all(x.is_zero() for x in r3.flat)
    return CoreIdentityReport(
        det_identity=r1.is_zero(),
        chi_identity=all(r.is_zero() for r in r2),
        companion_identity=ok3,
        residuals={"det": r1, "chi": r2, "companion": r3},
    )


# --------------------------------------------------------------------------
# matrix functions


def _poly_coefficients(f) -> list[RationalFunction]:
    """Ascending coefficients of a univariate polynomial."""
    if isinstance(f, (list, tuple)):
        return [rf(c) for c in f]
    f = rf(f)
    if not f.is_polynomial():
        raise ValueError(f"{f} is not a polynomial")
    vs = f.variables
    if not vs:
        return [f]
    if len(vs) > 1:
        raise ValueError(f"{f} is not univariate")
    coeffs = f.coefficients(vs[0])
    top = max(coeffs)
    return [coeffs.get(k, RationalFunction(0)) for k in range(top + 1)]


def apply_poly(L: OperatorField, f) -> OperatorField:
    """``f(L)`` by Horner's rule.  ``f`` is a univariate polynomial or ascending coefficients."""
    coeffs = _poly_coefficients(f)
    n = L.n
    I = identity(n)
    R = I * coeffs[-1]
    for c in reversed(coeffs[:-1]):
        R = matmul(R, L.comps) + I * c
    return OperatorField(L.coords, R)


# --------------------------------------------------------------------------
# regularity


@dataclass(frozen=True)
class RegularityReport:
    gl_regular: bool
    diff_nondegenerate: bool
    scalar_type: bool


def _eval(arr: np.ndarray, p) -> np.ndarray:
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = arr[idx].evaluate(p)
    return out


def minimal_polynomial_degree(A: Sequence[Sequence[Fraction]]) -> int:
    """Smallest ``d`` with ``I, A, …, A^d`` linearly dependent (rank of the Krylov sequence)."""
    A = np.array(A, dtype=object)
    n = A.shape[0]
    P = np.array([[Fraction(int(i == j)) for j in range(n)] for i in range(n)], dtype=object)
    rows = []
    for d in range(n + 1):
        rows.append(list(P.flat))
        if rank_q(rows) <= d:
            return d
        P = P.dot(A)
    return n


def regularity_report(L: OperatorField, point) -> RegularityReport:
    p = point_dict(L.coords, point)
    try:
        Lp = _eval(L.comps, p)
    except PoleError:
        raise PoleError(f"operator has a pole at {dict(p)}") from None
    n = L.n
    gl = minimal_polynomial_degree(Lp) == n
    chi = char_poly(L)
    Jp = _eval(jacobian(chi.sigmas, L.coords), p)
    diff_nd = rank_q(Jp.tolist()) == n
    lam = Lp[0, 0]
    scalar = all(Lp[i, j] == (lam if i == j else 0) for i in range(n) for j in range(n))
    return RegularityReport(gl_regular=gl, diff_nondegenerate=diff_nd, scalar_type=scalar)
