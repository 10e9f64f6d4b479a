"""Exact arithmetic: multivariate rational functions over Q and linear algebra on them.

Polynomials are python-flint ``fmpq_mpoly`` objects living in a lex-ordered
context whose generators are sorted by :func:`symbol_key`.  Binary operations
between values from different contexts first project both operands to the
union context, so users never manage contexts themselves.

A :class:`RationalFunction` is always stored in reduced form: numerator and
denominator are coprime and the denominator has leading coefficient 1.
Two equal rational functions therefore have identical representations once
they live in the same context.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import flint
import numpy as np

__all__ = [
    "AlgebraError",
    "DivisionByZeroError",
    "UnknownSymbolError",
    "SingularMatrixError",
    "DimensionError",
    "InconsistentSystemError",
    "PoleError",
    "RationalFunction",
    "rf",
    "var",
    "symbols",
    "symbol_key",
    "partial",
    "arith",
    "as_matrix",
    "zeros",
    "identity",
    "det",
    "linear_solve",
    "inverse",
    "solve_overdetermined",
    "faddeev_leverrier",
    "evaluate_matrix",
    "rank_q",
    "lambdify",
]


class AlgebraError(Exception):
    """Base class for errors raised by the exact arithmetic layer."""


class DivisionByZeroError(AlgebraError, ZeroDivisionError):
    pass


class UnknownSymbolError(AlgebraError, ValueError):
    def __init__(self, name, declared=None):
        self.name = name
        self.declared = tuple(declared) if declared is not None else None
        msg = f"unknown symbol {name!r}"
        if declared is not None:
            msg += f" (declared: {', '.join(self.declared) or 'none'})"
        super().__init__(msg)


class SingularMatrixError(AlgebraError):
    """Raised when a square system has identically vanishing determinant."""


class DimensionError(AlgebraError, ValueError):
    """Raised on shape mismatches."""


class InconsistentSystemError(AlgebraError):
    """An overdetermined system has no exact solution."""


class PoleError(AlgebraError):
    """Evaluation hit a zero denominator."""


_NAME_SPLIT = re.compile(r"(\d+)")


def symbol_key(name: str):
    """Natural sort key: ``u2 < u10`` and ``u1 < u1_x < u1_x2``."""
    return tuple(int(p) if p.isdigit() else p for p in _NAME_SPLIT.split(name))


@lru_cache(maxsize=None)
def _context(names: tuple[str, ...]):
    return flint.fmpq_mpoly_ctx.get(names, "lex")


@lru_cache(maxsize=4096)
def _union(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(sorted(set(a) | set(b), key=symbol_key))


def _fmpq(value) -> flint.fmpq:
    if isinstance(value, flint.fmpq):
        return value
    if isinstance(value, int):
        return flint.fmpq(value)
    if isinstance(value, Fraction):
        return flint.fmpq(value.numerator, value.denominator)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.p), int(q.q))


_EMPTY = _context(())


class RationalFunction:
    """Immutable element of Q(x_1, ..., x_k) in canonical reduced form."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, value=0):
        if isinstance(value, RationalFunction):
            self.num, self.den = value.num, value.den
        else:
            self.num = _EMPTY.constant(_fmpq(value))
            self.den = _EMPTY.constant(1)
        self._hash = None

    # construction ---------------------------------------------------------

    @classmethod
    def _raw(cls, num, den):
        obj = cls.__new__(cls)
        obj.num, obj.den, obj._hash = num, den, None
        return obj

    @classmethod
    def _make(cls, num, den):
        if den.is_zero():
            raise DivisionByZeroError("division by the zero rational function")
        if num.is_zero():
            return cls._raw(num, num.context().constant(1))
        if not den.is_constant():
            g = num.gcd(den)
            if not g.is_one():
                num = num / g
                den = den / g
        lc = den.leading_coefficient()
        if lc != 1:
            num = num / lc
            den = den / lc
        return cls._raw(num, den)

    @classmethod
    def var(cls, name: str) -> "RationalFunction":
        ctx = _context((name,))
        return cls._raw(ctx.gen(0), ctx.constant(1))

    @classmethod
    def const(cls, value) -> "RationalFunction":
        return cls(value)

    # context handling -----------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        """Generators of the context this value currently lives in."""
        return self.num.context().names()

    def _in(self, names: tuple[str, ...]):
        if self.names == names:
            return self.num, self.den
        ctx = _context(names)
        return self.num.project_to_context(ctx), self.den.project_to_context(ctx)

    def _pair(self, other: "RationalFunction"):
        if self.num.context() is other.num.context():
            return self.num, self.den, other.num, other.den
        names = _union(self.names, other.names)
        a, b = self._in(names)
        c, d = other._in(names)
        return a, b, c, d

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b, c, d = self._pair(other)
        if b == d:
            return RationalFunction._make(a + c, b)
        return RationalFunction._make(a * d + c * b, b * d)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction._raw(-self.num, self.den)

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b, c, d = self._pair(other)
        if a.is_zero() or c.is_zero():
            return RationalFunction._raw(a * 0, b * 0 + 1)
        if not d.is_constant():
            g = a.gcd(d)
            if not g.is_one():
                a, d = a / g, d / g
        if not b.is_constant():
            g = c.gcd(b)
            if not g.is_one():
                c, b = c / g, b / g
        num, den = a * c, b * d
        lc = den.leading_coefficient()
        if lc != 1:
            num, den = num / lc, den / lc
        return RationalFunction._raw(num, den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.reciprocal()

    def reciprocal(self) -> "RationalFunction":
        if self.num.is_zero():
            raise DivisionByZeroError("division by the zero rational function")
        num, den = self.den, self.num
        lc = den.leading_coefficient()
        if lc != 1:
            num, den = num / lc, den / lc
        return RationalFunction._raw(num, den)

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.reciprocal() ** (-k)
        return RationalFunction._raw(self.num**k, self.den**k)

    # comparison -----------------------------------------------------------

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b, c, d = self._pair(other)
        return a == c and b == d

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        if self._hash is None:
            if self.is_constant():
                self._hash = hash(self.constant_value())
            else:
                self._hash = hash((_canonical_terms(self.num), _canonical_terms(self.den)))
        return self._hash

    def __bool__(self):
        return not self.num.is_zero()

    # inspection -----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        if self.num.is_zero():
            return Fraction(0)
        return _to_fraction(self.num.leading_coefficient())

    @property
    def variables(self) -> tuple[str, ...]:
        """Symbols that actually occur, in canonical order."""
        names = self.names
        dn, dd = self.num.degrees(), self.den.degrees()
        return tuple(n for n, a, b in zip(names, dn, dd) if a > 0 or b > 0)

    def degree(self, name: str) -> int:
        """Degree of the numerator in ``name``; the denominator must not involve it."""
        if name not in self.names:
            return 0
        i = self.names.index(name)
        if self.den.degrees()[i] > 0:
            raise ValueError(f"{self} is not polynomial in {name}")
        return -1 if self.num.is_zero() else int(self.num.degrees()[i])

    def numerator(self) -> "RationalFunction":
        return RationalFunction._raw(self.num, self.num.context().constant(1))

    def denominator(self) -> "RationalFunction":
        return RationalFunction._raw(self.den, self.den.context().constant(1))

    def terms(self) -> list[tuple[dict[str, int], Fraction]]:
        """Numerator terms as ``({name: exponent}, coefficient)``; requires a polynomial."""
        if not self.is_polynomial():
            raise ValueError(f"{self} is not a polynomial")
        scale = _to_fraction(self.den.leading_coefficient())
        names = self.names
        out = []
        for exps, c in self.num.terms():
            mono = {n: int(e) for n, e in zip(names, exps) if e}
            out.append((mono, _to_fraction(c) / scale))
        return out

    def coefficients(self, name: str) -> dict[int, "RationalFunction"]:
        """Coefficients of ``name^k`` for a value polynomial in ``name``."""
        if name not in self.names:
            return {0: self} if self else {}
        i = self.names.index(name)
        if self.den.degrees()[i] > 0:
            raise ValueError(f"{self} is not polynomial in {name}")
        ctx = self.num.context()
        groups: dict[int, dict] = {}
        for exps, c in self.num.terms():
            k = int(exps[i])
            e = list(exps)
            e[i] = 0
            groups.setdefault(k, {})[tuple(e)] = c
        den = RationalFunction._raw(self.den, ctx.constant(1))
        return {
            k: RationalFunction._make(ctx.from_dict(d), ctx.constant(1)) / den
            for k, d in sorted(groups.items())
        }

    # calculus and substitution --------------------------------------------

    def diff(self, name: str) -> "RationalFunction":
        """Partial derivative; zero if ``name`` does not occur."""
        if name not in self.names:
            return RationalFunction._raw(self.num * 0, self.den * 0 + 1)
        n, d = self.num, self.den
        dn = n.derivative(name)
        if d.is_constant():
            return RationalFunction._make(dn, d)
        dd = d.derivative(name)
        if dd.is_zero():
            return RationalFunction._make(dn, d)
        return RationalFunction._make(dn * d - n * dd, d * d)

    def subs(self, mapping: Mapping[str, object]) -> "RationalFunction":
        """Substitute symbols by numbers or rational functions."""
        mapping = {k: v for k, v in mapping.items() if k in self.variables}
        if not mapping:
            return self
        if all(isinstance(v, (int, Fraction)) for v in mapping.values()):
            vals = {k: _fmpq(v) for k, v in mapping.items()}
            num = self.num.subs(vals)
            den = self.den.subs(vals)
            if den.is_zero():
                raise PoleError(f"denominator of {self} vanishes at {mapping}")
            return RationalFunction._make(num, den)
        vals = {k: _coerce(v) for k, v in mapping.items()}
        num = _subs_poly(self.num, vals)
        den = _subs_poly(self.den, vals)
        if den.is_zero():
            raise PoleError(f"denominator of {self} vanishes under substitution")
        return num / den

    def evaluate(self, point: Mapping[str, object]) -> Fraction:
        """Exact value at a rational point covering every occurring symbol."""
        missing = [v for v in self.variables if v not in point]
        if missing:
            raise UnknownSymbolError(missing[0], point.keys())
        val = self.subs({k: Fraction(v) for k, v in point.items()})
        return val.constant_value()

    # printing -------------------------------------------------------------

    def __str__(self):
        names = self.names
        num = _poly_str(self.num, names)
        if self.den.is_one():
            return num
        return f"({num})/({_poly_str(self.den, names)})"

    def __repr__(self):
        return f"RationalFunction({str(self)!r})"


def _coerce(value):
    if isinstance(value, RationalFunction):
        return value
    if isinstance(value, (int, Fraction, flint.fmpq)):
        return RationalFunction(value)
    return NotImplemented


def _canonical_terms(poly):
    names = poly.context().names()
    return frozenset(
        (tuple((n, int(e)) for n, e in zip(names, exps) if e), _to_fraction(c))
        for exps, c in poly.terms()
    )


def _subs_poly(poly, vals: dict[str, RationalFunction]) -> RationalFunction:
    names = poly.context().names()
    keep = tuple(n for n in names if n not in vals)
    ctx = _context(keep)
    idx = [names.index(n) for n in keep]
    total = RationalFunction(0)
    powers: dict[tuple[str, int], RationalFunction] = {}
    for exps, c in poly.terms():
        rest = ctx.from_dict({tuple(exps[i] for i in idx): c})
        term = RationalFunction._raw(rest, ctx.constant(1))
        for n, e in zip(names, exps):
            if e and n in vals:
                key = (n, int(e))
                if key not in powers:
                    powers[key] = vals[n] ** int(e)
                term = term * powers[key]
        total = total + term
    return total


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _poly_str(poly, names) -> str:
    if poly.is_zero():
        return "0"
    parts = []
    for exps, c in poly.terms():
        c = _to_fraction(c)
        mono = "*".join(n if e == 1 else f"{n}^{e}" for n, e in zip(names, exps) if e)
        sign = "-" if c < 0 else "+"
        a = abs(c)
        if not mono:
            body = _format_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_format_coeff(a)}*{mono}"
        parts.append((sign, body))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def rf(value) -> RationalFunction:
    """Coerce a number, a RationalFunction or an expression string."""
    if isinstance(value, str):
        from .dsl import parse_expression

        return parse_expression(value)
    out = _coerce(value)
    if out is NotImplemented:
        raise TypeError(f"cannot convert {type(value).__name__} to RationalFunction")
    return out


def var(name: str) -> RationalFunction:
    return RationalFunction.var(name)


def symbols(names: str | Iterable[str]) -> tuple[RationalFunction, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(RationalFunction.var(n) for n in names)


def partial(f: RationalFunction, v: str, declared: Sequence[str] | None = None) -> RationalFunction:
    """``df/dv``; with ``declared`` given, ``v`` must be one of them."""
    if declared is not None and v not in declared:
        raise UnknownSymbolError(v, declared)
    return rf(f).diff(v)


def arith(a, b, op: str) -> RationalFunction:
    a, b = rf(a), rf(b)
    if op == "+":
        return a + b
    if op in ("-", "−"):
        return a - b
    if op in ("*", "×"):
        return a * b
    if op in ("/", "÷"):
        return a / b
    raise ValueError(f"unknown operation {op!r}")


# --------------------------------------------------------------------------
# matrices: numpy object arrays with RationalFunction entries


def as_matrix(rows) -> np.ndarray:
    arr = np.array(rows, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = rf(arr[idx])
    return out


def zeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    zero = RationalFunction(0)
    for idx in np.ndindex(out.shape):
        out[idx] = zero
    return out


def identity(n: int) -> np.ndarray:
    out = zeros((n, n))
    for i in range(n):
        out[i, i] = RationalFunction(1)
    return out


def _check_square(A) -> int:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A.shape[0]


def det(A) -> RationalFunction:
    """Determinant by fraction-free (Bareiss) elimination."""
    A = as_matrix(A)
    n = _check_square(A)
    if n == 0:
        return RationalFunction(1)
    M = [list(row) for row in A]
    sign = 1
    prev = RationalFunction(1)
    for k in range(n - 1):
        p = next((i for i in range(k, n) if M[i][k]), None)
        if p is None:
            return RationalFunction(0)
        if p != k:
            M[k], M[p] = M[p], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[k][k] * M[i][j] - M[i][k] * M[k][j]) / prev
        prev = M[k][k]
    return M[n - 1][n - 1] if sign > 0 else -M[n - 1][n - 1]


def linear_solve(A, b) -> np.ndarray:
    """Exact solution of ``A x = b`` via Bareiss elimination.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    A = as_matrix(A)
    b = as_matrix(b)
    n = _check_square(A)
    vector = b.ndim == 1
    B = b.reshape(n, 1) if vector else b
    if B.shape[0] != n:
        raise DimensionError(f"right-hand side has {B.shape[0]} rows, expected {n}")
    m = B.shape[1]
    M = [list(A[i]) + list(B[i]) for i in range(n)]
    prev = RationalFunction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if M[i][k]), None)
        if p is None:
            raise SingularMatrixError("matrix is singular (determinant vanishes identically)")
        if p != k:
            M[k], M[p] = M[p], M[k]
        for i in range(k + 1, n):
            for j in range(k + 1, n + m):
                M[i][j] = (M[k][k] * M[i][j] - M[i][k] * M[k][j]) / prev
            M[i][k] = RationalFunction(0)
        prev = M[k][k]
    X = zeros((n, m))
    for c in range(m):
        for i in reversed(range(n)):
            s = M[i][n + c]
            for j in range(i + 1, n):
                if M[i][j]:
                    s = s - M[i][j] * X[j, c]
            X[i, c] = s / M[i][i]
    return X[:, 0] if vector else X


def inverse(A) -> np.ndarray:
    A = as_matrix(A)
    return linear_solve(A, identity(_check_square(A)))


def solve_overdetermined(A, b) -> np.ndarray:
    """Exact solution of a full-column-rank system with more rows than columns.

    Raises :class:`SingularMatrixError` when the columns are dependent and
    :class:`InconsistentSystemError` when no exact solution exists.
    """
    A = as_matrix(A)
    b = as_matrix(b)
    rows, cols = A.shape
    if b.shape != (rows,):
        raise DimensionError(f"right-hand side has shape {b.shape}, expected ({rows},)")
    M = [list(A[i]) + [b[i]] for i in range(rows)]
    r = 0
    pivots = []
    for c in range(cols):
        p = next((i for i in range(r, rows) if M[i][c]), None)
        if p is None:
            raise SingularMatrixError(f"column {c} is dependent on the previous ones")
        M[r], M[p] = M[p], M[r]
        inv = M[r][c].reciprocal()
        M[r] = [x * inv for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    for i in range(r, rows):
        if M[i][cols]:
            raise InconsistentSystemError("overdetermined system has no exact solution")
    out = zeros((cols,))
    for i, c in enumerate(pivots):
        out[c] = M[i][cols]
    return out


def faddeev_leverrier(A):
    """Characteristic coefficients and adjugate expansion of ``t*Id - A``.

    Returns ``(sigma, B)`` with ``det(t Id - A) = t^n + sigma[0] t^(n-1) + ... + sigma[n-1]``
    and ``adj(t Id - A) = sum_k t^(n-1-k) B[k]``.
    """
    A = as_matrix(A)
    n = _check_square(A)
    B = [identity(n)]
    sigma = []
    for k in range(1, n + 1):
        AB = A.dot(B[-1])
        s = -np.trace(AB) / k
        sigma.append(rf(s))
        if k < n:
            B.append(AB + identity(n) * s)
    return sigma, B


def evaluate_matrix(A, point: Mapping[str, object]) -> list[list[Fraction]]:
    A = np.asarray(A, dtype=object)
    return [[rf(x).evaluate(point) for x in row] for row in A]


def rank_q(rows: Sequence[Sequence[Fraction]]) -> int:
    """Exact rank of a matrix over Q."""
    M = [[Fraction(x) for x in row] for row in rows]
    if not M:
        return 0
    r = 0
    cols = len(M[0])
    for c in range(cols):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        for i in range(r + 1, len(M)):
            if M[i][c] != 0:
                f = M[i][c] / M[r][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        r += 1
        if r == len(M):
            break
    return r


def _poly_source(poly, index: dict[str, int]) -> str:
    names = poly.context().names()
    parts = []
    for exps, c in poly.terms():
        factors = [repr(float(_to_fraction(c)))]
        for n, e in zip(names, exps):
            if e:
                factors.append(f"x[{index[n]}]" if e == 1 else f"x[{index[n]}]**{e}")
        parts.append("*".join(factors))
    return " + ".join(parts) if parts else "0.0"


def lambdify(exprs: Sequence[RationalFunction], names: Sequence[str]):
    """Compile rational functions into ``f(x) -> list[float]`` over the given symbols."""
    index = {n: i for i, n in enumerate(names)}
    bodies = []
    for e in exprs:
        e = rf(e)
        for v in e.variables:
            if v not in index:
                raise UnknownSymbolError(v, names)
        num = _poly_source(e.num, index)
        if e.den.is_one():
            bodies.append(f"({num})")
        else:
            bodies.append(f"({num})/({_poly_source(e.den, index)})")
    src = "def _f(x):\n    return [" + ", ".join(bodies) + "]\n"
    scope: dict = {}
    exec(compile(src, "<nijkit.lambdify>", "exec"), scope)
    return scope["_f"]
