"""Separable commuting integrals built from a Vandermonde system, and their flows.

The integrals ``I_0..I_{N-1}`` solve ``W(x) I = (½ p_i² + V(x_i))_i`` where ``W``
has rows ``(x_i^{N-1}, …, x_i, 1)`` and ``V = C/m``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .algebra import AlgebraError, RationalFunction, inverse, lambdify, linear_solve, rf
from .integrable import PhaseFunction, in_involution
from .tensors import OperatorField, _zeros, companion_matrix, jacobian, matmul

PARAM = "t"


def _subs(expr, mapping):
    return rf(expr).subs(mapping)


class ConfigError(AlgebraError, ValueError):
    pass


class CollisionError(AlgebraError):
    def __init__(self, time: float, pair: tuple[int, int], gap: float):
        self.time = time
        self.pair = pair
        self.gap = gap
        super().__init__(f"collision of x{pair[0] + 1} and x{pair[1] + 1} at time {time:.12g} (gap {gap:.3g})")


class FlowPoleError(AlgebraError):
    def __init__(self, time: float, index: int, value: float):
        self.time = time
        self.index = index
        super().__init__(f"m(x{index + 1}) = {value:.3g} vanishes at time {time:.12g}; the potential has a pole")


class ComplexRootsError(AlgebraError, ValueError):
    def __init__(self, w, discriminant: float):
        self.w = tuple(w)
        self.discriminant = discriminant
        sign = "negative" if discriminant < 0 else "positive" if discriminant > 0 else "zero"
        super().__init__(f"polynomial with coefficients {self.w} has complex roots (discriminant {discriminant:.6g}, {sign})")


def as_univariate(poly, name: str = PARAM) -> RationalFunction:
    """A polynomial in ``name`` from a RationalFunction/str or ascending coefficients."""
    if isinstance(poly, (list, tuple)):
        tv = RationalFunction.var(name)
        acc = RationalFunction(0)
        for c in reversed(poly):
            acc = acc * tv + rf(c)
        return acc
    p = rf(poly)
    extra = [v for v in p.variables if v != name]
    if extra or not p.is_polynomial():
        raise ConfigError(f"{p} is not a polynomial in {name}")
    return p


def _deg(p: RationalFunction) -> int:
    return -1 if p.is_zero() else p.degree(PARAM)


@dataclass
class FiniteGapConfig:
    """``C``, ``m`` are polynomials in ``t``; ``lam``/``mu`` weight the integrals in F and H."""

    N: int
    n: int
    C: object
    m: object = 1
    lam: Sequence | None = None
    mu: Sequence | None = None

    def __post_init__(self):
        if not isinstance(self.N, int) or self.N < 1:
            raise ConfigError("N must be a positive integer")
        if not isinstance(self.n, int) or self.n < 0:
            raise ConfigError("n must be a nonnegative integer")
        self.C = as_univariate(self.C)
        self.m = as_univariate(self.m)
        if self.m.is_zero():
            raise ConfigError("m must not vanish identically")
        if _deg(self.C) > 2 * self.N + self.n:
            raise ConfigError(f"deg C = {_deg(self.C)} exceeds 2N+n = {2 * self.N + self.n}")
        if _deg(self.m) > self.n:
            raise ConfigError(f"deg m = {_deg(self.m)} exceeds n = {self.n}")
        if self.mu is None:
            self.mu = [1] + [0] * (self.N - 1)
        if self.lam is None:
            self.lam = [0] * (self.N - 1) + [1]
        for name in ("lam", "mu"):
            v = [Fraction(c) for c in getattr(self, name)]
            if len(v) != self.N:
                raise ConfigError(f"{name} must have N = {self.N} entries")
            setattr(self, name, v)

    @property
    def V(self) -> RationalFunction:
        return self.C / self.m

    @property
    def coords(self) -> tuple[str, ...]:
        return tuple(f"x{i + 1}" for i in range(self.N))

    @property
    def momenta(self) -> tuple[str, ...]:
        return tuple(f"p{i + 1}" for i in range(self.N))


def vandermonde(xs: Sequence[RationalFunction]) -> np.ndarray:
    N = len(xs)
    W = np.empty((N, N), dtype=object)
    for i, x in enumerate(xs):
        for j in range(N):
            W[i, j] = x ** (N - 1 - j)
    return W


def build_integrals(cfg: FiniteGapConfig) -> list[PhaseFunction]:
    xs = [RationalFunction.var(c) for c in cfg.coords]
    ps = [RationalFunction.var(p) for p in cfg.momenta]
    V = cfg.V
    rhs = np.empty(cfg.N, dtype=object)
    for i in range(cfg.N):
        rhs[i] = ps[i] * ps[i] * Fraction(1, 2) + _subs(V, {PARAM: xs[i]})
    sol = linear_solve(vandermonde(xs), rhs)
    return [PhaseFunction(s, cfg.coords, cfg.momenta) for s in sol]


def pole_loci(cfg: FiniteGapConfig) -> list[RationalFunction]:
    """The factors ``m(x_i)`` whose zeros are poles of the integrals."""
    return [_subs(cfg.m, {PARAM: RationalFunction.var(c)}) for c in cfg.coords if not cfg.m.is_constant()]


def verify_commutation(integrals) -> bool:
    return in_involution(integrals)


def combination(integrals, coeffs) -> PhaseFunction:
    acc = integrals[0] * RationalFunction(0)
    for c, I in zip(coeffs, integrals):
        acc = acc + I * rf(c)
    return acc


# --------------------------------------------------------------------------
# x <-> w


def x_to_w(x: Sequence) -> list:
    """``(t − x_1)…(t − x_N) = t^N + w_1 t^{N−1} + … + w_N``; exact for rational input."""
    coeffs = [1]
    for xi in x:
        nxt = coeffs + [0]
        for k in range(1, len(nxt)):
            nxt[k] = nxt[k] - xi * coeffs[k - 1]
        coeffs = nxt
    return coeffs[1:]


def _discriminant(roots) -> float:
    d = 1 + 0j
    for a, b in itertools.combinations(roots, 2):
        d *= (a - b) ** 2
    return float(d.real)


def w_to_x(w: Sequence, imag_tol: float = 1e-9) -> list[float]:
    """Real roots of ``t^N + w_1 t^{N−1} + … + w_N``, sorted ascending."""
    w = [float(c) for c in w]
    if len(w) == 1:
        return [-w[0]]
    roots = np.roots([1.0] + w)
    scale = max(1.0, max(abs(r) for r in roots))
    if any(abs(r.imag) > imag_tol * scale for r in roots):
        raise ComplexRootsError(w, _discriminant(roots))
    real = np.sort(roots.real)
    # one Newton polish step per root
    poly = np.poly1d([1.0] + w)
    dpoly = poly.deriv()
    out = []
    for r in real:
        d = dpoly(r)
        out.append(float(r - poly(r) / d) if d != 0 else float(r))
    return sorted(out)


def companion_and_diag_forms(N: int) -> tuple[OperatorField, OperatorField]:
    """First companion form in ``w`` coordinates and ``diag(x_1..x_N)`` in ``x`` coordinates."""
    wc = tuple(f"w{i + 1}" for i in range(N))
    xc = tuple(f"x{i + 1}" for i in range(N))
    comp = OperatorField(wc, companion_matrix([RationalFunction.var(c) for c in wc]))
    diag = _zeros((N, N))
    for i, c in enumerate(xc):
        diag[i, i] = RationalFunction.var(c)
    return comp, OperatorField(xc, diag)


def conjugation_check(N: int) -> bool:
    """``J M_diag J^{-1} = M_comp1(w(x))`` with ``J = ∂w/∂x``."""
    comp, diag = companion_and_diag_forms(N)
    xs = [RationalFunction.var(c) for c in diag.coords]
    w_of_x = x_to_w(xs)
    J = jacobian(w_of_x, diag.coords)
    lhs = matmul(matmul(J, diag.comps), inverse(J))
    sub = dict(zip(comp.coords, w_of_x))
    rhs = np.vectorize(lambda e: _subs(e, sub), otypes=[object])(comp.comps)
    return all(a == b for a, b in zip(lhs.flat, rhs.flat))


# --------------------------------------------------------------------------
# flows


@dataclass
class FlowState:
    x: Sequence[float]
    p: Sequence[float]
    tau: float = 0.0
    t: float = 0.0


@dataclass
class Trajectory:
    s: np.ndarray  # flow parameter
    tau: np.ndarray
    t: np.ndarray
    x: np.ndarray  # shape (len(s), N)
    p: np.ndarray
    integrals: np.ndarray  # shape (len(s), N)
    drift: list[dict] = field(default_factory=list)
    event: str | None = None

    @property
    def final(self) -> FlowState:
        return FlowState(list(self.x[-1]), list(self.p[-1]), float(self.tau[-1]), float(self.t[-1]))

    def to_csv(self) -> str:
        N = self.x.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "t"] + [f"x{i + 1}" for i in range(N)] + [f"p{i + 1}" for i in range(N)] + [f"I{k}" for k in range(N)])
        for r in range(len(self.s)):
            w.writerow([repr(float(v)) for v in [self.tau[r], self.t[r], *self.x[r], *self.p[r], *self.integrals[r]]])
        return buf.getvalue()

    def drift_json(self) -> str:
        return json.dumps(self.drift, indent=2)

    @property
    def max_drift(self) -> float:
        return max((d["max_rel_drift"] for d in self.drift), default=0.0)


class FlowSystem:
    """Numeric vector fields ``X_H``, ``X_F`` and the integrals of a configuration.

    ``route="vandermonde"`` evaluates the fields through the separated form
    ``p_i^2/2 + V(x_i) = P(x_i)``; ``route="exact"`` compiles the derivatives of
    the exact integrals.  The two are independent and agree to rounding.
    """

    def __init__(self, cfg: FiniteGapConfig, integrals=None, route: str = "vandermonde"):
        if route not in ("vandermonde", "exact"):
            raise ConfigError(f"unknown route {route!r}")
        self.cfg = cfg
        self.route = route
        self.integrals = integrals if integrals is not None else build_integrals(cfg)
        names = list(cfg.coords) + list(cfg.momenta)
        self.names = names
        self._fields = {}
        if route == "exact":
            H = combination(self.integrals, cfg.mu)
            F = combination(self.integrals, cfg.lam)
            for key, G in (("H", H), ("F", F)):
                comps = [G.expr.diff(p) for p in cfg.momenta] + [-G.expr.diff(x) for x in cfg.coords]
                self._fields[key] = lambdify(comps, names)
        else:
            V = cfg.V
            self._V = lambdify([V, V.diff(PARAM)], [PARAM])
            for key, w in (("H", cfg.mu), ("F", cfg.lam)):
                self._fields[key] = self._separated_field(np.array([float(c) for c in w]))
        self._I = lambdify([I.expr for I in self.integrals], names)
        self._m = lambdify([cfg.m], [PARAM])

    def _separated_field(self, weights: np.ndarray):
        N = self.cfg.N
        powers = np.arange(N - 1, -1, -1)

        def f(z):
            x, p = np.asarray(z[:N], dtype=float), np.asarray(z[N:], dtype=float)
            W = x[:, None] ** powers[None, :]
            VdV = np.array([self._V([xi]) for xi in x], dtype=float)
            I = np.linalg.solve(W, p * p / 2 + VdV[:, 0])
            w = np.linalg.solve(W.T, weights)
            dP = np.array([sum(k * I[j] * xi ** (k - 1) for j, k in enumerate(powers) if k) for xi in x])
            return np.concatenate([w * p, -w * (VdV[:, 1] - dP)])

        return f

    def field(self, direction: tuple[float, float]):
        a, b = direction
        XH, XF = self._fields["H"], self._fields["F"]

        def rhs(_s, z):
            out = np.zeros(len(z))
            if a:
                out += a * np.asarray(XH(z), dtype=float)
            if b:
                out += b * np.asarray(XF(z), dtype=float)
            if not np.all(np.isfinite(out)):
                raise FloatingPointError("vector field is not finite")
            return out

        return rhs

    def integral_values(self, z) -> np.ndarray:
        return np.asarray(self._I(z), dtype=float)

    def m_values(self, x) -> list[float]:
        return [float(self._m([xi])[0]) for xi in x]


def _check_state(sys: FlowSystem, x, collision_tol: float, pole_tol: float, time: float):
    N = len(x)
    for i, j in itertools.combinations(range(N), 2):
        gap = abs(x[i] - x[j])
        if gap <= collision_tol:
            raise CollisionError(time, (i, j), gap)
    for i, v in enumerate(sys.m_values(x)):
        if abs(v) <= pole_tol:
            raise FlowPoleError(time, i, v)


def flow(
    cfg: FiniteGapConfig,
    z0: FlowState,
    T: float,
    direction: tuple[float, float] = (1.0, 0.0),
    rtol: float = 1e-12,
    atol: float = 1e-12,
    max_step: float = np.inf,
    samples: int = 201,
    collision_tol: float = 1e-9,
    pole_tol: float = 1e-9,
    system: FlowSystem | None = None,
    route: str = "vandermonde",
) -> Trajectory:
    """Integrate ``a X_H + b X_F`` for flow time ``T`` along ``direction = (a, b)`` in the (τ, t) plane.

    Uses the Dormand–Prince 5(4) pair.  Collisions ``x_i → x_j`` and zeros of
    ``m(x_i)`` stop the integration with an error carrying the event time.
    """
    sys = system or FlowSystem(cfg, route=route)
    N = cfg.N
    x0 = [float(v) for v in z0.x]
    p0 = [float(v) for v in z0.p]
    if len(x0) != N or len(p0) != N:
        raise ConfigError(f"state must have {N} positions and {N} momenta")
    _check_state(sys, x0, collision_tol, pole_tol, 0.0)
    events = []
    for i, j in itertools.combinations(range(N), 2):
        ev = lambda s, z, i=i, j=j: abs(z[i] - z[j]) - collision_tol
        ev.terminal = True
        events.append(("collision", (i, j), ev))
    if not cfg.m.is_constant():
        for i in range(N):
            ev = lambda s, z, i=i: sys.m_values([z[i]])[0]
            ev.terminal = True
            events.append(("pole", i, ev))
    s_eval = np.linspace(0.0, T, samples)
    try:
        sol = solve_ivp(
            sys.field(direction),
            (0.0, T),
            np.array(x0 + p0),
            method="RK45",
            dense_output=True,
            rtol=rtol,
            atol=atol,
            max_step=max_step,
            events=[e[2] for e in events] or None,
        )
    except FloatingPointError as exc:
        raise AlgebraError(f"integration failed: {exc}") from exc
    if sol.status == -1:
        # step-size underflow next to the degenerate locus is a collision too
        z = sol.y[:, -1] if sol.y.size else np.array(x0 + p0)
        if np.all(np.isfinite(z)) and N > 1:
            i, j = min(itertools.combinations(range(N), 2), key=lambda ij: abs(z[ij[0]] - z[ij[1]]))
            gap = abs(z[i] - z[j])
            if gap < 1e-5 * max(1.0, abs(z[i])):
                raise CollisionError(float(sol.t[-1]), (i, j), gap)
        raise AlgebraError(f"integration failed at s = {sol.t[-1]:.6g}: {sol.message}")
    if sol.status == 1:
        for (kind, info, _), te, ze in zip(events, sol.t_events, sol.y_events):
            if len(te):
                if kind == "collision":
                    i, j = info
                    raise CollisionError(float(te[0]), (i, j), abs(ze[0][i] - ze[0][j]))
                raise FlowPoleError(float(te[0]), info, 0.0)
    Z = sol.sol(s_eval).T
    Z[0] = np.array(x0 + p0)
    a, b = direction
    s = s_eval
    vals = np.array([sys.integral_values(z) for z in Z])
    traj = Trajectory(s, z0.tau + a * s, z0.t + b * s, Z[:, :N], Z[:, N:], vals)
    # drift is measured on every accepted step, not only on the samples
    steps = np.array([sys.integral_values(z) for z in sol.y.T])
    traj.drift = drift_report(np.vstack([vals[:1], steps]))
    return traj


def drift_report(vals: np.ndarray) -> list[dict]:
    """Max drift of each integral relative to its initial value (absolute if that is zero)."""
    out = []
    for k in range(vals.shape[1]):
        ref = vals[0, k]
        dev = np.max(np.abs(vals[:, k] - ref))
        out.append({"integral": f"I{k}", "max_rel_drift": float(dev / abs(ref) if ref != 0 else dev)})
    return out


def first_return_period(cfg: FiniteGapConfig, z0: FlowState, T_max: float, rtol=1e-12, atol=1e-12) -> float:
    """Time between the first two upward zero crossings of ``p_1`` along ``X_H`` (N=1 oscillators)."""
    sys = FlowSystem(cfg)
    N = cfg.N

    def ev(s, z):
        return z[N]

    ev.direction = 1.0
    sol = solve_ivp(sys.field((1.0, 0.0)), (0.0, T_max), np.array(list(map(float, z0.x)) + list(map(float, z0.p))),
                    method="RK45", rtol=rtol, atol=atol, events=[ev])
    te = [t for t in sol.t_events[0] if t > 0]
    if len(te) < 2:
        raise AlgebraError("fewer than two crossings; increase T_max")
    return float(te[1] - te[0])


def commuting_flows_defect(cfg: FiniteGapConfig, z0: FlowState, delta: float, rtol=1e-12, atol=1e-12) -> float:
    """Distance between (τ then t) and (t then τ) after steps of size ``delta``."""
    sys = FlowSystem(cfg)

    def run(state, direction):
        tr = flow(cfg, state, delta, direction, rtol=rtol, atol=atol, samples=2, system=sys)
        return tr.final

    a = run(run(z0, (1.0, 0.0)), (0.0, 1.0))
    b = run(run(z0, (0.0, 1.0)), (1.0, 0.0))
    return float(np.max(np.abs(np.array(list(a.x) + list(a.p)) - np.array(list(b.x) + list(b.p)))))


def oscillator_solution(x0: float, p0: float, s: float) -> tuple[float, float]:
    """Exact solution for ``I_0 = ½p² + x²``."""
    w = math.sqrt(2.0)
    return x0 * math.cos(w * s) + p0 / w * math.sin(w * s), -x0 * w * math.sin(w * s) + p0 * math.cos(w * s)
