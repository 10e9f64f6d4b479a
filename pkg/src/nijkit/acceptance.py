"""Acceptance criteria 1-10 as runnable checks.

Each ``criterion_k`` returns a :class:`CriterionResult`; ``run`` executes a
selection.  Randomised parts take a seed and are reproducible.
"""

from __future__ import annotations

import inspect
import itertools
import math
import os
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .algebra import AlgebraError, RationalFunction, rf, var
from .diffpoly import BracketSpec, JetSpace, first_jacobi_failure, jacobi_check, monomial_densities, sample_triples, skew_check
from .dsl import ParseError, parse_model, print_model
from .finite_gap import FiniteGapConfig, FlowState, build_integrals, flow, oscillator_solution, verify_commutation
from .fmanifold import (
    assoc_check,
    cyclic_determinant,
    decompose_symmetry,
    frobenius_check,
    hm_tensor,
    is_commutative,
    symmetry_structure,
    unity_check,
)
from .geometry import (
    Connection,
    geodesic_compat_check,
    killing_tensor_operator,
    killing_yano_operator,
    levi_civita,
    metrisability_operator,
    projective_change,
    riemann,
)
from .integrable import benenti_integrals, conservation_check, hierarchy, in_involution
from .tensors import (
    MetricField,
    OneForm,
    OperatorField,
    Tensor,
    companion_operator,
    is_strong_symmetry,
    nijenhuis_bracket,
    nijenhuis_torsion,
    verify_core_identities,
)

DEFAULT_SEED = 20240611


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    checks: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {status} {self.title} ({self.seconds:.1f}s)"


def _coords(n: int, base: str = "u") -> tuple[str, ...]:
    return tuple(f"{base}{i + 1}" for i in range(n))


def diagonal_operator(coords) -> OperatorField:
    n = len(coords)
    return OperatorField(coords, [[var(coords[i]) if i == j else 0 for j in range(n)] for i in range(n)])


def scalar_operator(coords, lam) -> OperatorField:
    n = len(coords)
    lam = rf(lam)
    return OperatorField(coords, [[lam if i == j else 0 for j in range(n)] for i in range(n)])


def separable_metric(coords) -> MetricField:
    """``g_ii = Π_{j≠i}(x_i − x_j)``, geodesically compatible with ``diag(x)``."""
    xs = [var(c) for c in coords]
    n = len(xs)
    comps = [[0] * n for _ in range(n)]
    for i in range(n):
        acc = RationalFunction(1)
        for j in range(n):
            if j != i:
                acc = acc * (xs[i] - xs[j])
        comps[i][i] = acc
    return MetricField(coords, comps)


def random_poly(rng: random.Random, coords, degree: int = 2, terms: int = 3) -> RationalFunction:
    acc = RationalFunction(0)
    for _ in range(terms):
        mono = RationalFunction(Fraction(rng.randint(-4, 4), rng.randint(1, 3)))
        for _ in range(rng.randint(0, degree)):
            mono = mono * var(rng.choice(coords))
        acc = acc + mono
    return acc


def random_operator(rng: random.Random, n: int) -> OperatorField:
    c = _coords(n)
    return OperatorField(c, [[random_poly(rng, c) for _ in range(n)] for _ in range(n)])


def _timed(fn, *args):
    t = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t


# --------------------------------------------------------------------------


def criterion_1(seed: int = DEFAULT_SEED) -> CriterionResult:
    checks = {}
    fixtures = []
    for n in range(2, 6):
        fixtures.append((f"companion_n{n}", companion_operator(_coords(n))))
    for n in range(1, 6):
        fixtures.append((f"diagonal_n{n}", diagonal_operator(_coords(n))))
    for n in range(1, 5):
        c = _coords(n)
        lam = sum((var(x) ** 2 for x in c), RationalFunction(0)) / (var(c[0]) + 3)
        fixtures.append((f"scalar_n{n}", scalar_operator(c, lam)))
    for name, L in fixtures:
        N, dt = _timed(nijenhuis_torsion, L)
        checks[name] = {"pass": N.is_zero() and dt < 5.0, "seconds": round(dt, 3)}
    rng = random.Random(seed)
    bad = []
    worst = 0.0
    for k in range(50):
        L = random_operator(rng, 2 + k % 2)
        t = time.perf_counter()
        ok = (nijenhuis_bracket(L, L) + nijenhuis_torsion(L)).is_zero()
        worst = max(worst, time.perf_counter() - t)
        if not ok:
            bad.append(k)
    checks["bracket_plus_torsion_random50"] = {"pass": not bad and worst < 5.0, "failures": bad, "max_seconds": round(worst, 3)}
    return CriterionResult(1, "torsion identities", all(v["pass"] for v in checks.values()), checks)


def criterion_2() -> CriterionResult:
    checks = {}
    for n in range(2, 5):
        for name, L in ((f"companion_n{n}", companion_operator(_coords(n))), (f"diagonal_n{n}", diagonal_operator(_coords(n)))):
            r = verify_core_identities(L)
            checks[name] = {"pass": r.det_identity and r.chi_identity, "det_identity": r.det_identity, "chi_identity": r.chi_identity}
    return CriterionResult(2, "core identities", all(v["pass"] for v in checks.values()), checks)


def criterion_3() -> CriterionResult:
    checks = {}
    for N in (2, 3):
        c = _coords(N, "x")
        g, L = separable_metric(c), diagonal_operator(c)
        ints = benenti_integrals(g, L)
        compat = geodesic_compat_check(g, L).holds
        inv = in_involution(ints)
        checks[f"N{N}"] = {"pass": compat and inv, "compatible": compat, "involution": inv}
    return CriterionResult(3, "Benenti commutation", all(v["pass"] for v in checks.values()), checks)


def criterion_4() -> CriterionResult:
    checks = {}
    for N in (2, 3):
        g = separable_metric(_coords(N, "x"))
        R, dt = _timed(lambda: riemann(levi_civita(g)))
        ok = R.is_zero() and (N < 3 or dt < 60.0)
        checks[f"N{N}"] = {"pass": ok, "flat": R.is_zero(), "seconds": round(dt, 3)}
    return CriterionResult(4, "flatness of the separable metric", all(v["pass"] for v in checks.values()), checks)


def _band_state(roots, signs, scale):
    """A point with each ``x_i`` inside its own band where ``−Π(t − r) > 0``."""
    xs, ps = [], []
    for k, (s, f) in enumerate(zip(signs, scale)):
        x = roots[2 * k] + 0.4 if k == 0 else roots[2 * k] + 0.7
        q = -math.prod(x - r for r in roots)
        xs.append(x)
        ps.append(s * f * math.sqrt(2 * q))
    return xs, ps


def flow_fixtures():
    """Bounded finite-gap configurations: every ``x_i`` oscillates in its own band."""
    r2, r3 = [0, 1, 2, 3], [0, 1, 2, 3, 4, 5]
    c2 = "t*(t-1)*(t-2)*(t-3)"
    c3 = "t*(t-1)*(t-2)*(t-3)*(t-4)*(t-5)"
    x2, p2 = _band_state(r2, (1, -1), (0.9, 1.05))
    x3, p3 = _band_state(r3, (1, -1, 1), (0.9, 1.05, 0.95))
    return [
        ("N2_free", FiniteGapConfig(2, 0, "0"), [0.0, 1.5], [0.3, -0.2]),
        ("N2", FiniteGapConfig(2, 0, c2), x2, p2),
        ("N2_m", FiniteGapConfig(2, 1, f"{c2}*(t+5)+1", "t+5"), x2, p2),
        ("N3", FiniteGapConfig(3, 0, c3), x3, p3),
        ("N3_m", FiniteGapConfig(3, 1, f"{c3}*(t+5)+1", "t+5"), x3, p3),
    ]


def criterion_5() -> CriterionResult:
    checks = {}
    cfg = FiniteGapConfig(1, 0, "t^2")
    x0, p0 = 1.0, 0.5
    tr = flow(cfg, FlowState([x0], [p0]), 10.0, samples=1001)
    err = max(
        max(abs(x - ex), abs(p - ep))
        for s, x, p in zip(tr.s, tr.x[:, 0], tr.p[:, 0])
        for ex, ep in [oscillator_solution(x0, p0, s)]
    )
    checks["oscillator"] = {"pass": bool(err < 1e-6), "max_error": float(err), "max_drift": tr.max_drift}
    for name, cfg, x, p in flow_fixtures():
        # free motion (V = 0) is unbounded and reaches a collision along X_F, so only X_H is run there
        for d in ((1.0, 0.0),) if name.endswith("free") else ((1.0, 0.0), (0.0, 1.0)):
            key = f"drift_{name}_{'H' if d[0] else 'F'}"
            try:
                tr = flow(cfg, FlowState(x, p), 10.0, d)
            except AlgebraError as exc:
                checks[key] = {"pass": False, "error": str(exc)}
                continue
            checks[key] = {"pass": bool(tr.max_drift < 1e-8), "max_drift": float(tr.max_drift)}
    for name, cfg in (
        ("N1", FiniteGapConfig(1, 1, "3+t^2+t^3", "t+2")),
        ("N2", FiniteGapConfig(2, 1, "1+t^2+t^5", "t+2")),
        ("N3", FiniteGapConfig(3, 1, "1+t^2+t^7", "t+2")),
    ):
        checks[f"commutation_{name}"] = {"pass": verify_commutation(build_integrals(cfg))}
    return CriterionResult(5, "finite-gap flows", all(v["pass"] for v in checks.values()), checks)


def jordan_example():
    c = ("u1", "u2")
    u1, u2 = var("u1"), var("u2")
    L = OperatorField(c, [[0, 1], [0, 0]])
    M = OperatorField(c, [[u2, u1], [0, u2]])
    return L, M


def criterion_6() -> CriterionResult:
    L, M = jordan_example()
    u1, u2 = var("u1"), var("u2")
    checks = {}
    g = decompose_symmetry(M, L)
    checks["g"] = {"pass": list(g) == [u1, u2], "value": [str(x) for x in g]}
    a, e, E = symmetry_structure(M, L)
    checks["unity"] = {"pass": list(e.comps) == [0, 1], "value": [str(x) for x in e.comps]}
    checks["euler"] = {"pass": list(E.comps) == [u1, u2], "value": [str(x) for x in E.comps]}
    checks["strong_symmetry"] = {"pass": is_strong_symmetry(L, M)}
    checks["commutative_associative"] = {"pass": is_commutative(a) and assoc_check(a)}
    checks["hertling_manin"] = {"pass": hm_tensor(a).is_zero()}
    checks["unity_lie"] = {"pass": unity_check(M, e)}
    cyc = cyclic_determinant(M, e)
    checks["cyclic"] = {"pass": cyc == -u1, "determinant": str(cyc)}
    rep = frobenius_check(a, e, E, OneForm(L.coords, [1, 0]), 0)
    checks["frobenius_du1"] = {"pass": rep.ok, **rep.as_dict()}
    return CriterionResult(6, "F-manifold worked example", all(v["pass"] for v in checks.values()), checks)


def criterion_7(seed: int = DEFAULT_SEED) -> CriterionResult:
    checks = {}
    c = ("u1", "u2")
    u1, u2 = var("u1"), var("u2")
    D = diagonal_operator(c)
    C = companion_operator(c)
    h = hierarchy(D, u1 + u2, 3)
    checks["diag_f2"] = {"pass": h.laws[1] == (u1**2 + u2**2) / 2}
    checks["diag_f3"] = {"pass": h.laws[2] == (u1**3 + u2**3) / 3}
    hc = hierarchy(C, u1, 2)
    checks["companion_f2"] = {"pass": hc.laws[1] == u2 - u1**2 / 2}
    rng = random.Random(seed)
    bad = []
    for k in range(100):
        f = random_poly(rng, ("u1",), 4, 3) + random_poly(rng, ("u2",), 4, 3)
        if not conservation_check(D, f).holds:
            bad.append(k)
    checks["random_separable_100"] = {"pass": not bad, "failures": bad}
    res = conservation_check(D, u1 * u2)
    checks["u1u2_counterexample"] = {
        "pass": not res.holds and res.residual[0, 1] == u2 - u1 and res.residual[1, 0] == u1 - u2,
        "residual_12": str(res.residual[0, 1]),
    }
    return CriterionResult(7, "conservation hierarchies", all(v["pass"] for v in checks.values()), checks)


def random_jet_polynomial(rng: random.Random, sp: JetSpace, degree: int = 6, max_order: int = 3) -> RationalFunction:
    """A random polynomial of total degree ≤ ``degree`` in ``u^i`` and jets up to ``max_order``."""
    names = [sp.jet(i, k) for i in range(sp.n) for k in range(max_order + 1)]
    acc = RationalFunction(0)
    for _ in range(rng.randint(1, 4)):
        mono = RationalFunction(Fraction(rng.randint(-6, 6) or 1, rng.randint(1, 5)))
        for _ in range(rng.randint(0, degree)):
            mono = mono * rng.choice(names)
        acc = acc + mono
    return acc


def non_killing_spec(rng: random.Random) -> BracketSpec:
    """Order 3, n = 1, ``g = a u + b`` with ``a ≠ 0`` and ``c = g'/2`` so skew-symmetry holds."""
    a = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.randint(1, 3))
    b = Fraction(rng.randint(1, 5), rng.randint(1, 3))
    g = var("u") * a + b
    return BracketSpec(3, ("u",), [[g]], [[[a / 2]]])


def criterion_8(seed: int = DEFAULT_SEED) -> CriterionResult:
    checks = {}
    rng = random.Random(seed)
    sp = JetSpace(("u1", "u2"))
    bad = []
    for k in range(200):
        H = random_jet_polynomial(rng, sp)
        if any(not x.is_zero() for x in sp.delta(sp.D(H))):
            bad.append(k)
    checks["delta_of_D_200"] = {"pass": not bad, "failures": bad}
    for name, coords, g in (("order1_n1", ("u",), [[1]]), ("order1_n2", ("u1", "u2"), [[1, 2], [2, -1]])):
        spec = BracketSpec(1, coords, g)
        spec.validate()
        samples = monomial_densities(spec.space, 4 if len(coords) == 1 else 2, 2)
        triples = sample_triples(samples, 30, seed)
        checks[name] = {"pass": skew_check(spec, samples) and jacobi_check(spec, triples)}
    for name, coords, g in (("darboux3_n1", ("u",), [[1]]), ("darboux3_n2", ("u1", "u2"), [[2, 1], [1, 1]])):
        spec = BracketSpec(3, coords, g)
        spec.validate()
        samples = monomial_densities(spec.space, 2, 2)
        triples = sample_triples(samples, 20, seed)
        checks[name] = {"pass": skew_check(spec, samples) and jacobi_check(spec, triples)}
    spec = non_killing_spec(random.Random(seed))
    samples = monomial_densities(spec.space, 2, 2)
    # exhaustive over the small basis; stops at the first failing triple
    fail = first_jacobi_failure(spec, itertools.combinations(samples, 3))
    checks["non_killing_order3_fails"] = {
        "pass": fail is not None and skew_check(spec, samples),
        "g": str(spec.g[0, 0]),
        "witness": None if fail is None else [str(x) for x in fail[0]],
    }
    return CriterionResult(8, "jet algebra and brackets", all(v["pass"] for v in checks.values()), checks)


def random_connection(rng: random.Random, coords) -> Connection:
    n = len(coords)
    G = np.empty((n, n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                G[i, j, k] = G[i, k, j] = random_poly(rng, coords, 1, 2)
    return Connection(coords, G)


def criterion_9(seed: int = DEFAULT_SEED) -> CriterionResult:
    rng = random.Random(seed)
    bad = {"metrisability": [], "killing_yano": [], "killing": []}
    for k in range(20):
        n = 2 + k % 2
        c = _coords(n)
        conn = random_connection(rng, c)
        phi = OneForm(c, [random_poly(rng, c, 1, 2) for _ in range(n)])
        bar = projective_change(conn, phi)
        S = np.empty((n, n), dtype=object)
        A = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(i, n):
                S[i, j] = S[j, i] = random_poly(rng, c, 2, 2)
                A[i, j] = random_poly(rng, c, 2, 2) if i != j else RationalFunction(0)
                A[j, i] = -A[i, j]
        sigma_up = Tensor(c, S, 2, 0, weight=-2)
        if metrisability_operator(sigma_up, conn) != metrisability_operator(sigma_up, bar):
            bad["metrisability"].append(k)
        if killing_yano_operator(A, conn, 3) != killing_yano_operator(A, bar, 3):
            bad["killing_yano"].append(k)
        if killing_tensor_operator(S, conn, 4) != killing_tensor_operator(S, bar, 4):
            bad["killing"].append(k)
    checks = {name: {"pass": not v, "failures": v} for name, v in bad.items()}
    return CriterionResult(9, "projective invariance", all(v["pass"] for v in checks.values()), checks)


def corpus_dir() -> Path:
    env = os.environ.get("NIJKIT_MODELS")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "models"


_TOKENS = [
    "dim", "coords", "operator", "metric", "vector", "oneform", "density", "poly", "tensor12",
    "=", ";", ",", "[", "]", "(", ")", "+", "-", "*", "/", "^", "#", "\n", " ",
    "u1", "u2", "x", "t", "u1_x", "u_x3", "0", "1", "2", "64", "65", "1/0", "9" * 40, "é", "\x00",
]


def fuzz_inputs(rng: random.Random, corpus: list[str], count: int):
    for k in range(count):
        mode = k % 3
        if mode == 0:
            yield bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 80)))
        elif mode == 1:
            yield "".join(rng.choice(_TOKENS) for _ in range(rng.randint(0, 40)))
        else:
            s = list(rng.choice(corpus))
            for _ in range(rng.randint(1, 4)):
                op = rng.randrange(3)
                pos = rng.randrange(len(s) + 1)
                if op == 0 and s:
                    del s[min(pos, len(s) - 1)]
                elif op == 1:
                    s.insert(pos, rng.choice(_TOKENS))
                elif s:
                    s[min(pos, len(s) - 1)] = chr(rng.randrange(32, 127))
            yield "".join(s)


def fuzz(count: int, seed: int = DEFAULT_SEED, corpus: list[str] | None = None) -> dict:
    rng = random.Random(seed)
    corpus = corpus or [p.read_text() for p in sorted(corpus_dir().glob("*.nij"))]
    ok = errors = 0
    crashes = []
    for src in fuzz_inputs(rng, corpus, count):
        try:
            parse_model(src)
            ok += 1
        except ParseError:
            errors += 1
        except Exception as exc:  # anything else is a crash
            crashes.append((repr(src)[:200], f"{type(exc).__name__}: {exc}"))
    return {"parsed": ok, "parse_errors": errors, "crashes": crashes}


def criterion_10(seed: int = DEFAULT_SEED, fuzz_count: int = 100_000) -> CriterionResult:
    checks = {}
    files = sorted(corpus_dir().glob("*.nij"))
    bad = []
    for p in files:
        text = p.read_text()
        once = print_model(parse_model(text))
        m2 = parse_model(once)
        if print_model(m2) != once or m2 != parse_model(text):
            bad.append(p.name)
    checks["round_trip"] = {"pass": bool(files) and not bad, "files": len(files), "failures": bad}
    f = fuzz(fuzz_count, seed, [p.read_text() for p in files])
    checks["fuzz"] = {"pass": not f["crashes"], "inputs": fuzz_count, **f, "crashes": f["crashes"][:5]}
    return CriterionResult(10, "parser round trip and fuzzing", all(v["pass"] for v in checks.values()), checks)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_criterion(k: int, **kwargs) -> CriterionResult:
    fn = CRITERIA[k]
    params = inspect.signature(fn).parameters
    t = time.perf_counter()
    res = fn(**{k: v for k, v in kwargs.items() if k in params})
    res.seconds = time.perf_counter() - t
    return res


def run(selection=None, **kwargs) -> list[CriterionResult]:
    return [run_criterion(k, **kwargs) for k in (selection or sorted(CRITERIA))]
