"""Command-line front end.

Every command prints a JSON report with ``"schema": 1`` and exits with 0 when
all checks pass, 1 when a check fails, 2 on usage or parse errors and 3 on
internal errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import acceptance
from .algebra import AlgebraError, RationalFunction, rf
from .diffpoly import BracketSpec, InvalidBracketError, first_jacobi_failure, monomial_densities, random_densities, sample_triples, skew_residuals
from .dsl import ParseError, parse_expression, parse_model
from .finite_gap import FiniteGapConfig, FlowState, build_integrals, flow, oscillator_solution, verify_commutation
from .fmanifold import f_manifold_check, frobenius_check, symmetry_structure
from .geometry import (
    Connection,
    geodesic_compat_check,
    is_flat,
    killing_check,
    killing_tensor_operator,
    killing_yano_check,
    killing_yano_operator,
    levi_civita,
    metrisability_operator,
    projective_change,
)
from .integrable import benenti_integrals, conservation_check, hierarchy, in_involution
from .tensors import Tensor, is_nijenhuis, is_strong_symmetry, nijenhuis_torsion, regularity_report, verify_core_identities

SCHEMA = 1
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Report:
    def __init__(self, command: str, model: str | None = None):
        self.command = command
        self.model = model
        self.checks: list[dict] = []
        self.data: dict = {}

    def check(self, name: str, fn):
        """Run ``fn() -> (bool, residual)`` and record the outcome."""
        t = time.perf_counter()
        try:
            ok, residual = fn()
            status = "pass" if ok else "fail"
        except (AlgebraError, ValueError, ZeroDivisionError) as exc:
            status, residual = "error", f"{type(exc).__name__}: {exc}"
        self.checks.append({"name": name, "status": status, "residual": _summary(residual), "seconds": round(time.perf_counter() - t, 6)})
        return status == "pass"

    def add(self, name: str, passed: bool, residual=None, seconds: float = 0.0):
        self.checks.append({"name": name, "status": "pass" if passed else "fail", "residual": _summary(residual), "seconds": round(seconds, 6)})

    @property
    def passed(self) -> bool:
        return all(c["status"] == "pass" for c in self.checks)

    def as_dict(self) -> dict:
        out = {
            "schema": SCHEMA,
            "command": self.command,
            "model": self.model,
            "passed": self.passed,
            "checks": sorted(self.checks, key=lambda c: c["name"]),
        }
        if self.data:
            out["data"] = self.data
        return out


def _summary(residual):
    if residual is None or isinstance(residual, (bool, int, float, str)):
        return residual
    if isinstance(residual, RationalFunction):
        return str(residual)
    if isinstance(residual, Tensor):
        nz = residual.nonzero()
        return {"nonzero": len(nz), "components": {",".join(map(str, k)): str(v) for k, v in list(nz.items())[:8]}}
    if isinstance(residual, dict):
        return {str(k): _summary(v) for k, v in residual.items()}
    if isinstance(residual, (list, tuple)):
        return [_summary(v) for v in residual]
    return str(residual)


# --------------------------------------------------------------------------
# argument helpers


def _load(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    try:
        return parse_model(data)
    except ParseError as exc:
        raise ParseError(exc.line, exc.column, f"{path}: {exc.message}", exc.expected) from None


def _field(model, name: str, kind: str | None = None):
    try:
        model.get(name, kind)
    except (KeyError, TypeError) as exc:
        raise UsageError(str(exc.args[0])) from None
    return model.field(name)


def _floats(text: str | None, name: str) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _fractions(text: str | None, name: str) -> list[Fraction] | None:
    if text is None:
        return None
    try:
        return [Fraction(v.strip()) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--{name} expects comma-separated rationals, got {text!r}") from None


def _literal(kind: str, text: str, coords) -> object:
    """Parse a matrix or array literal by wrapping it in a one-item model."""
    src = f"dim {len(coords)}; coords {' '.join(coords)}; {kind} x = {text};"
    return parse_model(src).field("x")


def _connection(model, metric: str | None):
    if metric:
        return levi_civita(_field(model, metric, "metric"))
    return Connection.flat(model.coords)


# --------------------------------------------------------------------------
# commands


def cmd_check(args) -> Report:
    model = _load(args.file)
    L = _field(model, args.operator, "operator")
    rep = Report(f"check {args.what}", args.file)
    if args.what == "torsion":
        rep.check("torsion_zero", lambda: (lambda N: (N.is_zero(), N))(nijenhuis_torsion(L)))
    elif args.what == "identities":
        r = verify_core_identities(L)
        rep.add("det_identity", r.det_identity, r.residuals.get("det"))
        rep.add("chi_identity", r.chi_identity, r.residuals.get("chi"))
        rep.add("companion_identity", r.companion_identity, r.residuals.get("companion"))
    else:
        point = _fractions(args.point, "point")
        if point is None:
            raise UsageError("check regularity needs --point")
        if len(point) != L.n:
            raise UsageError(f"--point needs {L.n} coordinates")
        r = regularity_report(L, point)
        rep.add("nijenhuis", is_nijenhuis(L))
        rep.data = {"gl_regular": r.gl_regular, "diff_nondegenerate": r.diff_nondegenerate, "scalar_type": r.scalar_type}
        rep.add("gl_regular", r.gl_regular)
    return rep


def cmd_benenti(args) -> Report:
    model = _load(args.file)
    g = _field(model, args.metric, "metric")
    L = _field(model, args.operator, "operator")
    rep = Report("benenti", args.file)
    compat = geodesic_compat_check(g, L)
    rep.add("geodesic_compatibility", compat.holds, compat.residual)
    ints = benenti_integrals(g, L, check=False)
    rep.data = {"integrals": [str(I) for I in ints]}
    rep.add("involution", in_involution(ints))
    return rep


def cmd_conservation(args) -> Report:
    model = _load(args.file)
    L = _field(model, args.operator, "operator")
    try:
        f = parse_expression(args.law)
    except ParseError as exc:
        raise ParseError(exc.line, exc.column, f"--law: {exc.message}", exc.expected) from None
    unknown = set(f.variables) - set(model.coords)
    if unknown:
        raise UsageError(f"--law uses undeclared symbols {sorted(unknown)}")
    rep = Report("conservation", args.file)
    res = conservation_check(L, f)
    rep.add("conserved", res.holds, {f"{i + 1}{j + 1}": str(res.residual[i, j]) for i in range(L.n) for j in range(i + 1, L.n) if not res.residual[i, j].is_zero()})
    if args.hierarchy and res.holds:

        def run():
            h = hierarchy(L, f, args.hierarchy)
            rep.data = {"laws": [str(x) for x in h.laws]}
            return h.verify(), None

        rep.check("hierarchy", run)
    return rep


def _finitegap_config(args) -> FiniteGapConfig:
    try:
        C = parse_expression(args.C)
        m = parse_expression(args.m)
    except ParseError as exc:
        raise ParseError(exc.line, exc.column, f"--C/--m: {exc.message}", exc.expected) from None
    n = args.n
    if n is None:
        n = max(0, _degree(m))
    return FiniteGapConfig(args.N, n, C, m, _fractions(args.lam, "lambda"), _fractions(args.mu, "mu"))


def _degree(p: RationalFunction) -> int:
    return p.numerator().degree("t") if "t" in p.variables else 0


def cmd_finitegap(args) -> Report:
    try:
        cfg = _finitegap_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = Report(f"finitegap {args.what}")
    ints = build_integrals(cfg)
    if args.what == "build":
        rep.data = {"integrals": [str(I) for I in ints], "V": str(cfg.V)}
        rep.check("commutation", lambda: (verify_commutation(ints), None))
        return rep
    N = cfg.N
    x0 = _floats(args.x0, "x0") or [float(i + 1) for i in range(N)]
    p0 = _floats(args.p0, "p0") or [0.5] * N
    direction = _floats(args.direction, "direction")
    if len(direction) != 2:
        raise UsageError("--direction expects two numbers a,b")
    if len(x0) != N or len(p0) != N:
        raise UsageError(f"--x0 and --p0 need {N} values each")
    a, b = direction
    z0 = FlowState(x0, p0, tau=a * args.t0, t=b * args.t0)
    tr = flow(cfg, z0, args.T, (a, b), rtol=args.tol, atol=args.tol, samples=args.samples)
    rep.add("drift", tr.max_drift < args.drift_tol, {"max_rel_drift": tr.max_drift, "tolerance": args.drift_tol})
    if N == 1 and cfg.V == rf("t^2") and direction == [1.0, 0.0]:
        err = max(
            max(abs(x - ex), abs(p - ep))
            for s, x, p in zip(tr.s, tr.x[:, 0], tr.p[:, 0])
            for ex, ep in [oscillator_solution(x0[0], p0[0], float(s))]
        )
        rep.add("oscillator_closed_form", err < 1e-6, {"max_error": err})
    rep.data = {"drift": tr.drift, "final": {"x": list(map(float, tr.x[-1])), "p": list(map(float, tr.p[-1]))}}
    if args.csv:
        Path(args.csv).write_text(tr.to_csv())
        rep.data["csv"] = args.csv
    if args.drift:
        Path(args.drift).write_text(tr.drift_json())
        rep.data["drift_file"] = args.drift
    return rep


def cmd_fmanifold(args) -> Report:
    model = _load(args.file)
    rep = Report(f"fmanifold {args.what}", args.file)
    if args.what == "construct":
        L = _field(model, args.operator, "operator")
        M = _field(model, args.symmetry, "operator")
        rep.add("strong_symmetry", is_strong_symmetry(L, M))
        a, e, E = symmetry_structure(M, L)
        rep.data = {"unity": [str(x) for x in e.comps], "euler": [str(x) for x in E.comps]}
    else:
        a = _field(model, args.product, "tensor12")
        e = _field(model, args.unity, "vector")
        E = _field(model, args.euler, "vector")
    r = f_manifold_check(a, e, E)
    for name, value in vars(r).items():
        rep.add(f"f_{name}", value)
    if args.alpha:
        alpha = _field(model, args.alpha, "oneform")
        fr = frobenius_check(a, e, E, alpha, Fraction(args.d))
        for k in (1, 2, 3, 4):
            rep.add(f"frobenius_cond{k}", getattr(fr, f"cond{k}"))
        rep.data["frobenius"] = fr.as_dict()
    return rep


def cmd_poisson(args) -> Report:
    if args.file:
        model = _load(args.file)
        coords = model.coords
    else:
        model = None
        coords = None
    g_src = args.g
    if coords is None:
        n = _literal_dim(g_src)
        coords = ("u",) if n == 1 else tuple(f"u{i + 1}" for i in range(n))
    if model is not None and g_src in model.items:
        g = model.items[g_src].value
    else:
        g = _literal("operator", g_src, coords).comps
    c = None
    if args.c:
        c = model.items[args.c].value if model is not None and args.c in model.items else _literal("tensor12", args.c, coords).comps
    rep = Report("poisson check", args.file)
    spec = BracketSpec(args.order, coords, g, c)
    try:
        spec.validate()
        rep.add("geometric_conditions", True)
    except InvalidBracketError as exc:
        rep.add("geometric_conditions", False, str(exc))
    samples = monomial_densities(spec.space, args.degree, 2)
    samples += random_densities(spec.space, 4, args.seed, max_diff_degree=min(args.degree, 2))
    skew = skew_residuals(spec, samples)
    rep.add("skew", not skew, None if not skew else {"pair": [str(samples[skew[0][0]]), str(samples[skew[0][1]])], "delta": [str(x) for x in skew[0][2]]})
    triples = sample_triples(samples, args.samples, args.seed)
    fail = first_jacobi_failure(spec, triples)
    rep.add("jacobi", fail is None, None if fail is None else {"triple": [str(x) for x in fail[0]], "delta": [str(x) for x in fail[1]]})
    rep.data = {"samples": len(samples), "triples": len(triples), "seed": args.seed}
    return rep


def _literal_dim(text: str) -> int:
    depth = 0
    rows = 0
    for ch in text:
        if ch == "[":
            depth += 1
            if depth == 2:
                rows += 1
        elif ch == "]":
            depth -= 1
    if rows == 0:
        raise UsageError(f"--g must be a matrix literal such as [[1]], got {text!r}")
    return rows


def cmd_geometry(args) -> Report:
    model = _load(args.file)
    rep = Report(f"geometry {args.what}", args.file)
    if args.what == "compat":
        g = _field(model, args.metric or "g", "metric")
        L = _field(model, args.operator, "operator")
        r = geodesic_compat_check(g, L)
        rep.add("geodesic_compatibility", r.holds, r.residual)
        return rep
    if args.what == "flat":
        g = _field(model, args.metric or "g", "metric")
        rep.check("flat", lambda: (is_flat(levi_civita(g)), None))
        return rep
    conn = _connection(model, args.metric)
    sigma = _field(model, args.tensor)
    comps = sigma.comps if hasattr(sigma, "comps") else sigma
    if args.what == "killing":
        r = killing_check(comps, conn, args.weight)
        rep.add("killing", r.holds, r.residual)
    elif args.what == "killingyano":
        r = killing_yano_check(comps, conn, args.weight)
        rep.add("killing_yano", r.holds, r.residual)
    elif args.what == "metrisability":
        op = metrisability_operator(Tensor(model.coords, comps, 2, 0, weight=-2), conn)
        rep.add("metrisability", op.is_zero(), op)
    else:
        if not args.phi:
            raise UsageError("geometry projinv needs --phi")
        phi = _field(model, args.phi, "oneform")
        bar = projective_change(conn, phi)
        ops = {
            "killing_w4": lambda cn: killing_tensor_operator(comps, cn, 4),
            "killing_yano_w3": lambda cn: killing_yano_operator(comps, cn, 3),
            "metrisability_wm2": lambda cn: metrisability_operator(Tensor(model.coords, comps, 2, 0, weight=-2), cn),
        }
        kinds = {"killing": ["killing_w4"], "killingyano": ["killing_yano_w3"], "metrisability": ["metrisability_wm2"]}[args.kind]
        for name in kinds:
            before, after = ops[name](conn), ops[name](bar)
            rep.add(f"invariant_{name}", before == after, after - before)
    return rep


def cmd_acceptance(args) -> Report:
    rep = Report("acceptance")
    selection = args.criterion or sorted(acceptance.CRITERIA)
    for k in selection:
        if k not in acceptance.CRITERIA:
            raise UsageError(f"no criterion {k}; choose from 1-{len(acceptance.CRITERIA)}")
    results = {}
    for k in selection:
        r = acceptance.run_criterion(k, seed=args.seed, fuzz_count=args.fuzz_count)
        print(r.line(), file=sys.stderr)
        rep.add(f"criterion_{k:02d}", r.passed, None, r.seconds)
        results[str(k)] = {"title": r.title, "passed": r.passed, "checks": r.checks}
    rep.data = json.loads(json.dumps(results, default=_json_default))
    return rep


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return str(o)


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nijkit", description="Verification toolkit for Nijenhuis geometry and integrable systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="torsion, core identities or regularity of an operator")
    c.add_argument("what", choices=["torsion", "identities", "regularity"])
    c.add_argument("file")
    c.add_argument("--operator", default="L")
    c.add_argument("--point", help="comma-separated rational coordinates")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("benenti", help="integrals of a geodesically compatible pair")
    b.add_argument("file")
    b.add_argument("--metric", default="g")
    b.add_argument("--operator", default="L")
    b.set_defaults(func=cmd_benenti)

    cv = sub.add_parser("conservation", help="conservation law check and hierarchy")
    cv.add_argument("file")
    cv.add_argument("--operator", default="L")
    cv.add_argument("--law", required=True)
    cv.add_argument("--hierarchy", type=int, default=0, metavar="K")
    cv.set_defaults(func=cmd_conservation)

    f = sub.add_parser("finitegap", help="finite-gap integrals and flows")
    f.add_argument("what", choices=["build", "flow"])
    f.add_argument("--N", type=int, required=True)
    f.add_argument("--C", required=True, help="polynomial in t")
    f.add_argument("--m", default="1", help="polynomial in t")
    f.add_argument("--n", type=int, default=None, help="degree bound for m (default deg m)")
    f.add_argument("--lambda", dest="lam", help="weights of F")
    f.add_argument("--mu", help="weights of H")
    f.add_argument("--x0")
    f.add_argument("--p0")
    f.add_argument("--t0", type=float, default=0.0, help="flow parameter at the initial point")
    f.add_argument("--T", type=float, default=10.0)
    f.add_argument("--tol", type=float, default=1e-12)
    f.add_argument("--direction", default="1,0", help="a,b for a X_H + b X_F")
    f.add_argument("--samples", type=int, default=201)
    f.add_argument("--drift-tol", type=float, default=1e-8)
    f.add_argument("--csv", help="write the trajectory here")
    f.add_argument("--drift", help="write the drift report (JSON) here")
    f.set_defaults(func=cmd_finitegap)

    fm = sub.add_parser("fmanifold", help="F-manifold and Frobenius checks")
    fm.add_argument("what", choices=["check", "construct"])
    fm.add_argument("file")
    fm.add_argument("--product", default="a")
    fm.add_argument("--unity", default="e")
    fm.add_argument("--euler", default="E")
    fm.add_argument("--operator", default="L")
    fm.add_argument("--symmetry", default="M")
    fm.add_argument("--alpha")
    fm.add_argument("--d", default="0")
    fm.set_defaults(func=cmd_fmanifold)

    po = sub.add_parser("poisson", help="skew-symmetry and Jacobi sampling of geometric brackets")
    po.add_argument("what", choices=["check"])
    po.add_argument("file", nargs="?")
    po.add_argument("--order", type=int, required=True, choices=[1, 2, 3])
    po.add_argument("--g", required=True, help="matrix literal or item name")
    po.add_argument("--c", help="order-3 coefficients: nested literal or item name")
    po.add_argument("--degree", type=int, default=2)
    po.add_argument("--samples", type=int, default=20)
    po.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    po.set_defaults(func=cmd_poisson)

    ge = sub.add_parser("geometry", help="Killing-type equations, projective invariance, compatibility")
    ge.add_argument("what", choices=["killing", "killingyano", "metrisability", "projinv", "compat", "flat"])
    ge.add_argument("file")
    ge.add_argument("--tensor", default="sigma")
    ge.add_argument("--metric", help="use its Levi-Civita connection (default: flat)")
    ge.add_argument("--operator", default="L")
    ge.add_argument("--weight", type=int, default=0)
    ge.add_argument("--phi")
    ge.add_argument("--kind", choices=["killing", "killingyano", "metrisability"], default="killing")
    ge.set_defaults(func=cmd_geometry)

    ac = sub.add_parser("acceptance", help="run acceptance criteria")
    ac.add_argument("--criterion", type=int, action="append")
    ac.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    ac.add_argument("--fuzz-count", type=int, default=100_000)
    ac.set_defaults(func=cmd_acceptance)
    return p


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "what", None) == "flow" and args.T <= 0:
            raise UsageError("--T must be positive")
        rep = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AlgebraError as exc:
        # a mathematical obstruction (collision, pole, singular data) is a failed check
        rep = Report(" ".join(a for a in (argv or sys.argv[1:])[:2]))
        rep.checks.append({"name": "run", "status": "error", "residual": f"{type(exc).__name__}: {exc}", "seconds": 0.0})
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    json.dump(rep.as_dict(), out, indent=2, default=_json_default)
    out.write("\n")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def main():
    sys.exit(run())
