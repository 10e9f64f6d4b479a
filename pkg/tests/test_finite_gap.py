import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nijkit.acceptance import flow_fixtures
from nijkit.algebra import AlgebraError, inverse, var
from nijkit.finite_gap import (
    CollisionError,
    ComplexRootsError,
    ConfigError,
    FiniteGapConfig,
    FlowState,
    FlowSystem,
    build_integrals,
    commuting_flows_defect,
    companion_and_diag_forms,
    conjugation_check,
    first_return_period,
    flow,
    oscillator_solution,
    pole_loci,
    verify_commutation,
    w_to_x,
    x_to_w,
)
from nijkit.geometry import is_flat, levi_civita
from nijkit.integrable import PhaseFunction
from nijkit.tensors import MetricField, nijenhuis_torsion

x1, x2, x3, p1, p2 = var("x1"), var("x2"), var("x3"), var("p1"), var("p2")


def test_single_gap_integral():
    (I0,) = build_integrals(FiniteGapConfig(1, 0, "t^2"))
    assert I0 == p1**2 / 2 + x1**2


def test_two_gap_free_integrals():
    I = build_integrals(FiniteGapConfig(2, 0, "0"))
    assert I[0] == (p1**2 / 2 - p2**2 / 2) / (x1 - x2)
    assert I[1] == (-x2 * p1**2 / 2 + x1 * p2**2 / 2) / (x1 - x2)


def test_kdv_style_configuration_commutes():
    cfg = FiniteGapConfig(2, 1, "1 + 2*t^2 - t^3 + 3*t^4 + t^5", "7")
    assert verify_commutation(build_integrals(cfg))


@pytest.mark.parametrize("N,C,n,m", [(2, "t^2", 0, "1"), (3, "0", 0, "1"), (2, "t^3+1", 1, "t+2"), (3, "t^5-t", 1, "t-3")])
def test_commutation(N, C, n, m):
    assert verify_commutation(build_integrals(FiniteGapConfig(N, n, C, m)))


def test_perturbed_integrals_fail_to_commute():
    I = build_integrals(FiniteGapConfig(2, 0, "t^2"))
    I[1] = I[1] + PhaseFunction.of(x1, I[1].coords)
    assert not verify_commutation(I)


def test_pole_loci():
    assert pole_loci(FiniteGapConfig(2, 1, "t^3", "t+2")) == [x1 + 2, x2 + 2]
    assert pole_loci(FiniteGapConfig(2, 0, "t^3")) == []


@pytest.mark.parametrize("args", [(0, 0, "1"), (1, 0, "t^3"), (1, 0, "t", "0"), (1, 0, "t", "t"), (2, 0, "t", "1", [1])])
def test_config_bounds(args):
    with pytest.raises(ConfigError):
        FiniteGapConfig(*args)


def test_x_w_examples():
    a, b = var("a"), var("b")
    assert x_to_w([a, b]) == [-(a + b), a * b]
    assert x_to_w([1, 3]) == [-4, 3]
    assert w_to_x([-4, 3]) == pytest.approx([1, 3])
    with pytest.raises(ComplexRootsError) as e:
        w_to_x([0, 1])
    assert e.value.discriminant < 0


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=4, unique=True))
def test_x_w_round_trip(xs):
    assert w_to_x(x_to_w(xs)) == pytest.approx(sorted(xs), abs=1e-8)


def test_normal_forms():
    comp, diag = companion_and_diag_forms(2)
    w1, w2 = var("w1"), var("w2")
    assert list(comp.comps.flat) == [-w1, 1, -w2, 0]
    assert diag.comps[0, 0] == x1 and diag.comps[1, 1] == x2 and diag.comps[0, 1] == 0
    assert nijenhuis_torsion(comp).is_zero() and nijenhuis_torsion(diag).is_zero()
    assert all(conjugation_check(N) for N in (1, 2, 3))


@pytest.mark.parametrize("N", [2, 3])
def test_free_kinetic_metric_is_flat(N):
    I0 = build_integrals(FiniteGapConfig(N, 0, "0"))[0]
    g = MetricField(I0.coords, inverse(I0.quadratic_form()))
    assert is_flat(levi_civita(g))


def test_oscillator_matches_closed_form_and_period():
    cfg = FiniteGapConfig(1, 0, "t^2")
    tr = flow(cfg, FlowState([1.0], [0.5]), 10.0, samples=401)
    exact = np.array([oscillator_solution(1.0, 0.5, s) for s in tr.s])
    assert np.max(np.abs(tr.x[:, 0] - exact[:, 0])) < 1e-6
    assert np.max(np.abs(tr.p[:, 0] - exact[:, 1])) < 1e-6
    T = first_return_period(cfg, FlowState([1.0], [0.5]), 20.0)
    assert abs(T - 2 * math.pi / math.sqrt(2)) < 1e-6


def test_vector_field_routes_agree():
    rng = np.random.default_rng(7)
    for name, cfg, x, p in flow_fixtures():
        fast, exact = FlowSystem(cfg), FlowSystem(cfg, route="exact")
        for d in ((1.0, 0.0), (0.0, 1.0), (0.3, -1.2)):
            z = np.array(list(x) + list(p)) + rng.normal(scale=0.01, size=2 * cfg.N)
            a, b = fast.field(d)(0, z), exact.field(d)(0, z)
            assert np.allclose(a, b, rtol=1e-9, atol=1e-9), name


def test_free_two_gap_drift():
    cfg = FiniteGapConfig(2, 0, "0")
    tr = flow(cfg, FlowState([0.0, 1.5], [0.3, -0.2]), 10.0)
    assert tr.max_drift < 1e-8
    assert [d["integral"] for d in tr.drift] == ["I0", "I1"]


def test_collision_start_is_rejected():
    with pytest.raises(CollisionError):
        flow(FiniteGapConfig(2, 0, "0"), FlowState([1.0, 1.0 + 1e-13], [0.1, 0.2]), 1.0)


def test_collision_during_flow_reports_time():
    # equal and opposite velocities bring the coordinates together
    cfg = FiniteGapConfig(2, 0, "0")
    with pytest.raises(AlgebraError):
        flow(cfg, FlowState([0.0, 1.5], [0.3, -0.2]), 10.0, direction=(0.0, 1.0))


def test_state_shape_is_checked():
    with pytest.raises(ConfigError):
        flow(FiniteGapConfig(2, 0, "0"), FlowState([1.0], [0.0]), 1.0)


def test_flows_commute():
    name, cfg, x, p = flow_fixtures()[1]
    assert commuting_flows_defect(cfg, FlowState(x, p), 0.05) < 1e-9


def test_trajectory_outputs():
    cfg = FiniteGapConfig(2, 0, "0")
    tr = flow(cfg, FlowState([0.0, 1.5], [0.3, -0.2], tau=1.0, t=2.0), 1.0, samples=5)
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["tau", "t", "x1", "x2", "p1", "p2", "I0", "I1"]
    assert len(rows) == 6
    assert float(rows[1][0]) == 1.0 and float(rows[-1][0]) == 2.0 and float(rows[-1][1]) == 2.0
    report = json.loads(tr.drift_json())
    assert set(report[0]) == {"integral", "max_rel_drift"}
