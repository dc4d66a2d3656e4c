import json
import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dataclasses import replace

from acrelax.intervals import Interval
from acrelax.netmodel import load_case
from acrelax.oracle import lossy_asymmetric_network, three_bus_network, two_bus_network
from acrelax.relax import (ACPoint, ModelBuildError, NetworkBounds, RelaxModel, ac_feasibility_check, ac_objective,
                           add_lnc, branch_flows, build_model, build_qc, build_soc, lift_point)

QC_BUDGET = ("qc_ref", "qc_sqr", "qc_mc_vv", "qc_cos", "qc_sin", "qc_mc_cos", "qc_mc_sin")


def wide_generators(net):
    """Same network with generator limits wide enough that any mismatch is admissible."""
    gens = tuple(replace(g, p_min=-50.0, p_max=50.0, q_min=-50.0, q_max=50.0) for g in net.generators)
    return replace(net, generators=gens)


def point_from_angles(net, v, theta):
    """AC point whose generators (one per bus) absorb the nodal mismatch."""
    inj = {b.id: complex(b.p_demand, b.q_demand) + complex(b.shunt_g, -b.shunt_b) * v[b.id] ** 2 for b in net.buses}
    pt = ACPoint(v, theta, [0.0] * len(net.generators), [0.0] * len(net.generators))
    for br, (sf, st_) in zip(net.branches, branch_flows(net, pt)):
        inj[br.from_bus] += sf
        inj[br.to_bus] += st_
    for k, g in enumerate(net.generators):
        pt.pg[k], pt.qg[k] = inj[g.bus_id].real, inj[g.bus_id].imag
    return pt


def test_two_bus_soc_structure():
    m = build_soc(two_bus_network(), NetworkBounds.from_network(two_bus_network()))
    size = m.size()
    assert size["convex_by_family"] == {"soc": 1}
    assert size["linear_by_family"]["pad"] == 2


def test_case5_soc_structure():
    net = load_case("case5")
    m = build_model(net, "soc")
    assert sum(k.startswith("w_") for k in m.variables) == 5
    assert sum(k.startswith("wr_") for k in m.variables) == 6
    assert m.size()["convex_by_family"]["soc"] == 6


def test_unlimited_branch_has_no_thermal():
    m = build_model(two_bus_network(s_max=0.0), "soc")
    assert "thermal" not in m.size()["convex_by_family"]
    m = build_model(two_bus_network(s_max=2.0), "soc")
    assert m.size()["convex_by_family"]["thermal"] == 2


@pytest.mark.parametrize("net", [load_case("case5"), lossy_asymmetric_network(), three_bus_network()])
def test_qc_size_accounting(net):
    nv, ne = len(net.buses), len(net.edges())
    soc, qc = build_model(net, "soc").size(), build_model(net, "qc").size()
    assert qc["variables"] - soc["variables"] == 2 * nv + 5 * ne
    fam = qc["linear_by_family"]
    assert sum(fam.get(k, 0) for k in QC_BUDGET) == 1 + nv + 15 * ne
    assert qc["quadratic"] - soc["quadratic"] == nv + ne
    # the only other rows are the documented link and sin-chord families
    assert fam["qc_link"] == 2 * ne
    extra = qc["linear"] - soc["linear"] - (1 + nv + 15 * ne) - 2 * ne
    assert extra == fam.get("qc_sin_chord", 0)


def test_sin_chord_only_on_one_signed_pad():
    assert build_model(lossy_asymmetric_network(), "qc").size()["linear_by_family"]["qc_sin_chord"] == 1
    assert "qc_sin_chord" not in build_model(load_case("case5"), "qc").size()["linear_by_family"]


def test_add_lnc_counts_and_idempotence():
    net = load_case("case5")
    qc = build_model(net, "qc")
    once = add_lnc(qc, net)
    assert once.size()["linear"] - qc.size()["linear"] == 2 * len(net.edges()) == 12
    assert once.size()["variables"] == qc.size()["variables"]
    twice = add_lnc(once, net)
    assert twice.size() == once.size()
    assert qc.size()["linear_by_family"].get("lnc", 0) == 0  # input untouched


def test_add_lnc_symmetric_unit_edge():
    net = two_bus_network(v2=(1.0, 1.0), pad=(-0.4, 0.4))
    m = add_lnc(build_model(net, "soc"), net)
    rows = [r for r in m.linear if r.family == "lnc"]
    assert len(rows) == 2
    for r in rows:
        a = r.coeffs
        # 2 wr - cos(0.4) (w_1 + w_2) >= 0, up to positive scaling
        s = a["wr_1_2"] / 2
        assert s > 0
        assert a.get("wi_1_2", 0.0) == pytest.approx(0.0, abs=1e-15)
        assert a["w_1"] / s == pytest.approx(-math.cos(0.4), abs=1e-14)
        assert a["w_2"] / s == pytest.approx(-math.cos(0.4), abs=1e-14)
        assert r.rhs / s == pytest.approx(0.0, abs=1e-14)


def test_unknown_kind():
    with pytest.raises(ValueError):
        build_model(two_bus_network(), "sdp")


def test_infinite_bound_rejected():
    m = RelaxModel("soc")
    with pytest.raises(ModelBuildError):
        m.add_var("x", -math.inf, 1.0)


def test_model_json_round_trip():
    m = build_model(three_bus_network(), "qc-lnc")
    d = json.loads(m.to_json())
    assert len(d["linear"]) == m.size()["linear"]
    assert len(d["variables"]) == m.size()["variables"]


def test_feasibility_check_examples():
    net = two_bus_network()
    # lossless: theta_2 with sin = -0.1 carries exactly 1.0 pu into bus 2 at unit voltage
    th = -math.asin(0.1)
    pt = point_from_angles(net, {1: 1.0, 2: 1.0}, {1: 0.0, 2: th})
    rep = ac_feasibility_check(net, pt, tol=1e-6)
    assert rep["feasible"]
    assert ac_objective(net, pt) == pytest.approx(1.0, abs=1e-12)
    flipped = ACPoint(pt.v, {1: 0.0, 2: -th}, pt.pg, pt.qg)
    assert ac_feasibility_check(net, flipped, tol=1e-6)["residuals"]["balance"] > 1e-6
    zero = ACPoint({1: 0.0, 2: 0.0}, pt.theta, pt.pg, pt.qg)
    assert ac_feasibility_check(net, zero)["residuals"]["voltage"] > 0.5


@settings(max_examples=60, deadline=None)
@given(st.floats(0.9, 1.1), st.floats(-0.26, 0.26), st.floats(-0.26, 0.26))
def test_ac_points_satisfy_every_relaxation(v3, t2, t3):
    net = wide_generators(three_bus_network())
    pt = point_from_angles(net, {1: 1.0, 2: 1.0, 3: v3}, {1: 0.0, 2: t2, 3: t3})
    assume(ac_feasibility_check(net, pt, tol=0.0)["feasible"])
    for kind in ("soc", "qc", "qc-lnc"):
        m = build_model(net, kind)
        worst = m.check_point(lift_point(m, net, pt))
        assert max(worst.values()) <= 1e-9, (kind, worst)
        assert m.objective_value(lift_point(m, net, pt)) == pytest.approx(ac_objective(net, pt), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.82, 1.12), st.floats(0.88, 1.1), st.floats(0.25, 0.8))
def test_lossy_points_satisfy_every_relaxation(v2, v1, d):
    net = wide_generators(lossy_asymmetric_network())
    pt = point_from_angles(net, {1: v1, 2: v2}, {1: 0.0, 2: -d})
    assume(ac_feasibility_check(net, pt, tol=0.0)["feasible"])
    for kind in ("soc", "qc", "qc-lnc"):
        m = build_model(net, kind)
        assert max(m.check_point(lift_point(m, net, pt)).values()) <= 1e-9


def test_bounds_dict_round_trip():
    b = NetworkBounds.from_network(load_case("case5"))
    again = NetworkBounds.from_dict(json.loads(json.dumps(b.to_dict())))
    assert again.v == b.v and again.pad == b.pad
    assert again.subset_of(b)
    tighter = again.copy()
    tighter.v[1] = Interval(0.95, 1.05)
    assert tighter.subset_of(b) and not b.subset_of(tighter)
