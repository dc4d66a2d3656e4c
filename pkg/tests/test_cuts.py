import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrelax.cuts import (ChenConstants, LinearCut, NLCutConstants, UnsupportedCaseError, check_dominance,
                          chen_constants, chen_constants_tan, chen_cuts, chen_f, chen_g, cuts_csv, cuts_for_edge,
                          extreme_cut, extreme_points, lifted_box, lnc_cuts, nl_cut_constants, nl_cut_value,
                          normalize, wbound_cut)
from acrelax.intervals import Interval, edge_params
from acrelax.oracle import sample_sp

from conftest import symmetric_unit

# values computed independently in 30-digit arithmetic from the closed-form constant definitions
C11 = 2.672863633
C13 = -1.558845727
C14 = -2.182384018
C15 = 0.4988306326
C23 = -1.247076581
PI3 = 3.0863570759
F_WORKED = 0.8164965809


def test_extreme_cut_worked(worked):
    c = extreme_cut(worked, "i")
    assert c.sense == "<="
    wr, wi, w_i, w_j = c.coef
    assert wr == pytest.approx(-1.484924, abs=1e-6)
    assert wi == pytest.approx(-1.484924, abs=1e-6)
    assert w_i == pytest.approx(0.692820, abs=1e-6)
    assert w_j == 0.0
    assert c.constant == pytest.approx(0.748246, abs=1e-6)


def test_extreme_point_one_active(worked):
    # point 1: w_i=(v_i^l)^2, (wr, wi) = v_i^l v_j^l (cos, sin)(phi - delta)
    exact = np.array([0.72 * math.cos(math.pi / 12), 0.72 * math.sin(math.pi / 12), 0.81, 0.64])
    assert abs(extreme_cut(worked, "i").slack(exact)) <= 1e-12
    assert extreme_points(worked, "i")[0] == pytest.approx(exact, abs=1e-15)
    # the 6-decimal rounding of the same point is active up to the rounding error it carries
    rounded = np.array([0.695467, 0.186350, 0.81, 0.64])
    assert abs(extreme_cut(worked, "i").slack(rounded)) <= (1.485 + 1.485) * 5e-7 + 1e-12


@pytest.mark.parametrize("side", ["i", "j"])
def test_all_extreme_points_active(worked, side):
    s = extreme_cut(worked, side).slack(extreme_points(worked, side))
    assert np.max(np.abs(s)) <= 1e-12


def test_extreme_unit_symmetric():
    tm = 0.6
    c = extreme_cut(symmetric_unit(tm), "i")
    assert c.coef == pytest.approx((-2.0, 0.0, math.cos(tm), 0.0))
    assert c.constant == pytest.approx(math.cos(tm))
    # at w_i = 1 the cut reads w^R >= cos(tm)
    assert c.slack(np.array([math.cos(tm), 0.0, 1.0, 1.0])) == pytest.approx(0.0, abs=1e-15)


def test_vub_constants_worked(worked):
    c = nl_cut_constants(worked, "VUB")
    assert c.as_tuple() == pytest.approx((C11, C11, C13, C14, C15), abs=1e-8)


def test_vub_unit_symmetric():
    tm = 0.5
    c = nl_cut_constants(symmetric_unit(tm), "VUB")
    assert c.as_tuple() == pytest.approx((4.0, 0.0, -2 * math.cos(tm), -2 * math.cos(tm), 0.0), abs=1e-15)


def test_vlb_c23_worked(worked):
    assert nl_cut_constants(worked, "VLB").c3 == pytest.approx(C23, abs=1e-8)


def test_vub_requires_negative_c4():
    with pytest.raises(ValueError):
        NLCutConstants(1.0, 0.0, -1.0, 0.5, 0.0, "VUB")


def test_lnc_worked(worked):
    l1, _ = lnc_cuts(worked)
    assert l1.sense == ">="
    assert l1.coef == pytest.approx((C11, C11, C13, C14), abs=1e-8)
    assert l1.rhs == pytest.approx(-C15, abs=1e-8)


def test_lnc_unit_reduction():
    tm = 0.7
    for c in lnc_cuts(symmetric_unit(tm)):
        n = normalize(c)
        ref = normalize(LinearCut((2.0, 0.0, -math.cos(tm), -math.cos(tm)), 0.0, ">="))
        assert n.coef == pytest.approx(ref.coef, abs=1e-15)
        assert n.rhs == pytest.approx(0.0, abs=1e-15)


def test_lnc2_with_wj_at_lower_bound_is_extreme_i(worked):
    l2 = lnc_cuts(worked)[1]
    wjl = worked.vj.lo ** 2
    reduced = LinearCut((l2.coef[0], l2.coef[1], l2.coef[2], 0.0), l2.rhs - l2.coef[3] * wjl, ">=")
    assert normalize(reduced).coef == pytest.approx(normalize(extreme_cut(worked, "i")).coef, abs=1e-12)
    assert normalize(reduced).rhs == pytest.approx(normalize(extreme_cut(worked, "i")).rhs, abs=1e-12)


def test_lnc2_with_wi_at_lower_bound_is_extreme_j(worked):
    # the w_j-side extreme cut also comes from the second (lower-voltage) cut
    l2 = lnc_cuts(worked)[1]
    wil = worked.vi.lo ** 2
    reduced = LinearCut((l2.coef[0], l2.coef[1], 0.0, l2.coef[3]), l2.rhs - l2.coef[2] * wil, ">=")
    assert normalize(reduced).coef == pytest.approx(normalize(extreme_cut(worked, "j")).coef, abs=1e-12)
    assert normalize(reduced).rhs == pytest.approx(normalize(extreme_cut(worked, "j")).rhs, abs=1e-12)


def test_wbound_worked(worked):
    c = wbound_cut(worked)
    assert c.coef[:2] == pytest.approx((0.707107, 0.707107), abs=1e-6)
    assert c.rhs == pytest.approx(0.623538, abs=1e-6)
    x = np.array([0.72 * math.cos(math.pi / 12), 0.72 * math.sin(math.pi / 12), 0.81, 0.64])
    assert abs(c.slack(x)) <= 1e-9


def test_wbound_rejects_zero_lower_angle():
    p = edge_params(Interval(0.9, 1.1), Interval(0.9, 1.1), Interval(0.0, 0.5))
    with pytest.raises(UnsupportedCaseError):
        wbound_cut(p)


def test_chen_constants_worked(worked):
    k = chen_constants(worked)
    assert (k.pi0, k.pi1, k.pi2) == pytest.approx((-0.864, -0.8, -1.08), abs=1e-12)
    assert k.pi3 == pytest.approx(PI3, abs=1e-9)
    assert k.pi4 == pytest.approx(PI3, abs=1e-9)


def test_chen_constants_two_routes_agree(worked):
    # tangent-formula route versus the trigonometric closed form
    a, b = chen_constants(worked), chen_constants_tan(worked)
    assert a.as_tuple() == pytest.approx(b.as_tuple(), abs=1e-12)


def test_chen_f_g():
    x, y = math.tan(math.pi / 12), math.tan(5 * math.pi / 12)
    assert chen_f(x, y) == pytest.approx(F_WORKED, abs=1e-9)
    assert chen_g(x, y) == pytest.approx(F_WORKED, abs=1e-9)


def test_chen_cut1_worked(worked):
    c1, _ = chen_cuts(worked)
    assert c1.coef[2] == pytest.approx(-1.8, abs=1e-12)
    assert c1.coef[3] == pytest.approx(-2.52, abs=1e-12)
    assert c1.rhs == pytest.approx(-0.576, abs=1e-12)


def test_chen_equals_lnc_normalized(worked):
    for a, b in zip(chen_cuts(worked), lnc_cuts(worked)):
        na, nb = normalize(a), normalize(b)
        assert na.coef == pytest.approx(nb.coef, abs=1e-9)
        assert na.rhs == pytest.approx(nb.rhs, abs=1e-9)


def test_chen_unit_reduction():
    tm = 0.4
    c1, _ = chen_cuts(symmetric_unit(tm))
    ref = normalize(LinearCut((2.0, 0.0, -math.cos(tm), -math.cos(tm)), 0.0, ">="))
    assert normalize(c1).coef == pytest.approx(ref.coef, abs=1e-12)


def test_chen_rejects_zero_angle_bound():
    p = edge_params(Interval(0.9, 1.1), Interval(0.9, 1.1), Interval(0.0, 0.5))
    with pytest.raises(UnsupportedCaseError):
        chen_cuts(p)


def test_chen_constants_sign_checks():
    with pytest.raises(ValueError):
        ChenConstants(0.1, -1.0, -1.0, 1.0, 1.0)


def test_dominance_worked(worked):
    rep = check_dominance(lnc_cuts(worked), (extreme_cut(worked, "i"), extreme_cut(worked, "j")), p=worked,
                          samples=200_000)
    assert rep.ok
    assert rep.feasible > 10_000
    assert not rep.out_of_box


def test_dominance_flags_widened_box(worked):
    box = lifted_box(worked)
    box[3, 0] = 0.1  # w_j lower bound below (v_j^l)^2: the second LNC cut loosens, extreme_i does not
    rep = check_dominance(lnc_cuts(worked), (extreme_cut(worked, "i"),), box=box, p=worked, samples=200_000)
    assert rep.out_of_box
    assert not rep.ok


def test_dominance_identity_on_lnc2_boundary(worked):
    # on w_j = (v_j^l)^2 with LNC 2 active, extreme_i is active too
    l2 = lnc_cuts(worked)[1]
    a = np.array(l2.coef)
    x = np.array([0.0, 0.5, 1.0, worked.vj.lo ** 2])
    x[0] = (l2.rhs - a[1:] @ x[1:]) / a[0]
    assert abs(extreme_cut(worked, "i").slack(x)) <= 1e-12


def test_nl_cut_value_at_samples(worked):
    pts = sample_sp(worked, 5000, 1)
    for kind in ("VUB", "VLB"):
        assert nl_cut_value(nl_cut_constants(worked, kind), pts).min() >= -1e-9


def test_cuts_for_edge_kinds(worked):
    assert set(cuts_for_edge(worked)) == {"extreme_i", "extreme_j", "lnc_1", "lnc_2", "chen_1", "chen_2", "wbound"}
    sym = cuts_for_edge(symmetric_unit(0.3))
    assert "wbound" not in sym


def test_cuts_csv_header(worked):
    text = cuts_csv([("1-2", c) for c in cuts_for_edge(worked).values()])
    head = text.splitlines()[0]
    assert head == "edge,cut_kind,c_wr,c_wi,c_wi_i,c_w_j,rhs,sense"
    assert len(text.splitlines()) == 8


def test_normalize_sign_and_norm(worked):
    n = normalize(extreme_cut(worked, "i"))
    assert np.linalg.norm(n.coef) == pytest.approx(1.0)
    assert n.coef[0] >= 0


def test_linear_cut_validation():
    with pytest.raises(ValueError):
        LinearCut((0.0, 0.0, 0.0, 0.0), 1.0, ">=")
    with pytest.raises(ValueError):
        LinearCut((1.0, 0.0, 0.0, 0.0), 1.0, "==")


vl = st.floats(0.85, 0.95)
vu = st.floats(1.05, 1.25)
ang = st.floats(-1.4, 1.4)


@settings(max_examples=60, deadline=None)
@given(vl, vu, vl, vu, ang, ang, st.integers(0, 2**31))
def test_all_cuts_valid_on_sp(a, b, c, d, t1, t2, seed):
    if abs(t1 - t2) < 1e-6:
        t2 = t1 + 1e-3
    p = edge_params(Interval(a, b), Interval(c, d), Interval(min(t1, t2), max(t1, t2)))
    pts = sample_sp(p, 2000, seed)
    for kind, cut in cuts_for_edge(p).items():
        assert cut.slack(pts).min() >= -1e-9, kind


@settings(max_examples=60, deadline=None)
@given(vl, vu, vl, vu, ang, ang)
def test_chen_lnc_equivalent_property(a, b, c, d, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    if min(abs(lo), abs(hi)) < 1e-3 or hi - lo < 1e-6:
        return
    p = edge_params(Interval(a, b), Interval(c, d), Interval(lo, hi))
    for x, y in zip(chen_cuts(p), lnc_cuts(p)):
        nx, ny = normalize(x), normalize(y)
        assert nx.coef == pytest.approx(ny.coef, abs=1e-9)
        assert nx.rhs == pytest.approx(ny.rhs, abs=1e-9)
