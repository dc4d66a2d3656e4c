import math

import numpy as np
import pytest

from acrelax.cuts import lnc_cuts
from acrelax.intervals import Interval, edge_params
from acrelax.oracle import (InfeasibleAtResolution, export_set_surface, grid_global_opf, sample_sp, sc_contains,
                            set_volume, sp_contains, surface_csv, three_bus_network, two_bus_network, verify_cuts)
from acrelax.relax import ac_feasibility_check

from conftest import WORKED


def test_samples_on_product_surface(worked):
    pts = sample_sp(worked, 10_000, 0)
    assert np.max(np.abs(pts[:, 0] ** 2 + pts[:, 1] ** 2 - pts[:, 2] * pts[:, 3])) <= 1e-12


def test_samples_satisfy_lnc(worked):
    pts = sample_sp(worked, 10_000, 0)
    for c in lnc_cuts(worked):
        assert c.slack(pts).min() >= -1e-12


def test_zero_width_angle():
    p = edge_params(Interval(0.9, 1.1), Interval(0.9, 1.1), Interval(0.3, 0.3))
    pts = sample_sp(p, 1000, 0)
    assert np.max(np.abs(pts[:, 1] - math.tan(0.3) * pts[:, 0])) <= 1e-12


def test_sampling_is_seeded(worked):
    assert np.array_equal(sample_sp(worked, 100, 7), sample_sp(worked, 100, 7))


def test_sp_points_inside_sc(worked):
    rows = export_set_surface(worked, "Sp", 40)
    pts = np.array([r[:3] for r in rows if r[3]])
    assert len(pts) > 0
    assert sc_contains(worked, pts, tol=1e-12).all()


def test_extreme_points_on_sc_boundary(worked):
    from acrelax.cuts import extreme_cut, extreme_points

    pts = extreme_points(worked, "i")[:, :3]
    assert sc_contains(worked, pts, tol=1e-6).all()
    cut = extreme_cut(worked, "i")
    x4 = np.column_stack([pts, np.zeros(4)])
    assert np.max(np.abs(cut.slack(x4))) <= 1e-6


def test_sampled_points_in_sp(worked):
    pts = sample_sp(worked, 5000, 3)
    assert sp_contains(worked, pts[:, :3], tol=1e-12).all()


def test_wider_pad_grows_sc():
    narrow = edge_params(Interval(*WORKED["vi"]), Interval(*WORKED["vj"]), Interval(*WORKED["theta"]))
    eps = 1e-3
    wide = edge_params(Interval(*WORKED["vi"]), Interval(*WORKED["vj"]),
                       Interval(-math.pi / 2 + eps, math.pi / 2 - eps))
    assert set_volume(wide, "Sc", 40) > set_volume(narrow, "Sc", 40)


def test_surface_csv_shape(worked):
    text = surface_csv(export_set_surface(worked, "Sc", 5))
    lines = text.splitlines()
    assert lines[0] == "wr,wi,w_i,member"
    assert len(lines) == 1 + 5 ** 3


def test_verify_cuts_small():
    rep = verify_cuts(draws=30, samples=2000, seed=11)
    assert rep["violations"] == []
    assert rep["checked"]["lnc_1"] == 30


def test_grid_lossless_two_bus():
    net = two_bus_network()
    res = grid_global_opf(net, resolution=400)
    # lossless: total generation equals the 1.0 pu load at every feasible point
    assert sum(res.point.pg) == pytest.approx(1.0, abs=1e-12)
    assert res.point.pg[0] == pytest.approx(1.0, abs=res.lipschitz_bound + 1e-9)
    assert ac_feasibility_check(net, res.point, tol=1e-6)["feasible"]


def test_grid_lossy_two_bus(two_bus_grid):
    net, res = two_bus_grid
    assert sum(res.point.pg) > 1.0
    assert ac_feasibility_check(net, res.point, tol=1e-6)["feasible"]


def test_grid_refinement_within_lipschitz(two_bus_grid):
    net, fine = two_bus_grid
    coarse = grid_global_opf(net, resolution=200)
    assert abs(coarse.objective - fine.objective) <= coarse.lipschitz_bound + 1e-12


def test_grid_three_bus_small():
    net = three_bus_network()
    res = grid_global_opf(net, resolution=40)
    assert res.feasible
    assert ac_feasibility_check(net, res.point, tol=1e-6)["feasible"]


def test_grid_rejects_large_networks():
    from acrelax.netmodel import load_case

    with pytest.raises(ValueError):
        grid_global_opf(load_case("case5"), resolution=3)


def test_grid_infeasible_at_resolution():
    net = two_bus_network(load=5.0 + 0j)
    with pytest.raises(InfeasibleAtResolution):
        grid_global_opf(net, resolution=20)
