import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acrelax.intervals import (DomainError, Interval, edge_params, interval_cos, interval_mul, interval_sin,
                               square_range, w_nonedge_bounds, w_offdiag_bounds)

from conftest import WORKED


def iv(a, b):
    return Interval(a, b)


@pytest.mark.parametrize("a,b,expect", [
    ((1, 2), (3, 4), (3, 8)),
    ((1, 2), (-4, -3), (-8, -3)),
    ((1, 2), (-1, 2), (-2, 4)),
])
def test_interval_mul_examples(a, b, expect):
    r = interval_mul(iv(*a), iv(*b))
    assert (r.lo, r.hi) == expect


def test_interval_cos_examples():
    assert tuple(interval_cos(iv(0, 0))) == (1.0, 1.0)
    # 10^6-point sampling: [0.258819, 0.965926]
    r = interval_cos(iv(math.pi / 12, 5 * math.pi / 12))
    assert r.lo == pytest.approx(0.258819, abs=1e-6)
    assert r.hi == pytest.approx(0.965926, abs=1e-6)
    r = interval_cos(iv(-math.pi / 3, math.pi / 6))
    assert r.lo == pytest.approx(0.5, abs=1e-12)
    assert r.hi == 1.0


def test_interval_sin_examples():
    assert tuple(interval_sin(iv(0, 0))) == (0.0, 0.0)
    r = interval_sin(iv(math.pi / 12, 5 * math.pi / 12))
    assert (r.lo, r.hi) == pytest.approx((0.258819, 0.965926), abs=1e-6)
    r = interval_sin(iv(-math.pi / 3, math.pi / 6))
    assert (r.lo, r.hi) == pytest.approx((-0.866025, 0.5), abs=1e-6)


def test_trig_domain_enforced():
    with pytest.raises(DomainError):
        interval_cos(iv(-2.0, 0.0))
    with pytest.raises(DomainError):
        edge_params(iv(1, 1), iv(1, 1), iv(-math.pi / 2, 0.1))


def test_w_offdiag_worked_example():
    # 200^3 grid sampling of (v_i v_j cos t, v_i v_j sin t): both components [0.186350, 1.159111]
    p = edge_params(iv(*WORKED["vi"]), iv(*WORKED["vj"]), iv(*WORKED["theta"]))
    box = w_offdiag_bounds(p)
    assert (box.re.lo, box.re.hi) == pytest.approx((0.186350, 1.159111), abs=1e-6)
    assert (box.im.lo, box.im.hi) == pytest.approx((0.186350, 1.159111), abs=1e-6)


def test_w_offdiag_zero_angle():
    p = edge_params(iv(0.9, 1.1), iv(0.95, 1.05), iv(0, 0))
    box = w_offdiag_bounds(p)
    assert tuple(box.im) == (0.0, 0.0)
    assert (box.re.lo, box.re.hi) == pytest.approx((0.9 * 0.95, 1.1 * 1.05))


def test_w_offdiag_mixed_sign():
    # grid sampling oracle: re=[0.572757, 1.21], im=[-0.605, 0.855599]
    p = edge_params(iv(0.9, 1.1), iv(0.9, 1.1), iv(-math.pi / 6, math.pi / 4))
    box = w_offdiag_bounds(p)
    assert (box.re.lo, box.re.hi) == pytest.approx((0.572757, 1.21), abs=1e-6)
    assert (box.im.lo, box.im.hi) == pytest.approx((-0.605, 0.855599), abs=1e-6)


@pytest.mark.parametrize("vi,vj,expect", [
    ((0.9, 1.1), (0.9, 1.1), 1.21),
    ((1, 1), (1, 1), 1.0),
    ((0.9, 1.2), (0.8, 1.0), 1.2),
])
def test_w_nonedge(vi, vj, expect):
    box = w_nonedge_bounds(iv(*vi), iv(*vj))
    assert (box.re.lo, box.re.hi) == pytest.approx((-expect, expect))
    assert (box.im.lo, box.im.hi) == pytest.approx((-expect, expect))


def test_edge_params_examples():
    p = edge_params(iv(0.9, 1.2), iv(0.8, 1.0), iv(math.pi / 12, 5 * math.pi / 12))
    assert p.phi == pytest.approx(math.pi / 4)
    assert p.delta == pytest.approx(math.pi / 6)
    assert p.v_sigma_i == pytest.approx(2.1)
    s = edge_params(iv(1, 1), iv(1, 1), iv(-0.4, 0.4))
    assert s.phi == 0.0
    assert s.delta == pytest.approx(0.4)


def test_square_range_cases():
    assert tuple(square_range(iv(0.9, 1.1))) == pytest.approx((0.81, 1.21))
    assert tuple(square_range(iv(-2, -1))) == (1, 4)
    assert tuple(square_range(iv(-1, 2))) == (0, 4)


bounds = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(bounds, bounds, bounds, bounds, st.floats(0, 1), st.floats(0, 1))
def test_interval_mul_contains_products(a, b, c, d, s, t):
    x, y = iv(min(a, b), max(a, b)), iv(min(c, d), max(c, d))
    r = interval_mul(x, y)
    px = x.lo + s * (x.hi - x.lo)
    py = y.lo + t * (y.hi - y.lo)
    assert r.lo - 1e-12 <= px * py <= r.hi + 1e-12


angles = st.floats(-1.55, 1.55, allow_nan=False)
mags = st.floats(0.5, 1.5, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(mags, mags, mags, mags, angles, angles, st.integers(0, 2**32 - 1))
def test_w_offdiag_sound(a, b, c, d, t1, t2, seed):
    p = edge_params(iv(min(a, b), max(a, b)), iv(min(c, d), max(c, d)), iv(min(t1, t2), max(t1, t2)))
    box = w_offdiag_bounds(p)
    rng = np.random.default_rng(seed)
    n = 2000
    vi = rng.uniform(p.vi.lo, p.vi.hi, n)
    vj = rng.uniform(p.vj.lo, p.vj.hi, n)
    th = rng.uniform(p.theta.lo, p.theta.hi, n)
    re, im = vi * vj * np.cos(th), vi * vj * np.sin(th)
    assert np.all(re >= box.re.lo - 1e-12) and np.all(re <= box.re.hi + 1e-12)
    assert np.all(im >= box.im.lo - 1e-12) and np.all(im <= box.im.hi + 1e-12)


@settings(max_examples=100, deadline=None)
@given(angles, angles)
def test_cos_sin_ranges_attained(t1, t2):
    t = iv(min(t1, t2), max(t1, t2))
    grid = np.linspace(t.lo, t.hi, 2001)
    if t.lo < 0 < t.hi:
        grid = np.append(grid, 0.0)
    c, s = interval_cos(t), interval_sin(t)
    assert c.lo == pytest.approx(np.cos(grid).min(), abs=1e-12)
    assert c.hi == pytest.approx(np.cos(grid).max(), abs=1e-12)
    assert s.lo == pytest.approx(np.sin(grid).min(), abs=1e-12)
    assert s.hi == pytest.approx(np.sin(grid).max(), abs=1e-12)
