"""Interval arithmetic and bounds on the lifted voltage products W_ij."""

from __future__ import annotations

import math
from dataclasses import dataclass

HALF_PI = math.pi / 2


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def sigma(self) -> float:
        return self.lo + self.hi

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def subset_of(self, other: "Interval", tol: float = 0.0) -> bool:
        return other.lo - tol <= self.lo and self.hi <= other.hi + tol

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def __iter__(self):
        yield self.lo
        yield self.hi


@dataclass(frozen=True)
class ComplexBox:
    re: Interval
    im: Interval


@dataclass(frozen=True)
class EdgeParams:
    vi: Interval
    vj: Interval
    theta: Interval
    phi: float
    delta: float
    v_sigma_i: float
    v_sigma_j: float

    def __post_init__(self):
        if self.vi.lo < 0 or self.vj.lo < 0:
            raise ValueError("voltage magnitude intervals must be nonnegative")
        if self.delta < 0:
            raise ValueError("negative PAD half-width")


def edge_params(vi: Interval, vj: Interval, theta: Interval) -> EdgeParams:
    if not (-HALF_PI < theta.lo and theta.hi < HALF_PI):
        raise DomainError(f"PAD interval [{theta.lo}, {theta.hi}] not inside (-pi/2, pi/2)")
    return EdgeParams(
        vi=vi,
        vj=vj,
        theta=theta,
        phi=(theta.hi + theta.lo) / 2,
        delta=(theta.hi - theta.lo) / 2,
        v_sigma_i=vi.lo + vi.hi,
        v_sigma_j=vj.lo + vj.hi,
    )


def interval_mul(a: Interval, b: Interval) -> Interval:
    """Exact range of x*y over the box a x b."""
    if a.lo >= 0:
        if b.lo >= 0:
            return Interval(a.lo * b.lo, a.hi * b.hi)
        if b.hi <= 0:
            return Interval(a.hi * b.lo, a.lo * b.hi)
        return Interval(a.hi * b.lo, a.hi * b.hi)
    corners = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return Interval(min(corners), max(corners))


def _check_trig_domain(t: Interval):
    if t.lo < -HALF_PI or t.hi > HALF_PI:
        raise DomainError(f"[{t.lo}, {t.hi}] not inside [-pi/2, pi/2]")


def interval_cos(t: Interval) -> Interval:
    _check_trig_domain(t)
    if t.hi <= 0:
        return Interval(math.cos(t.lo), math.cos(t.hi))
    if t.lo >= 0:
        return Interval(math.cos(t.hi), math.cos(t.lo))
    return Interval(min(math.cos(t.lo), math.cos(t.hi)), 1.0)


def interval_sin(t: Interval) -> Interval:
    _check_trig_domain(t)
    return Interval(math.sin(t.lo), math.sin(t.hi))


def w_offdiag_bounds(p: EdgeParams) -> ComplexBox:
    """Bounds on (w^R, w^I) = v_i v_j (cos, sin)(theta) for a line with PAD limits."""
    vl = p.vi.lo * p.vj.lo
    vu = p.vi.hi * p.vj.hi
    tl, tu = p.theta.lo, p.theta.hi
    if tu <= 0:
        re = Interval(vl * math.cos(tl), vu * math.cos(tu))
        im = Interval(vu * math.sin(tl), vl * math.sin(tu))
    elif tl >= 0:
        re = Interval(vl * math.cos(tu), vu * math.cos(tl))
        im = Interval(vl * math.sin(tl), vu * math.sin(tu))
    else:
        re = Interval(vl * min(math.cos(tl), math.cos(tu)), vu)
        im = Interval(vu * math.sin(tl), vu * math.sin(tu))
    return ComplexBox(re, im)


def w_nonedge_bounds(vi: Interval, vj: Interval) -> ComplexBox:
    if vi.lo < 0 or vj.lo < 0:
        raise ValueError("voltage magnitude intervals must be nonnegative")
    m = vi.hi * vj.hi
    return ComplexBox(Interval(-m, m), Interval(-m, m))


def square_range(x: Interval) -> Interval:
    if x.lo >= 0:
        return Interval(x.lo * x.lo, x.hi * x.hi)
    if x.hi <= 0:
        return Interval(x.hi * x.hi, x.lo * x.lo)
    return Interval(0.0, max(x.lo * x.lo, x.hi * x.hi))
