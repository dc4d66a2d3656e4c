"""Closed-form valid inequalities for the per-edge voltage feasibility set.

All cuts live in the lifted space (w^R_ij, w^I_ij, w_i, w_j); coefficient
vectors use that order throughout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .intervals import EdgeParams, w_offdiag_bounds

VARS = ("wr", "wi", "w_i", "w_j")


class UnsupportedCaseError(ValueError):
    """Raised when a closed form is requested outside the parameter range it was derived for."""


@dataclass(frozen=True)
class LinearCut:
    coef: tuple[float, float, float, float]
    rhs: float
    sense: str  # ">=" or "<="
    kind: str = ""

    def __post_init__(self):
        if self.sense not in (">=", "<="):
            raise ValueError(f"bad sense {self.sense!r}")
        if not any(c != 0.0 for c in self.coef):
            raise ValueError("cut has no nonzero coefficient")

    @property
    def coeffs(self) -> dict[str, float]:
        return dict(zip(VARS, self.coef))

    @property
    def constant(self) -> float:
        """Constant term when the cut is written as ``a.x + constant (sense) 0``."""
        return -self.rhs

    def lhs(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ np.asarray(self.coef)

    def slack(self, x) -> np.ndarray:
        """Nonnegative where the cut holds; ``x`` has shape (..., 4)."""
        v = self.lhs(x) - self.rhs
        return v if self.sense == ">=" else -v

    def as_geq(self) -> "LinearCut":
        if self.sense == ">=":
            return self
        return LinearCut(tuple(-c for c in self.coef), -self.rhs, ">=", self.kind)


@dataclass(frozen=True)
class NLCutConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    kind: str

    def __post_init__(self):
        if self.kind == "VUB" and not self.c4 < 0:
            raise ValueError("VUB constants require c4 < 0")

    def as_tuple(self):
        return (self.c1, self.c2, self.c3, self.c4, self.c5)


@dataclass(frozen=True)
class ChenConstants:
    pi0: float
    pi1: float
    pi2: float
    pi3: float
    pi4: float

    def __post_init__(self):
        if self.pi0 > 0 or self.pi1 > 0 or self.pi2 > 0:
            raise ValueError("pi0, pi1, pi2 must be nonpositive")

    def as_tuple(self):
        return (self.pi0, self.pi1, self.pi2, self.pi3, self.pi4)


def extreme_cut(p: EdgeParams, side: str = "i") -> LinearCut:
    """Three-variable cut, written as ``a.x <= -const`` with the other diagonal coefficient zero."""
    cd, cp, sp = math.cos(p.delta), math.cos(p.phi), math.sin(p.phi)
    if side == "i":
        own, other, vs = p.vi, p.vj, p.v_sigma_i
        coef = (-vs * cp, -vs * sp, other.lo * cd, 0.0)
    elif side == "j":
        own, other, vs = p.vj, p.vi, p.v_sigma_j
        coef = (-vs * cp, -vs * sp, 0.0, other.lo * cd)
    else:
        raise ValueError("side must be 'i' or 'j'")
    const = own.lo * own.hi * other.lo * cd
    return LinearCut(coef, -const, "<=", f"extreme_{side}")


def extreme_points(p: EdgeParams, side: str = "i") -> np.ndarray:
    """The four points where the extreme cut is tight, as rows (wr, wi, w_i, w_j).

    The diagonal that does not appear in the cut is set to its lower bound squared.
    """
    own, other = (p.vi, p.vj) if side == "i" else (p.vj, p.vi)
    rows = []
    for v in (own.lo, own.hi):
        for ang in (p.phi - p.delta, p.phi + p.delta):
            r = v * other.lo
            diag = (v * v, other.lo ** 2) if side == "i" else (other.lo ** 2, v * v)
            rows.append((r * math.cos(ang), r * math.sin(ang), *diag))
    return np.array(rows)


def nl_cut_constants(p: EdgeParams, kind: str = "VUB") -> NLCutConstants:
    cd = math.cos(p.delta)
    ss = p.v_sigma_i * p.v_sigma_j
    span = p.vi.lo * p.vj.lo - p.vi.hi * p.vj.hi
    c1, c2 = ss * math.cos(p.phi), ss * math.sin(p.phi)
    if kind == "VUB":
        ui, uj = p.vi.hi, p.vj.hi
        return NLCutConstants(c1, c2, -uj * cd * p.v_sigma_j, -ui * cd * p.v_sigma_i, -ui * uj * cd * span, kind)
    if kind == "VLB":
        li, lj = p.vi.lo, p.vj.lo
        return NLCutConstants(c1, c2, -lj * cd * p.v_sigma_j, -li * cd * p.v_sigma_i, li * lj * cd * span, kind)
    raise ValueError("kind must be 'VUB' or 'VLB'")


def nl_cut_value(c: NLCutConstants, x) -> np.ndarray:
    """Left side of the nonlinear cut (>= 0 when valid) at rows (wr, wi, w_i, ...)."""
    x = np.asarray(x, dtype=float)
    wr, wi, wii = x[..., 0], x[..., 1], x[..., 2]
    return c.c1 * wr + c.c2 * wi + c.c3 * wii + c.c4 * (wr * wr + wi * wi) / wii + c.c5


def _lift(c: NLCutConstants, kind: str) -> LinearCut:
    return LinearCut((c.c1, c.c2, c.c3, c.c4), -c.c5, ">=", kind)


def lnc_cuts(p: EdgeParams) -> tuple[LinearCut, LinearCut]:
    return _lift(nl_cut_constants(p, "VUB"), "lnc_1"), _lift(nl_cut_constants(p, "VLB"), "lnc_2")


def wbound_cut(p: EdgeParams) -> LinearCut:
    tl, tu = p.theta
    if not (0 < tl < tu <= math.pi / 2):
        raise UnsupportedCaseError(f"w-bound cut needs 0 < theta_lo < theta_hi <= pi/2, got [{tl}, {tu}]")
    return LinearCut((math.cos(p.phi), math.sin(p.phi), 0.0, 0.0),
                     p.vi.lo * p.vj.lo * math.cos(p.delta), ">=", "wbound")


def _half_tan(t: float) -> float:
    # (sqrt(1 + t^2) - 1) / t, rearranged to avoid cancellation near t = 0
    return t / (math.sqrt(1 + t * t) + 1)


def chen_f(x: float, y: float) -> float:
    a, b = _half_tan(x), _half_tan(y)
    return (1 - a * b) / (1 + a * b)


def chen_g(x: float, y: float) -> float:
    a, b = _half_tan(x), _half_tan(y)
    return (a + b) / (1 + a * b)


def _check_chen(p: EdgeParams):
    if p.theta.lo == 0.0 or p.theta.hi == 0.0:
        raise UnsupportedCaseError("tangent of a zero PAD endpoint; closed form not defined")


def chen_constants(p: EdgeParams) -> ChenConstants:
    _check_chen(p)
    li, ui, lj, uj = p.vi.lo, p.vi.hi, p.vj.lo, p.vj.hi
    ss, cd = p.v_sigma_i * p.v_sigma_j, math.cos(p.delta)
    return ChenConstants(-li * ui * lj * uj, -lj * uj, -li * ui, ss * math.cos(p.phi) / cd, ss * math.sin(p.phi) / cd)


def chen_constants_tan(p: EdgeParams) -> ChenConstants:
    """Same constants evaluated from squared-magnitude bounds and tangents of the PAD limits."""
    _check_chen(p)
    wli, wui, wlj, wuj = p.vi.lo ** 2, p.vi.hi ** 2, p.vj.lo ** 2, p.vj.hi ** 2
    tl, tu = math.tan(p.theta.lo), math.tan(p.theta.hi)
    s = (math.sqrt(wli) + math.sqrt(wui)) * (math.sqrt(wlj) + math.sqrt(wuj))
    return ChenConstants(
        -math.sqrt(wli * wlj * wui * wuj),
        -math.sqrt(wlj * wuj),
        -math.sqrt(wli * wui),
        s * chen_f(tl, tu),
        s * chen_g(tl, tu),
    )


def chen_cuts(p: EdgeParams, constants: ChenConstants | None = None) -> tuple[LinearCut, LinearCut]:
    k = constants or chen_constants(p)
    out = []
    for tag, (a, b) in (("chen_1", (p.vi.hi, p.vj.hi)), ("chen_2", (p.vi.lo, p.vj.lo))):
        coef = (k.pi3, k.pi4, k.pi1 - b * b, k.pi2 - a * a)
        out.append(LinearCut(coef, -(k.pi0 + a * a * b * b), ">=", tag))
    return out[0], out[1]


def normalize(cut: LinearCut) -> LinearCut:
    """Scale to a unit coefficient vector with a nonnegative w^R coefficient."""
    g = cut.as_geq()
    a = np.asarray(g.coef)
    n = float(np.linalg.norm(a))
    sense = ">="
    if a[0] < 0:
        n, sense = -n, "<="
    return LinearCut(tuple(float(c) for c in a / n), g.rhs / n, sense, cut.kind)


def lifted_box(p: EdgeParams) -> np.ndarray:
    """Bounds on (wr, wi, w_i, w_j) as a (4, 2) array."""
    b = w_offdiag_bounds(p)
    return np.array([
        [b.re.lo, b.re.hi],
        [b.im.lo, b.im.hi],
        [p.vi.lo ** 2, p.vi.hi ** 2],
        [p.vj.lo ** 2, p.vj.hi ** 2],
    ])


@dataclass
class DominanceReport:
    sampled: int
    feasible: int
    counterexamples: list
    out_of_box: bool

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def check_dominance(lnc, extreme, box=None, p: EdgeParams | None = None, samples: int = 100_000,
                    seed: int = 0, tol: float = 1e-9, chunk: int = 200_000) -> DominanceReport:
    """Sample the box, keep points satisfying both LNC cuts, and test both extreme cuts there.

    Half the samples are projected onto the boundary of the second LNC cut so the
    test also exercises points where that cut is active.
    """
    if box is None:
        if p is None:
            raise ValueError("need a box or EdgeParams")
        box = lifted_box(p)
    box = np.asarray(box, dtype=float)
    out_of_box = False
    if p is not None:
        ref = lifted_box(p)
        out_of_box = bool(np.any(box[:, 0] < ref[:, 0] - 1e-12) or np.any(box[:, 1] > ref[:, 1] + 1e-12))
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0], box[:, 1]
    l2 = lnc[1].as_geq()
    a2 = np.asarray(l2.coef)
    bad, feasible, done = [], 0, 0
    while done < samples:
        n = min(chunk, samples - done)
        x = lo + (hi - lo) * rng.random((n, 4))
        if a2[0] != 0.0:
            half = n // 2
            y = x[:half]
            y[:, 0] = (l2.rhs - y[:, 1:] @ a2[1:]) / a2[0]
        keep = np.all(x >= lo, axis=1) & np.all(x <= hi, axis=1)
        for c in lnc:
            keep &= c.slack(x) >= -tol
        x = x[keep]
        feasible += len(x)
        for e in extreme:
            s = e.slack(x)
            for k in np.flatnonzero(s < -tol)[:10]:
                bad.append({"cut": e.kind, "point": x[k].tolist(), "slack": float(s[k])})
        done += n
    return DominanceReport(samples, feasible, bad, out_of_box)


def cuts_for_edge(p: EdgeParams) -> dict[str, LinearCut]:
    """Every applicable closed-form cut for one edge, keyed by kind."""
    out = {}
    for c in (extreme_cut(p, "i"), extreme_cut(p, "j"), *lnc_cuts(p)):
        out[c.kind] = c
    try:
        for c in chen_cuts(p):
            out[c.kind] = c
    except UnsupportedCaseError:
        pass
    try:
        out["wbound"] = wbound_cut(p)
    except UnsupportedCaseError:
        pass
    return out


def cuts_csv(rows) -> str:
    """CSV dump from an iterable of (edge_label, LinearCut)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["edge", "cut_kind", "c_wr", "c_wi", "c_wi_i", "c_w_j", "rhs", "sense"])
    for edge, c in rows:
        w.writerow([edge, c.kind, *(repr(float(v)) for v in c.coef), repr(float(c.rhs)), c.sense])
    return buf.getvalue()
