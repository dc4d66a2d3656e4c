"""Convex envelopes of x^2, x*y, cos(x) and sin(x) as constraint descriptors.

Every envelope returns an auxiliary variable standing for the nonlinear term
plus a list of descriptors.  A descriptor reads

    weight * (sum_k a_k x_k)^2 + sum_k c_k x_k  (sense)  rhs

where the squared term is absent for linear descriptors and ``weight >= 0``
with sense ``<=`` for convex-quadratic ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .intervals import Interval, interval_cos, interval_mul, interval_sin, square_range

LINEAR = "linear"
QUADRATIC = "convex-quadratic"


@dataclass(frozen=True)
class VarRef:
    """A named model variable, or a named affine expression over variables."""

    name: str
    bounds: Interval
    expr: tuple[tuple[str, float], ...] | None = None

    def terms(self) -> dict[str, float]:
        if self.expr is None:
            return {self.name: 1.0}
        return dict(self.expr)


def difference(name: str, a: str, b: str, bounds: Interval) -> VarRef:
    """VarRef for the expression a - b (e.g. a phase-angle difference)."""
    return VarRef(name, bounds, ((a, 1.0), (b, -1.0)))


@dataclass(frozen=True)
class ConstraintDescriptor:
    kind: str
    coeffs: dict[str, float]
    sense: str
    rhs: float
    name: str = ""
    square: tuple[float, dict[str, float]] | None = None

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {self.sense!r}")
        if self.kind == QUADRATIC:
            if self.square is None or self.square[0] < 0 or self.sense != "<=":
                raise ValueError("convex-quadratic descriptor needs a nonnegative squared term and sense <=")

    def lhs(self, values: dict[str, float]) -> float:
        total = sum(c * values[k] for k, c in self.coeffs.items())
        if self.square is not None:
            w, aff = self.square
            s = sum(a * values[k] for k, a in aff.items())
            total += w * s * s
        return total

    def slack(self, values: dict[str, float]) -> float:
        """Nonnegative when satisfied (for equalities: minus the absolute residual)."""
        lhs = self.lhs(values)
        if self.sense == "<=":
            return self.rhs - lhs
        if self.sense == ">=":
            return lhs - self.rhs
        return -abs(lhs - self.rhs)


def _combine(*parts: tuple[float, dict[str, float]]) -> dict[str, float]:
    out: dict[str, float] = {}
    for scale, terms in parts:
        for k, c in terms.items():
            out[k] = out.get(k, 0.0) + scale * c
    return {k: c for k, c in out.items() if c != 0.0}


def _aux(name: str | None, default: str, bounds: Interval) -> VarRef:
    return VarRef(name or default, bounds)


def square_envelope(x: VarRef, aux: str | None = None) -> tuple[VarRef, list[ConstraintDescriptor]]:
    """T-CONV: w >= x^2 and w <= (x^l + x^u) x - x^l x^u."""
    w = _aux(aux, f"sq({x.name})", square_range(x.bounds))
    lo, hi = x.bounds
    xt = x.terms()
    return w, [
        ConstraintDescriptor(QUADRATIC, {w.name: -1.0}, "<=", 0.0, f"sqr_lb[{x.name}]", (1.0, xt)),
        ConstraintDescriptor(LINEAR, _combine((1.0, {w.name: 1.0}), (-(lo + hi), xt)), "<=", -lo * hi,
                             f"sqr_ub[{x.name}]"),
    ]


def mccormick(x: VarRef, y: VarRef, aux: str | None = None) -> tuple[VarRef, list[ConstraintDescriptor]]:
    """M-CONV: the four McCormick inequalities for w = x*y."""
    w = _aux(aux, f"({x.name}*{y.name})", interval_mul(x.bounds, y.bounds))
    xl, xu = x.bounds
    yl, yu = y.bounds
    xt, yt, wt = x.terms(), y.terms(), {w.name: 1.0}
    tag = f"{x.name}*{y.name}"

    def row(a: float, b: float, sense: str, i: int) -> ConstraintDescriptor:
        # w - a*y - b*x (sense) -a*b
        return ConstraintDescriptor(LINEAR, _combine((1.0, wt), (-a, yt), (-b, xt)), sense, -a * b, f"mc{i}[{tag}]")

    return w, [
        row(xl, yl, ">=", 1),
        row(xu, yu, ">=", 2),
        row(xl, yu, "<=", 3),
        row(xu, yl, "<=", 4),
    ]


def cos_curvature(t: Interval) -> float:
    """(1 - cos(x^m)) / (x^m)^2, with its limit 1/2 at x^m = 0."""
    xm = max(abs(t.lo), abs(t.hi))
    if xm < 1e-4:
        return 0.5 - xm * xm / 24.0
    return (1.0 - math.cos(xm)) / (xm * xm)


def _secant(f, lo: float, hi: float) -> tuple[float, float]:
    """Slope and intercept of the chord of f over [lo, hi] (tangent at lo when degenerate)."""
    if hi - lo < 1e-12:
        return None, f(lo)  # type: ignore[return-value]
    slope = (f(lo) - f(hi)) / (lo - hi)
    return slope, f(lo) - slope * lo


def cos_envelope(t: VarRef, aux: str | None = None) -> tuple[VarRef, list[ConstraintDescriptor]]:
    """C-CONV: cx <= 1 - k x^2 and cx >= chord of cos over the domain."""
    c = _aux(aux, f"cos({t.name})", interval_cos(t.bounds))
    tt = t.terms()
    k = cos_curvature(t.bounds)
    out = [ConstraintDescriptor(QUADRATIC, {c.name: 1.0}, "<=", 1.0, f"cos_ub[{t.name}]", (k, tt))]
    slope, icpt = _secant(math.cos, *t.bounds)
    if slope is None:
        out.append(ConstraintDescriptor(LINEAR, {c.name: 1.0}, ">=", icpt, f"cos_lb[{t.name}]"))
    else:
        out.append(ConstraintDescriptor(LINEAR, _combine((1.0, {c.name: 1.0}), (-slope, tt)), ">=", icpt,
                                        f"cos_lb[{t.name}]"))
    return c, out


def sin_envelope(t: VarRef, aux: str | None = None) -> tuple[VarRef, list[ConstraintDescriptor]]:
    """S-CONV: two tangents at +-x^m/2, plus a chord when the domain has one sign."""
    s = _aux(aux, f"sin({t.name})", interval_sin(t.bounds))
    tt = t.terms()
    lo, hi = t.bounds
    h = max(abs(lo), abs(hi)) / 2
    ch, sh = math.cos(h), math.sin(h)
    st = {s.name: 1.0}
    out = [
        # s <= cos(h)(x - h) + sin(h)
        ConstraintDescriptor(LINEAR, _combine((1.0, st), (-ch, tt)), "<=", -ch * h + sh, f"sin_ub[{t.name}]"),
        # s >= cos(h)(x + h) - sin(h)
        ConstraintDescriptor(LINEAR, _combine((1.0, st), (-ch, tt)), ">=", ch * h - sh, f"sin_lb[{t.name}]"),
    ]
    if lo >= 0 or hi <= 0:
        slope, icpt = _secant(math.sin, lo, hi)
        sense = ">=" if lo >= 0 else "<="
        if slope is None:
            out.append(ConstraintDescriptor(LINEAR, dict(st), sense, icpt, f"sin_chord[{t.name}]"))
        else:
            out.append(ConstraintDescriptor(LINEAR, _combine((1.0, st), (-slope, tt)), sense, icpt,
                                            f"sin_chord[{t.name}]"))
    return s, out


def envelope_interval(descriptors: list[ConstraintDescriptor], aux: str, values: dict[str, float]) -> Interval:
    """Range of the auxiliary variable allowed by the descriptors at fixed argument values."""
    lo, hi = -math.inf, math.inf
    for d in descriptors:
        a = d.coeffs.get(aux, 0.0)
        if a == 0.0:
            continue
        rest = {k: v for k, v in values.items() if k != aux}
        other = sum(c * rest[k] for k, c in d.coeffs.items() if k != aux)
        if d.square is not None:
            w, aff = d.square
            sq = sum(c * rest[k] for k, c in aff.items())
            other += w * sq * sq
        bound = (d.rhs - other) / a
        upper = (d.sense == "<=") == (a > 0)
        if d.sense == "==":
            lo, hi = max(lo, bound), min(hi, bound)
        elif upper:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    return Interval(lo, hi) if lo <= hi else Interval(hi, lo)
