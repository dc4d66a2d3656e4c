"""Optimization-based bound tightening of voltage magnitudes and angle differences."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .intervals import Interval
from .lpcore import solve_lower_bound
from .netmodel import Network
from .relax import NetworkBounds, RelaxModel, build_model, wi_name, wr_name, w_name

# keeps rounding in the LP from trimming a feasible point
MARGIN = 1e-9


class NetworkInfeasible(RuntimeError):
    """A bound-tightening subproblem proved the relaxation, hence the network, infeasible."""

    def __init__(self, message: str, task=None):
        super().__init__(message)
        self.task = task


@dataclass
class OBBTReport:
    bounds: NetworkBounds
    passes: int
    history: list = field(default_factory=list)  # NetworkBounds after each pass
    subproblems: int = 0
    wall_time: float = 0.0
    fixpoint: bool = False

    def to_dict(self) -> dict:
        d = self.bounds.to_dict()
        d["passes"] = self.passes
        d["subproblems"] = self.subproblems
        d["fixpoint"] = self.fixpoint
        d["wall_time"] = self.wall_time
        return d


def _minimize(model: RelaxModel, objective: dict[str, float], tol_rel=1e-7, max_iter=200):
    """Valid lower bound on the objective over the model, and the last LP point."""
    m = model.copy()
    m.objective = dict(objective)
    m.objective_const = 0.0
    rep = solve_lower_bound(m, tol_rel=tol_rel, max_iter=max_iter)
    if rep.status == "infeasible":
        raise NetworkInfeasible(f"subproblem infeasible: {objective}")
    if not math.isfinite(rep.lower_bound):
        raise RuntimeError(f"subproblem failed with status {rep.status}")
    return rep.lower_bound, rep.x


def _ratio_max(model: RelaxModel, e, sign: float, start: float, iters: int = 20) -> float:
    """Upper bound on sign*wi/wr over the model by Dinkelbach iterations (wr is bounded away from 0).

    For any lam, every feasible point has sign*wi - lam*wr <= F(lam), hence
    sign*wi/wr <= lam + F(lam)/wr, which is evaluated with the wr bound that
    makes it largest.  The iterate lam is the ratio at the LP maximizer.
    """
    wr, wi = wr_name(e), wi_name(e)
    wr_lo, wr_hi = model.variables[wr].lo, model.variables[wr].hi
    lam, best = start, math.inf
    for _ in range(iters):
        lb, x = _minimize(model, {wi: -sign, wr: lam})
        f = -lb
        bound = lam + f / (wr_lo if f >= 0 else wr_hi)
        best = min(best, bound)
        if x is None or x[wr] <= 0:
            break
        nxt = sign * x[wi] / x[wr]
        if abs(f) <= 1e-10 or abs(nxt - lam) <= 1e-12:
            break
        lam = nxt
    return best


def _task(args):
    net, bounds, kind, target = args
    model = build_model(net, kind, bounds)
    what, key = target
    if what == "v":
        if "v_%d" % key in model.variables:
            name = f"v_{key}"
            lo = _minimize(model, {name: 1.0})[0]
            hi = -_minimize(model, {name: -1.0})[0]
        else:
            name = w_name(key)
            lo = math.sqrt(max(_minimize(model, {name: 1.0})[0], 0.0))
            hi = math.sqrt(max(-_minimize(model, {name: -1.0})[0], 0.0))
        return target, lo, hi
    e = key
    if f"th_{e[0]}" in model.variables:
        obj = {f"th_{e[0]}": 1.0, f"th_{e[1]}": -1.0}
        lo = _minimize(model, obj)[0]
        hi = -_minimize(model, {k: -v for k, v in obj.items()})[0]
        return target, lo, hi
    if model.variables[wr_name(e)].lo <= 0:
        return target, -math.inf, math.inf
    pad = bounds.pad[e]
    hi = math.atan(_ratio_max(model, e, 1.0, math.tan(pad.lo)))
    lo = -math.atan(_ratio_max(model, e, -1.0, -math.tan(pad.hi)))
    return target, lo, hi


def tighten(net: Network, kind: str = "qc", eps: float = 1e-4, max_passes: int = 5,
            bounds: NetworkBounds | None = None, jobs: int = 1) -> OBBTReport:
    """Jacobi-style passes of min/max subproblems until no bound moves by more than eps."""
    t0 = time.perf_counter()
    cur = (bounds or NetworkBounds.from_network(net)).copy()
    history = []
    nsub = 0
    fix = False
    passes = 0
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for _ in range(max_passes):
            passes += 1
            targets = [("v", b.id) for b in net.buses if cur.v[b.id].width > 0]
            targets += [("pad", e) for e in net.edges()]
            args = [(net, cur, kind, t) for t in targets]
            results = list(pool.map(_task, args)) if pool else [_task(a) for a in args]
            nsub += 2 * len(results)
            new = cur.copy()
            changed = False
            for (what, key), lo, hi in results:
                old = cur.v[key] if what == "v" else cur.pad[key]
                lo, hi = lo - MARGIN, hi + MARGIN
                nlo = lo if lo > old.lo + eps else old.lo
                nhi = hi if hi < old.hi - eps else old.hi
                if nlo > nhi:
                    raise NetworkInfeasible(f"bounds on {what} {key} crossed: [{nlo}, {nhi}]", (what, key))
                if (nlo, nhi) != (old.lo, old.hi):
                    changed = True
                    if what == "v":
                        new.v[key] = Interval(nlo, nhi)
                    else:
                        new.pad[key] = Interval(nlo, nhi)
            history.append(new.copy())
            cur = new
            if not changed:
                fix = True
                break
    finally:
        if pool:
            pool.shutdown()
    return OBBTReport(cur, passes, history, nsub, time.perf_counter() - t0, fix)


def merged_model(net: Network, kind: str, tight: NetworkBounds, loose: NetworkBounds) -> RelaxModel:
    """Relaxation built on the tightened bounds, intersected with the one built on the original bounds.

    Both are valid for every AC-feasible point inside the tightened bounds, so the
    intersection is too, and its optimum can only be at least the original one.
    """
    m = build_model(net, kind, tight)
    base = build_model(net, kind, loose)
    seen = {(r.name, tuple(sorted(r.coeffs.items())), r.rhs) for r in m.linear}
    for r in base.linear:
        key = (r.name, tuple(sorted(r.coeffs.items())), r.rhs)
        if key not in seen:
            m.linear.append(r)
            seen.add(key)
    have = set(map(repr, m.convex))
    for c in base.convex:
        if repr(c) not in have:
            m.convex.append(c)
    return m
