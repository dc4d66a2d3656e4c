"""Dense bounded-variable simplex and a Kelley cutting-plane loop for convex relaxations.

The LP is stored as ``min c.x  s.t.  row_lo <= A x <= row_hi,  lo <= x <= hi``.
Internally every row i gets an activity variable r_i = a_i.x carrying the row
bounds, so the equality system is ``[A  -I] (x, r) = 0`` and all constraint
information lives in variable bounds.  The initial basis is the activity
block, which makes warm starts after appending rows trivial.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

INF = math.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
NUMERICAL = "numerical"

AT_LO, AT_HI, BASIC = 0, 1, 2


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_hi = np.asarray(self.row_hi, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("all variable bounds must be finite")
        if np.any(self.lo > self.hi) or np.any(self.row_lo > self.row_hi):
            raise ValueError("inverted bounds")

    @classmethod
    def from_rows(cls, c, rows, lo, hi) -> "LinearProgram":
        """Build from (coef_vector, sense, rhs) triples."""
        n = len(c)
        A = np.zeros((len(rows), n))
        rlo = np.full(len(rows), -INF)
        rhi = np.full(len(rows), INF)
        for i, (a, sense, b) in enumerate(rows):
            A[i] = a
            if sense in ("<=", "=="):
                rhi[i] = b
            if sense in (">=", "=="):
                rlo[i] = b
        return cls(np.asarray(c, float), A, rlo, rhi, np.asarray(lo, float), np.asarray(hi, float))


@dataclass
class Basis:
    head: np.ndarray  # column index basic in each row
    status: np.ndarray  # per column: AT_LO, AT_HI or BASIC


@dataclass
class LPResult:
    status: str
    objective: float
    x: np.ndarray | None
    duals: np.ndarray | None = None
    dual_bound: float = -INF
    iterations: int = 0
    basis: Basis | None = None
    message: str = ""


class _Simplex:
    def __init__(self, lp: LinearProgram, basis: Basis | None, max_iter: int, refactor: int):
        m, n = lp.A.shape
        self.m, self.n = m, n
        # row scaling
        scale = np.max(np.abs(lp.A), axis=1) if m else np.zeros(0)
        scale[scale == 0] = 1.0
        self.rscale = scale
        self.M = np.hstack([lp.A / scale[:, None], -np.eye(m)])
        self.lo = np.concatenate([lp.lo, lp.row_lo / scale])
        self.hi = np.concatenate([lp.hi, lp.row_hi / scale])
        cmax = float(np.max(np.abs(lp.c))) if n else 0.0
        self.cscale = cmax if cmax > 0 else 1.0
        self.c = np.concatenate([lp.c / self.cscale, np.zeros(m)])
        self.max_iter = max_iter
        self.refactor_every = refactor
        self.ptol = 1e-9
        self.dtol = 1e-9
        N = n + m
        old_m = basis.head.size if basis is not None else -1
        if basis is not None and old_m <= m and basis.status.size == n + old_m:
            # rows were appended: column indices of the old problem are unchanged
            self.head = np.concatenate([basis.head, np.arange(n + old_m, n + m)]).astype(int)
            self.status = np.full(N, AT_LO, dtype=int)
            self.status[: n + old_m] = basis.status
            self.status[self.head] = BASIC
        else:
            self.head = np.arange(n, n + m)
            self.status = np.full(N, AT_LO, dtype=int)
            self.status[self.head] = BASIC
        self._fix_nonbasic()
        self.iterations = 0

    def _fix_nonbasic(self):
        nb = self.status != BASIC
        lo_inf = ~np.isfinite(self.lo)
        hi_inf = ~np.isfinite(self.hi)
        self.status[nb & lo_inf & ~hi_inf] = AT_HI
        self.status[nb & hi_inf & ~lo_inf] = AT_LO
        bad = nb & lo_inf & hi_inf
        if np.any(bad):  # free nonbasic: treat as at zero via AT_LO with lo = 0 reference
            raise ValueError("free nonbasic column encountered")

    def _nonbasic_values(self):
        x = np.where(self.status == AT_HI, self.hi, self.lo)
        x[self.head] = 0.0
        return x

    def refactor(self):
        B = self.M[:, self.head]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        return bool(np.all(np.isfinite(self.Binv)))

    def solve(self) -> LPResult:
        m, n = self.m, self.n
        if m == 0:
            x = np.where(self.c[:n] < 0, self.hi[:n], self.lo[:n])
            obj = float(self.c[:n] @ x) * self.cscale
            return LPResult(OPTIMAL, obj, x, np.zeros(0), obj, 0, Basis(self.head.copy(), self.status.copy()))
        if not self.refactor():
            return LPResult(NUMERICAL, math.nan, None, message="singular starting basis")
        since_refactor = 0
        bland = False
        best_obj, stall = INF, 0
        last_phase = None
        while True:
            xN = self._nonbasic_values()
            xB = -self.Binv @ (self.M @ xN)
            lo_b, hi_b = self.lo[self.head], self.hi[self.head]
            scale_b = 1.0 + np.abs(xB)
            below = xB < lo_b - self.ptol * scale_b
            above = xB > hi_b + self.ptol * scale_b
            phase1 = bool(np.any(below) or np.any(above))
            if phase1:
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cfull = np.zeros(n + m)
                obj = float(np.sum(np.where(below, lo_b - xB, 0.0)) + np.sum(np.where(above, xB - hi_b, 0.0)))
            else:
                cB = self.c[self.head]
                cfull = self.c
                x_all = xN.copy()
                x_all[self.head] = xB
                obj = float(self.c @ x_all)
            if last_phase != phase1:
                best_obj, stall, bland = INF, 0, False
                last_phase = phase1
            # stall detection for anti-cycling
            if obj < best_obj - 1e-12 * (1 + abs(best_obj)):
                best_obj, stall = obj, 0
                bland = False
            else:
                stall += 1
                if stall > 30:
                    bland = True

            y = cB @ self.Binv
            d = cfull - y @ self.M
            nb = self.status != BASIC
            can_up = nb & (self.status == AT_LO) & (self.hi > self.lo)
            can_dn = nb & (self.status == AT_HI) & (self.hi > self.lo)
            dscale = 1.0 + np.abs(cfull)
            elig_up = can_up & (d < -self.dtol * dscale)
            elig_dn = can_dn & (d > self.dtol * dscale)
            elig = elig_up | elig_dn
            if not np.any(elig):
                if phase1:
                    return LPResult(INFEASIBLE, math.nan, None, iterations=self.iterations,
                                    basis=Basis(self.head.copy(), self.status.copy()),
                                    message=f"phase-1 infeasibility {obj:.3e}")
                return self._finish(xN, xB, y, d)
            if self.iterations >= self.max_iter:
                return LPResult(ITERATION_LIMIT, math.nan, None, iterations=self.iterations)
            cand = np.flatnonzero(elig)
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            s = 1.0 if elig_up[j] else -1.0
            alpha = self.Binv @ self.M[:, j]
            # x_B moves by -s*t*alpha as x_j moves by s*t
            rate = -s * alpha
            t_max, leave, leave_to = self._ratio(xB, rate, below, above, phase1, j)
            if leave == -2:
                if phase1:
                    return LPResult(NUMERICAL, math.nan, None, iterations=self.iterations,
                                    message="unbounded phase-1 ray")
                return LPResult(UNBOUNDED, -INF, None, iterations=self.iterations)
            self.iterations += 1
            if leave == -1:
                # bound flip of the entering column
                self.status[j] = AT_HI if s > 0 else AT_LO
                continue
            r = leave
            out = self.head[r]
            piv = alpha[r]
            if abs(piv) < 1e-11:
                if not self.refactor():
                    return LPResult(NUMERICAL, math.nan, None, iterations=self.iterations, message="tiny pivot")
                since_refactor = 0
                bland = True
                continue
            self.status[out] = leave_to
            self.status[j] = BASIC
            self.head[r] = j
            # product-form update of the inverse
            row = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[r] = row
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                if not self.refactor():
                    return LPResult(NUMERICAL, math.nan, None, iterations=self.iterations, message="singular basis")
                since_refactor = 0

    def _ratio(self, xB, rate, below, above, phase1, j):
        """Harris two-pass ratio test. Returns (t, leaving row or -1 for bound flip or -2 for unbounded, new status)."""
        own = self.hi[j] - self.lo[j]
        lo_b, hi_b = self.lo[self.head], self.hi[self.head]
        tol = self.ptol * (1.0 + np.abs(xB))
        piv_tol = 1e-9
        limits = np.full(self.m, INF)
        limits_relaxed = np.full(self.m, INF)
        target = np.full(self.m, -1, dtype=int)
        up = rate > piv_tol
        dn = rate < -piv_tol
        if phase1:
            # infeasible basics stop when they reach the violated bound
            m_up_below = up & below
            m_dn_above = dn & above
            limits[m_up_below] = (lo_b[m_up_below] - xB[m_up_below]) / rate[m_up_below]
            limits_relaxed[m_up_below] = (lo_b[m_up_below] + tol[m_up_below] - xB[m_up_below]) / rate[m_up_below]
            target[m_up_below] = AT_LO
            limits[m_dn_above] = (hi_b[m_dn_above] - xB[m_dn_above]) / rate[m_dn_above]
            limits_relaxed[m_dn_above] = (hi_b[m_dn_above] - tol[m_dn_above] - xB[m_dn_above]) / rate[m_dn_above]
            target[m_dn_above] = AT_HI
            feas = ~(below | above)
        else:
            feas = np.ones(self.m, dtype=bool)
        mu = up & feas & np.isfinite(hi_b)
        md = dn & feas & np.isfinite(lo_b)
        limits[mu] = (hi_b[mu] - xB[mu]) / rate[mu]
        limits_relaxed[mu] = (hi_b[mu] + tol[mu] - xB[mu]) / rate[mu]
        target[mu] = AT_HI
        limits[md] = (lo_b[md] - xB[md]) / rate[md]
        limits_relaxed[md] = (lo_b[md] - tol[md] - xB[md]) / rate[md]
        target[md] = AT_LO
        limits = np.maximum(limits, 0.0)
        limits_relaxed = np.maximum(limits_relaxed, 0.0)
        t1 = float(np.min(limits_relaxed)) if self.m else INF
        if own <= t1 and np.isfinite(own):
            return own, -1, None
        if not np.isfinite(t1):
            return INF, -2, None
        cand = np.flatnonzero(limits <= t1)
        r = int(cand[np.argmax(np.abs(rate[cand]))])
        return float(limits[r]), r, int(target[r])

    def _finish(self, xN, xB, y, d) -> LPResult:
        n = self.n
        x_all = xN.copy()
        x_all[self.head] = xB
        x = np.clip(x_all[:n], self.lo[:n], self.hi[:n])
        obj = float(self.c[:n] @ x) * self.cscale
        # Lagrangian bound from the current duals: valid for any y
        lo, hi = self.lo, self.hi
        with np.errstate(invalid="ignore"):
            terms = np.where(d >= 0, d * lo, d * hi)
        terms = np.where(np.abs(d) <= 1e-14, 0.0, terms)
        dual_bound = float(np.sum(terms)) * self.cscale if np.all(np.isfinite(terms)) else -INF
        duals = y / self.rscale * self.cscale if self.m else y
        return LPResult(OPTIMAL, obj, x, duals, dual_bound, self.iterations,
                        Basis(self.head.copy(), self.status.copy()))


def lp_solve(lp: LinearProgram, basis: Basis | None = None, max_iter: int = 50_000, refactor: int = 100) -> LPResult:
    """Solve the LP; optionally warm start from the basis of an LP with a prefix of these rows."""
    s = _Simplex(lp, basis, max_iter, refactor)
    res = s.solve()
    if res.status == NUMERICAL and basis is not None:
        return lp_solve(lp, None, max_iter, refactor)
    return res


# --- Kelley loop -------------------------------------------------------------------------


@dataclass
class ConvexOracle:
    """f(x) <= 0 with f convex; ``evaluate`` returns (f(x), subgradient)."""

    name: str
    evaluate: object
    seeds: list = field(default_factory=list)  # list of (coef, rhs) seed cuts  coef.x <= rhs
    tol: float = 1e-7


@dataclass
class SolveReport:
    status: str
    lower_bound: float
    iterations: int
    cuts_added: int
    wall_time: float
    lp_objective: float = math.nan
    max_violation: float = math.nan
    trace: list = field(default_factory=list)
    x: dict | None = None
    cut_pool: list = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "lp_obj", "max_violation", "cuts_added"])
        for row in self.trace:
            w.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "lower_bound": self.lower_bound,
            "lp_objective": self.lp_objective,
            "iterations": self.iterations,
            "cuts_added": self.cuts_added,
            "max_violation": self.max_violation,
            "wall_time": self.wall_time,
        }


def _clean_cut(a: np.ndarray, rhs: float, lo: np.ndarray, hi: np.ndarray, eps: float = 1e-11):
    """Drop tiny coefficients, loosening rhs so the cut stays valid over the box."""
    big = np.max(np.abs(a)) if a.size else 0.0
    small = (np.abs(a) < eps * max(big, 1.0)) & (a != 0)
    if np.any(small):
        s = a[small]
        # a.x <= rhs; dropping s*x_k needs rhs += max over box of (-s*x_k)
        rhs = rhs + float(np.sum(np.maximum(-s * lo[small], -s * hi[small])))
        a = a.copy()
        a[small] = 0.0
    return a, rhs


class KelleySolver:
    """Cutting-plane outer approximation of a model with linear rows and convex oracles."""

    def __init__(self, c, rows, lo, hi, oracles, objective_const: float = 0.0):
        self.c = np.asarray(c, float)
        self.base_rows = list(rows)
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        self.oracles = list(oracles)
        self.const = objective_const

    def run(self, tol_rel: float = 1e-6, max_iter: int = 200, viol_tol: float = 1e-7, extra_cuts=None,
            window: int = 5, purge_after: int = 15) -> SolveReport:
        t0 = time.perf_counter()
        base = [(np.asarray(a, float), s, b) for a, s, b in self.base_rows]
        cuts: list[tuple[np.ndarray, float]] = []
        idle: list[int] = []
        for o in self.oracles:
            for a, b in o.seeds:
                cuts.append((np.asarray(a, float), float(b)))
                idle.append(0)
        for a, b in extra_cuts or []:
            cuts.append((np.asarray(a, float), float(b)))
            idle.append(0)
        basis = None
        trace = []
        history: list[float] = []
        total_added = 0
        status = "tolerance-not-met"
        res = None
        best = -INF
        last_x = None
        maxv = math.nan
        for it in range(1, max_iter + 1):
            rows = base + [(a, "<=", b) for a, b in cuts]
            lp = LinearProgram.from_rows(self.c, rows, self.lo, self.hi)
            res = lp_solve(lp, basis)
            if res.status != OPTIMAL:
                status = res.status
                break
            basis = res.basis
            obj = res.objective + self.const
            bound = min(obj, res.dual_bound + self.const) if math.isfinite(res.dual_bound) else obj
            best = max(best, bound)
            x = res.x
            last_x = x
            new = []
            maxv = 0.0
            for o in self.oracles:
                f, g = o.evaluate(x)
                maxv = max(maxv, f)
                if f > viol_tol:
                    g = np.asarray(g, float)
                    rhs = float(g @ x - f)
                    a, rhs = _clean_cut(g, rhs, self.lo, self.hi)
                    if np.any(a != 0):
                        new.append((a, rhs))
            trace.append((it, obj, maxv, len(new)))
            history.append(obj)
            if not new:
                status = OPTIMAL
                break
            if len(history) > window:
                ref = history[-1 - window]
                if abs(history[-1] - ref) <= tol_rel * max(1.0, abs(history[-1])):
                    status = "converged"
                    break
            # purge cuts that have been slack for a while (basis rows shift accordingly)
            slack_rows = []
            for k, (a, b) in enumerate(cuts):
                if b - a @ x > 1e-6 * (1 + abs(b)):
                    idle[k] += 1
                else:
                    idle[k] = 0
                if idle[k] > purge_after:
                    slack_rows.append(k)
            if slack_rows:
                keep = [k for k in range(len(cuts)) if k not in set(slack_rows)]
                cuts = [cuts[k] for k in keep]
                idle = [idle[k] for k in keep]
                basis = None
            for a, b in new:
                cuts.append((a, b))
                idle.append(0)
            total_added += len(new)
        if res is None or res.status != OPTIMAL:
            lb = best if math.isfinite(best) else math.nan
            return SolveReport(status, lb, len(trace), total_added, time.perf_counter() - t0, trace=trace)
        return SolveReport(status, best, len(trace), total_added, time.perf_counter() - t0,
                           lp_objective=trace[-1][1], max_violation=maxv, trace=trace, x=last_x,
                           cut_pool=cuts)


# --- relaxation models -------------------------------------------------------------------


def _affine_range(aff: dict, index: dict, lo, hi) -> tuple[float, float]:
    a = b = 0.0
    for k, c in aff.items():
        i = index[k]
        a += min(c * lo[i], c * hi[i])
        b += max(c * lo[i], c * hi[i])
    return a, b


def model_oracles(model, index: dict, lo, hi) -> list[ConvexOracle]:
    from .relax import ConeConstraint, QuadConstraint

    n = len(index)
    names = list(index)
    out = []
    for con in model.convex:
        def evaluate(x, con=con):
            f, g = con.value_grad(dict(zip(names, x)))
            v = np.zeros(n)
            for k, c in g.items():
                v[index[k]] += c
            return f, v

        seeds = []
        if isinstance(con, ConeConstraint):
            seeds = _cone_seeds(con, index, n)
        elif isinstance(con, QuadConstraint):
            a_lo, a_hi = _affine_range(con.aff, index, lo, hi)
            for s0 in sorted({a_lo, 0.5 * (a_lo + a_hi), a_hi}):
                # w*(2 s0 s - s0^2) + lin.x <= rhs
                v = np.zeros(n)
                for k, c in con.aff.items():
                    v[index[k]] += 2 * con.weight * s0 * c
                for k, c in con.lin.items():
                    v[index[k]] += c
                if np.any(v != 0):
                    seeds.append((v, con.rhs + con.weight * s0 * s0))
        out.append(ConvexOracle(con.name, evaluate, seeds))
    return out


def _cone_seeds(con, index, n):
    """Eight supporting planes: unit directions in the first two cone components."""
    seeds = []
    k = len(con.parts)
    for t in range(8):
        ang = t * math.pi / 4
        u = [math.cos(ang), math.sin(ang)] + [0.0] * (k - 2)
        v = np.zeros(n)
        for a, uk in zip(con.parts, u):
            for name, c in a.items():
                v[index[name]] += uk * c
        for name, c in con.cap.items():
            v[index[name]] -= c
        if np.any(v != 0):
            seeds.append((v, con.cap0))
    return seeds


def model_to_solver(model) -> tuple[KelleySolver, list[str]]:
    names = list(model.variables)
    index = {k: i for i, k in enumerate(names)}
    lo = np.array([model.variables[k].lo for k in names])
    hi = np.array([model.variables[k].hi for k in names])
    c = np.zeros(len(names))
    for k, v in model.objective.items():
        c[index[k]] += v
    rows = []
    for r in model.linear:
        a = np.zeros(len(names))
        for k, v in r.coeffs.items():
            a[index[k]] += v
        rows.append((a, r.sense, r.rhs))
    return KelleySolver(c, rows, lo, hi, model_oracles(model, index, lo, hi), model.objective_const), names


def solve_lower_bound(model, tol_rel: float = 1e-6, max_iter: int = 200, viol_tol: float = 1e-7,
                      extra_cuts=None) -> SolveReport:
    """Valid lower bound on the relaxation's optimum by Kelley's cutting-plane method.

    ``extra_cuts`` is a list of (name -> coefficient, rhs) inequalities ``a.x <= rhs``
    known to be valid for the model (for instance the cut pool of a looser
    relaxation); cuts mentioning unknown variables are ignored.
    """
    solver, names = model_to_solver(model)
    index = {k: i for i, k in enumerate(names)}
    seeded = []
    for coeffs, rhs in extra_cuts or []:
        if all(k in index for k in coeffs):
            a = np.zeros(len(names))
            for k, v in coeffs.items():
                a[index[k]] += v
            seeded.append((a, rhs))
    rep = solver.run(tol_rel=tol_rel, max_iter=max_iter, viol_tol=viol_tol, extra_cuts=seeded)
    if rep.x is not None:
        rep.x = dict(zip(names, rep.x.tolist()))
    rep.cut_pool = [({names[i]: float(a[i]) for i in np.flatnonzero(a)}, b) for a, b in rep.cut_pool]
    return rep
