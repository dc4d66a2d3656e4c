"""Assembly of the SOC, QC and QC+LNC relaxations as solver-ready constraint systems."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from . import cuts as cutlib
from .envelopes import (
    QUADRATIC,
    ConstraintDescriptor,
    VarRef,
    cos_envelope,
    difference,
    mccormick,
    sin_envelope,
    square_envelope,
)
from .intervals import EdgeParams, Interval, edge_params, interval_cos, interval_sin, w_offdiag_bounds
from .netmodel import Network, branch_constants

Edge = tuple[int, int]


class ModelBuildError(ValueError):
    pass


# --- bounds ----------------------------------------------------------------------


@dataclass
class NetworkBounds:
    """Voltage-magnitude box per bus and PAD interval per edge."""

    v: dict[int, Interval]
    pad: dict[Edge, Interval]

    @classmethod
    def from_network(cls, net: Network) -> "NetworkBounds":
        v = {b.id: Interval(b.v_min, b.v_max) for b in net.buses}
        pad = {e: Interval(*net.edge_pad(e)) for e in net.edges()}
        return cls(v, pad)

    def edge_params(self, e: Edge) -> EdgeParams:
        return edge_params(self.v[e[0]], self.v[e[1]], self.pad[e])

    def subset_of(self, other: "NetworkBounds", tol: float = 0.0) -> bool:
        return all(self.v[k].subset_of(other.v[k], tol) for k in self.v) and all(
            self.pad[e].subset_of(other.pad[e], tol) for e in self.pad
        )

    def copy(self) -> "NetworkBounds":
        return NetworkBounds(dict(self.v), dict(self.pad))

    def to_dict(self) -> dict:
        return {
            "buses": {str(k): {"v_lo": iv.lo, "v_hi": iv.hi} for k, iv in self.v.items()},
            "edges": {f"{e[0]}-{e[1]}": {"pad_lo": iv.lo, "pad_hi": iv.hi} for e, iv in self.pad.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkBounds":
        v = {int(k): Interval(x["v_lo"], x["v_hi"]) for k, x in d["buses"].items()}
        pad = {}
        for k, x in d["edges"].items():
            a, b = k.split("-")
            pad[(int(a), int(b))] = Interval(x["pad_lo"], x["pad_hi"])
        return cls(v, pad)


def angle_bounds(net: Network, b: NetworkBounds) -> dict[int, Interval]:
    """Symmetric boxes for bus angles: shortest-path sum of PAD magnitudes from the reference, capped at pi."""
    adj: dict[int, list[tuple[int, float]]] = {x.id: [] for x in net.buses}
    for e, iv in b.pad.items():
        w = max(abs(iv.lo), abs(iv.hi))
        adj[e[0]].append((e[1], w))
        adj[e[1]].append((e[0], w))
    dist = {net.reference: 0.0}
    heap = [(0.0, net.reference)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, math.inf):
            continue
        for nb, w in adj[u]:
            if d + w < dist.get(nb, math.inf):
                dist[nb] = d + w
                heapq.heappush(heap, (d + w, nb))
    return {k: Interval(-min(dist.get(k, math.pi), math.pi), min(dist.get(k, math.pi), math.pi)) for k in adj}


# --- model containers ---------------------------------------------------------------


@dataclass(frozen=True)
class LinearRow:
    coeffs: dict[str, float]
    sense: str
    rhs: float
    name: str
    family: str


@dataclass(frozen=True)
class ConeConstraint:
    """norm(parts_k . x) - (cap . x + cap0) <= 0."""

    name: str
    family: str
    parts: tuple[dict[str, float], ...]
    cap: dict[str, float]
    cap0: float = 0.0

    def value_grad(self, x: dict[str, float]) -> tuple[float, dict[str, float]]:
        vals = [sum(c * x[k] for k, c in a.items()) for a in self.parts]
        nrm = math.sqrt(sum(v * v for v in vals))
        f = nrm - sum(c * x[k] for k, c in self.cap.items()) - self.cap0
        g: dict[str, float] = {}
        if nrm > 0:
            for a, v in zip(self.parts, vals):
                for k, c in a.items():
                    g[k] = g.get(k, 0.0) + c * v / nrm
        for k, c in self.cap.items():
            g[k] = g.get(k, 0.0) - c
        return f, g


@dataclass(frozen=True)
class QuadConstraint:
    """weight * (aff . x)^2 + lin . x - rhs <= 0."""

    name: str
    family: str
    weight: float
    aff: dict[str, float]
    lin: dict[str, float]
    rhs: float

    def value_grad(self, x: dict[str, float]) -> tuple[float, dict[str, float]]:
        s = sum(c * x[k] for k, c in self.aff.items())
        f = self.weight * s * s + sum(c * x[k] for k, c in self.lin.items()) - self.rhs
        g = dict(self.lin)
        for k, c in self.aff.items():
            g[k] = g.get(k, 0.0) + 2 * self.weight * s * c
        return f, g

    @classmethod
    def from_descriptor(cls, d: ConstraintDescriptor, family: str) -> "QuadConstraint":
        w, aff = d.square
        return cls(d.name, family, w, dict(aff), dict(d.coeffs), d.rhs)


@dataclass
class RelaxModel:
    kind: str
    variables: dict[str, Interval] = field(default_factory=dict)
    linear: list[LinearRow] = field(default_factory=list)
    convex: list = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    objective_const: float = 0.0
    edges: list[Edge] = field(default_factory=list)
    lnc_keys: set = field(default_factory=set)

    def add_var(self, name: str, lo: float, hi: float):
        if name in self.variables:
            raise ModelBuildError(f"duplicate variable {name}")
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ModelBuildError(f"variable {name} is unbounded")
        self.variables[name] = Interval(lo, hi)

    def add_row(self, coeffs, sense, rhs, name, family):
        coeffs = {k: float(c) for k, c in coeffs.items() if c != 0.0}
        for k in coeffs:
            if k not in self.variables:
                raise ModelBuildError(f"row {name} references unknown variable {k}")
        self.linear.append(LinearRow(coeffs, sense, float(rhs), name, family))

    def add_descriptor(self, d: ConstraintDescriptor, family: str):
        if d.kind == QUADRATIC:
            self.convex.append(QuadConstraint.from_descriptor(d, family))
        else:
            self.add_row(d.coeffs, d.sense, d.rhs, d.name, family)

    def copy(self) -> "RelaxModel":
        return RelaxModel(self.kind, dict(self.variables), list(self.linear), list(self.convex),
                          dict(self.objective), self.objective_const, list(self.edges), set(self.lnc_keys))

    def size(self) -> dict:
        fam: dict[str, int] = {}
        for r in self.linear:
            fam[r.family] = fam.get(r.family, 0) + 1
        quad = sum(isinstance(c, QuadConstraint) for c in self.convex)
        cones = sum(isinstance(c, ConeConstraint) for c in self.convex)
        qfam: dict[str, int] = {}
        for c in self.convex:
            qfam[c.family] = qfam.get(c.family, 0) + 1
        return {
            "variables": len(self.variables),
            "linear": len(self.linear),
            "quadratic": quad,
            "cones": cones,
            "linear_by_family": fam,
            "convex_by_family": qfam,
        }

    def objective_value(self, x: dict[str, float]) -> float:
        return self.objective_const + sum(c * x[k] for k, c in self.objective.items())

    def check_point(self, x: dict[str, float], tol: float = 1e-9) -> dict[str, float]:
        """Largest violation per constraint family (bounds included); empty values mean zero."""
        worst: dict[str, float] = {}

        def note(fam, v):
            worst[fam] = max(worst.get(fam, 0.0), v)

        for k, iv in self.variables.items():
            note("bounds", max(iv.lo - x[k], x[k] - iv.hi, 0.0))
        for r in self.linear:
            lhs = sum(c * x[k] for k, c in r.coeffs.items())
            if r.sense == "<=":
                v = lhs - r.rhs
            elif r.sense == ">=":
                v = r.rhs - lhs
            else:
                v = abs(lhs - r.rhs)
            note(r.family, max(v, 0.0))
        for c in self.convex:
            note(c.family, max(c.value_grad(x)[0], 0.0))
        return worst

    def to_dict(self) -> dict:
        def conv(c):
            if isinstance(c, ConeConstraint):
                return {"name": c.name, "family": c.family, "type": "soc", "parts": list(c.parts),
                        "cap": c.cap, "cap0": c.cap0}
            return {"name": c.name, "family": c.family, "type": "quadratic", "weight": c.weight, "aff": c.aff,
                    "lin": c.lin, "rhs": c.rhs}

        return {
            "kind": self.kind,
            "variables": [{"name": k, "lb": iv.lo, "ub": iv.hi} for k, iv in self.variables.items()],
            "linear": [{"name": r.name, "family": r.family, "coeffs": r.coeffs, "sense": r.sense, "rhs": r.rhs}
                       for r in self.linear],
            "cones": [conv(c) for c in self.convex],
            "objective": {"coeffs": self.objective, "constant": self.objective_const},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# --- variable naming ------------------------------------------------------------------


def w_name(i: int) -> str:
    return f"w_{i}"


def wr_name(e: Edge) -> str:
    return f"wr_{e[0]}_{e[1]}"


def wi_name(e: Edge) -> str:
    return f"wi_{e[0]}_{e[1]}"


def _cplx_terms(c: complex, re_name: str, im_name: str, im_sign: float):
    """Real and imaginary parts of c * (re + j*im_sign*im) as coefficient maps."""
    a, b = c.real, c.imag
    return {re_name: a, im_name: -b * im_sign}, {re_name: b, im_name: a * im_sign}


def _add_terms(dst: dict, src: dict, scale: float = 1.0):
    for k, v in src.items():
        dst[k] = dst.get(k, 0.0) + scale * v


# --- builders -------------------------------------------------------------------------


def build_soc(net: Network, bounds: NetworkBounds | None = None) -> RelaxModel:
    b = bounds or NetworkBounds.from_network(net)
    m = RelaxModel("soc", edges=net.edges())

    for bus in net.buses:
        iv = b.v[bus.id]
        m.add_var(w_name(bus.id), iv.lo ** 2, iv.hi ** 2)
    for e in m.edges:
        box = w_offdiag_bounds(b.edge_params(e))
        m.add_var(wr_name(e), box.re.lo, box.re.hi)
        m.add_var(wi_name(e), box.im.lo, box.im.hi)
    for k, g in enumerate(net.generators):
        m.add_var(f"pg_{k}", g.p_min, g.p_max)
        m.add_var(f"qg_{k}", g.q_min, g.q_max)

    out_p: dict[int, dict] = {bus.id: {} for bus in net.buses}
    out_q: dict[int, dict] = {bus.id: {} for bus in net.buses}
    for k, br in enumerate(net.branches):
        bc = branch_constants(br)
        e, rev = net.edge_of(br)
        f, t = br.from_bus, br.to_bus
        # W_ft = wr + j*s*wi with s = -1 when the branch runs against its edge
        s = -1.0 if rev else 1.0
        vf, vt = b.v[f], b.v[t]
        wmax = vf.hi * vt.hi
        for tag, own, cd, cx, sgn, vown in (("f", f, bc.ii, bc.ij, s, vf), ("t", t, bc.jj, bc.ji, -s, vt)):
            pn, qn = f"p_{k}_{tag}", f"q_{k}_{tag}"
            if br.limited:
                lim = br.s_max
            else:
                lim = abs(cd) * vown.hi ** 2 + abs(cx) * wmax
            m.add_var(pn, -lim, lim)
            m.add_var(qn, -lim, lim)
            pr, qr = _cplx_terms(cx, wr_name(e), wi_name(e), sgn)
            prow = {pn: 1.0, w_name(own): -cd.real}
            qrow = {qn: 1.0, w_name(own): -cd.imag}
            _add_terms(prow, pr, -1.0)
            _add_terms(qrow, qr, -1.0)
            m.add_row(prow, "==", 0.0, f"flow_p[{k}{tag}]", "flow")
            m.add_row(qrow, "==", 0.0, f"flow_q[{k}{tag}]", "flow")
            out_p[own][pn] = 1.0
            out_q[own][qn] = 1.0
            if br.limited:
                m.convex.append(ConeConstraint(f"thermal[{k}{tag}]", "thermal", ({pn: 1.0}, {qn: 1.0}), {}, lim))

    for bus in net.buses:
        prow = {f"pg_{g}": 1.0 for g in net.gens_at(bus.id)}
        qrow = {f"qg_{g}": 1.0 for g in net.gens_at(bus.id)}
        _add_terms(prow, out_p[bus.id], -1.0)
        _add_terms(qrow, out_q[bus.id], -1.0)
        prow[w_name(bus.id)] = prow.get(w_name(bus.id), 0.0) - bus.shunt_g
        qrow[w_name(bus.id)] = qrow.get(w_name(bus.id), 0.0) + bus.shunt_b
        m.add_row(prow, "==", bus.p_demand, f"balance_p[{bus.id}]", "balance")
        m.add_row(qrow, "==", bus.q_demand, f"balance_q[{bus.id}]", "balance")

    for e in m.edges:
        lo, hi = b.pad[e]
        wr, wi = wr_name(e), wi_name(e)
        m.add_row({wi: 1.0, wr: -math.tan(hi)}, "<=", 0.0, f"pad_hi[{e}]", "pad")
        m.add_row({wi: 1.0, wr: -math.tan(lo)}, ">=", 0.0, f"pad_lo[{e}]", "pad")
        wa, wb = w_name(e[0]), w_name(e[1])
        m.convex.append(ConeConstraint(f"soc[{e}]", "soc", ({wr: 1.0}, {wi: 1.0}, {wa: 0.5, wb: -0.5}),
                                       {wa: 0.5, wb: 0.5}))

    for k, g in enumerate(net.generators):
        m.objective[f"pg_{k}"] = m.objective.get(f"pg_{k}", 0.0) + g.cost_c1
        m.objective_const += g.cost_c0
        if g.cost_c2 > 0:
            a, b2 = g.p_min, g.p_max
            tn = f"t_{k}"
            lo = 0.0 if a <= 0 <= b2 else g.cost_c2 * min(a * a, b2 * b2)
            m.add_var(tn, lo, g.cost_c2 * max(a * a, b2 * b2))
            # t >= c2 p^2; the linear and constant parts stay in the objective
            m.convex.append(QuadConstraint(f"cost[{k}]", "cost", g.cost_c2, {f"pg_{k}": 1.0}, {tn: -1.0}, 0.0))
            m.objective[tn] = 1.0
    return m


def build_qc(net: Network, bounds: NetworkBounds | None = None) -> RelaxModel:
    b = bounds or NetworkBounds.from_network(net)
    m = build_soc(net, b)
    m.kind = "qc"
    th = angle_bounds(net, b)
    vref: dict[int, VarRef] = {}
    for bus in net.buses:
        iv = b.v[bus.id]
        m.add_var(f"v_{bus.id}", iv.lo, iv.hi)
        m.add_var(f"th_{bus.id}", th[bus.id].lo, th[bus.id].hi)
        vref[bus.id] = VarRef(f"v_{bus.id}", iv)
    m.add_row({f"th_{net.reference}": 1.0}, "==", 0.0, "ref_angle", "qc_ref")

    for bus in net.buses:
        _, ds = square_envelope(vref[bus.id], aux=w_name(bus.id))
        for d in ds:
            m.add_descriptor(d, "qc_sqr")

    for e in m.edges:
        i, j = e
        tag = f"{i}_{j}"
        pad = b.pad[e]
        td = difference(f"td_{tag}", f"th_{i}", f"th_{j}", pad)
        vv, d_vv = mccormick(vref[i], vref[j], aux=f"vv_{tag}")
        cs, d_cs = cos_envelope(td, aux=f"cs_{tag}")
        si, d_si = sin_envelope(td, aux=f"si_{tag}")
        cs = VarRef(cs.name, interval_cos(pad))
        si = VarRef(si.name, interval_sin(pad))
        mc, d_mc = mccormick(vv, cs, aux=f"mc_{tag}")
        ms, d_ms = mccormick(vv, si, aux=f"ms_{tag}")
        for ref in (vv, cs, si, mc, ms):
            m.add_var(ref.name, ref.bounds.lo, ref.bounds.hi)
        for fam, ds in (("qc_mc_vv", d_vv), ("qc_cos", d_cs), ("qc_sin", d_si), ("qc_mc_cos", d_mc),
                        ("qc_mc_sin", d_ms)):
            for d in ds:
                m.add_descriptor(d, "qc_sin_chord" if d.name.startswith("sin_chord") else fam)
        m.add_row({wr_name(e): 1.0, mc.name: -1.0}, "==", 0.0, f"link_r[{e}]", "qc_link")
        m.add_row({wi_name(e): 1.0, ms.name: -1.0}, "==", 0.0, f"link_i[{e}]", "qc_link")
    return m


def _cut_key(c: cutlib.LinearCut) -> tuple:
    n = cutlib.normalize(c)
    return tuple(round(v, 12) for v in (*n.coef, n.rhs)) + (n.sense,)


def add_lnc(m: RelaxModel, net: Network, bounds: NetworkBounds | None = None) -> RelaxModel:
    """Return a copy of m with the two lifted nonlinear cuts per edge.

    Cuts already appended by an earlier call are skipped, so repeated calls are
    no-ops; the two cuts of one edge are both kept even when they coincide.
    """
    b = bounds or NetworkBounds.from_network(net)
    out = m.copy()
    if not out.kind.endswith("-lnc"):
        out.kind = f"{m.kind}-lnc"
    seen = set(out.lnc_keys)
    for e in out.edges:
        p = b.edge_params(e)
        names = (wr_name(e), wi_name(e), w_name(e[0]), w_name(e[1]))
        for c in cutlib.lnc_cuts(p):
            key = (e, _cut_key(c))
            if key in seen:
                continue
            out.lnc_keys.add(key)
            out.add_row(dict(zip(names, c.coef)), c.sense, c.rhs, f"{c.kind}[{e}]", "lnc")
    return out


def build_model(net: Network, kind: str, bounds: NetworkBounds | None = None) -> RelaxModel:
    b = bounds or NetworkBounds.from_network(net)
    if kind == "soc":
        return build_soc(net, b)
    if kind == "qc":
        return build_qc(net, b)
    if kind == "qc-lnc":
        return add_lnc(build_qc(net, b), net, b)
    if kind == "soc-lnc":
        return add_lnc(build_soc(net, b), net, b)
    raise ValueError(f"unknown model kind {kind!r}")


# --- AC points ---------------------------------------------------------------------------


@dataclass
class ACPoint:
    v: dict[int, float]
    theta: dict[int, float]
    pg: list[float]
    qg: list[float]


def branch_flows(net: Network, pt: ACPoint) -> list[tuple[complex, complex]]:
    out = []
    for br in net.branches:
        bc = branch_constants(br)
        vf = pt.v[br.from_bus] * complex(math.cos(pt.theta[br.from_bus]), math.sin(pt.theta[br.from_bus]))
        vt = pt.v[br.to_bus] * complex(math.cos(pt.theta[br.to_bus]), math.sin(pt.theta[br.to_bus]))
        wft = vf * vt.conjugate()
        out.append((bc.ii * abs(vf) ** 2 + bc.ij * wft, bc.jj * abs(vt) ** 2 + bc.ji * wft.conjugate()))
    return out


def lift_point(m: RelaxModel, net: Network, pt: ACPoint) -> dict[str, float]:
    """Map an AC operating point to values for every variable of m."""
    x: dict[str, float] = {}
    for bus in net.buses:
        x[w_name(bus.id)] = pt.v[bus.id] ** 2
        x[f"v_{bus.id}"] = pt.v[bus.id]
        x[f"th_{bus.id}"] = pt.theta[bus.id]
    for e in m.edges:
        i, j = e
        tag = f"{i}_{j}"
        d = pt.theta[i] - pt.theta[j]
        vv = pt.v[i] * pt.v[j]
        x.update({wr_name(e): vv * math.cos(d), wi_name(e): vv * math.sin(d), f"vv_{tag}": vv,
                  f"cs_{tag}": math.cos(d), f"si_{tag}": math.sin(d), f"mc_{tag}": vv * math.cos(d),
                  f"ms_{tag}": vv * math.sin(d)})
    for k, (sf, st) in enumerate(branch_flows(net, pt)):
        x[f"p_{k}_f"], x[f"q_{k}_f"] = sf.real, sf.imag
        x[f"p_{k}_t"], x[f"q_{k}_t"] = st.real, st.imag
    for k, g in enumerate(net.generators):
        x[f"pg_{k}"], x[f"qg_{k}"] = pt.pg[k], pt.qg[k]
        x[f"t_{k}"] = g.cost_c2 * pt.pg[k] ** 2
    return {k: x[k] for k in m.variables}


def ac_objective(net: Network, pt: ACPoint) -> float:
    return sum(g.cost(pt.pg[k]) for k, g in enumerate(net.generators))


def ac_feasibility_check(net: Network, pt: ACPoint, tol: float = 1e-6) -> dict:
    """Max residual per constraint family of the exact AC model."""
    res = {"voltage": 0.0, "generator": 0.0, "balance": 0.0, "thermal": 0.0, "pad": 0.0}
    for bus in net.buses:
        v = pt.v[bus.id]
        res["voltage"] = max(res["voltage"], bus.v_min - v, v - bus.v_max)
    for k, g in enumerate(net.generators):
        res["generator"] = max(res["generator"], g.p_min - pt.pg[k], pt.pg[k] - g.p_max,
                               g.q_min - pt.qg[k], pt.qg[k] - g.q_max)
    inj = {bus.id: complex(-bus.p_demand, -bus.q_demand) - complex(bus.shunt_g, -bus.shunt_b) * pt.v[bus.id] ** 2
           for bus in net.buses}
    for k, g in enumerate(net.generators):
        inj[g.bus_id] += complex(pt.pg[k], pt.qg[k])
    for br, (sf, st) in zip(net.branches, branch_flows(net, pt)):
        inj[br.from_bus] -= sf
        inj[br.to_bus] -= st
        if br.limited:
            res["thermal"] = max(res["thermal"], abs(sf) - br.s_max, abs(st) - br.s_max)
        d = pt.theta[br.from_bus] - pt.theta[br.to_bus]
        res["pad"] = max(res["pad"], br.angmin - d, d - br.angmax)
    res["balance"] = max(max(abs(z.real), abs(z.imag)) for z in inj.values())
    res = {k: max(v, 0.0) for k, v in res.items()}
    return {"residuals": res, "max": max(res.values()), "feasible": max(res.values()) <= tol}
