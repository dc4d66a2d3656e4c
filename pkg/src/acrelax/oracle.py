"""Ground-truth generators used to validate cuts, bounds and relaxations.

Nothing here is used to build a relaxation; these routines only sample or
enumerate the exact non-convex sets.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import cuts as cutlib
from .intervals import EdgeParams, Interval, edge_params, w_offdiag_bounds
from .netmodel import Branch, Bus, Generator, Network, branch_constants
from .relax import ACPoint, NetworkBounds, angle_bounds


# --- per-edge sets ---------------------------------------------------------------------


def sample_sp(p: EdgeParams, count: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Uniform (v_i, v_j, theta) samples mapped to rows (wr, wi, w_i, w_j)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    vi = rng.uniform(p.vi.lo, p.vi.hi, count)
    vj = rng.uniform(p.vj.lo, p.vj.hi, count)
    th = rng.uniform(p.theta.lo, p.theta.hi, count)
    r = vi * vj
    return np.column_stack([r * np.cos(th), r * np.sin(th), vi * vi, vj * vj])


def random_edge_params(rng: np.random.Generator, theta_span: float = 1.4) -> EdgeParams:
    """Parameter draw used by the fuzz suite."""
    vi = Interval(rng.uniform(0.85, 0.95), rng.uniform(1.05, 1.25))
    vj = Interval(rng.uniform(0.85, 0.95), rng.uniform(1.05, 1.25))
    a, b = np.sort(rng.uniform(-theta_span, theta_span, 2))
    return edge_params(vi, vj, Interval(float(a), float(b)))


def sp_contains(p: EdgeParams, pts, tol: float = 0.0) -> np.ndarray:
    """Membership of (wr, wi, w_i) rows in the projection of S_p; w_j is eliminated exactly."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    wr, wi, wii = pts[:, 0], pts[:, 1], pts[:, 2]
    ok = (wii >= p.vi.lo ** 2 - tol) & (wii <= p.vi.hi ** 2 + tol)
    with np.errstate(invalid="ignore", divide="ignore"):
        vj = np.sqrt((wr * wr + wi * wi) / np.maximum(wii, 1e-300))
        ang = np.arctan2(wi, wr)
    ok &= (vj >= p.vj.lo - tol) & (vj <= p.vj.hi + tol)
    ok &= (ang >= p.theta.lo - tol) & (ang <= p.theta.hi + tol)
    return ok


def sc_contains(p: EdgeParams, pts, tol: float = 0.0) -> np.ndarray:
    """Membership of (wr, wi, w_i) rows in the convex set cut out by the extreme cut."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    wr, wi, wii = pts[:, 0], pts[:, 1], pts[:, 2]
    box = w_offdiag_bounds(p)
    ok = (wii >= p.vi.lo ** 2 - tol) & (wii <= p.vi.hi ** 2 + tol)
    ok &= (wr >= box.re.lo - tol) & (wr <= box.re.hi + tol)
    ok &= (wi >= box.im.lo - tol) & (wi <= box.im.hi + tol)
    ok &= wi >= math.tan(p.theta.lo) * wr - tol
    ok &= wi <= math.tan(p.theta.hi) * wr + tol
    cut = cutlib.extreme_cut(p, "i")
    x4 = np.column_stack([wr, wi, wii, np.zeros_like(wr)])
    ok &= cut.slack(x4) >= -tol
    ok &= wr * wr + wi * wi <= wii * p.vj.hi ** 2 + tol
    return ok


def surface_box(p: EdgeParams) -> np.ndarray:
    box = w_offdiag_bounds(p)
    return np.array([[box.re.lo, box.re.hi], [box.im.lo, box.im.hi], [p.vi.lo ** 2, p.vi.hi ** 2]])


def surface_grid(p: EdgeParams, resolution: int = 100) -> np.ndarray:
    b = surface_box(p)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in b]
    g = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([a.ravel() for a in g])


def export_set_surface(p: EdgeParams, which: str = "Sp", resolution: int = 100) -> list[tuple]:
    """Rows (wr, wi, w_i, member) over a regular grid of the (wr, wi, w_i) box."""
    pts = surface_grid(p, resolution)
    if which == "Sp":
        mem = sp_contains(p, pts)
    elif which == "Sc":
        mem = sc_contains(p, pts)
    else:
        raise ValueError("which must be 'Sp' or 'Sc'")
    return [(float(a), float(b), float(c), int(m)) for (a, b, c), m in zip(pts, mem)]


def surface_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["wr", "wi", "w_i", "member"])
    w.writerows(rows)
    return buf.getvalue()


def set_volume(p: EdgeParams, which: str = "Sc", resolution: int = 100) -> float:
    """Grid-counted volume: member fraction times box volume."""
    pts = surface_grid(p, resolution)
    mem = sp_contains(p, pts) if which == "Sp" else sc_contains(p, pts)
    b = surface_box(p)
    return float(np.mean(mem) * np.prod(b[:, 1] - b[:, 0]))


# --- cut fuzzing -------------------------------------------------------------------------


def cut_slacks(p: EdgeParams, pts: np.ndarray) -> dict[str, np.ndarray]:
    """Slack of every applicable cut at S_p sample rows (nonnegative means valid)."""
    out = {}
    for kind, c in cutlib.cuts_for_edge(p).items():
        out[kind] = c.slack(pts)
    for kind in ("VUB", "VLB"):
        k = cutlib.nl_cut_constants(p, kind)
        out[f"nl_{kind}"] = cutlib.nl_cut_value(k, pts)
    return out


def verify_cuts(draws: int = 1000, samples: int = 10_000, seed: int = 0, tol: float = 1e-9) -> dict:
    """Fuzz every closed-form cut against S_p samples; returns a JSON-ready report."""
    rng = np.random.default_rng(seed)
    violations = []
    checked: dict[str, int] = {}
    for d in range(draws):
        p = random_edge_params(rng)
        pts = sample_sp(p, samples, rng)
        for kind, s in cut_slacks(p, pts).items():
            checked[kind] = checked.get(kind, 0) + 1
            k = int(np.argmin(s))
            if s[k] < -tol:
                violations.append({
                    "draw": d,
                    "cut": kind,
                    "params": {"vi": list(p.vi), "vj": list(p.vj), "theta": list(p.theta)},
                    "point": pts[k].tolist(),
                    "slack": float(s[k]),
                })
    return {"draws": draws, "samples": samples, "seed": seed, "tolerance": tol, "checked": checked,
            "violations": violations}


# --- tiny networks -----------------------------------------------------------------------


def two_bus_network(r: float = 0.0, x: float = 0.1, load: complex = 1.0 + 0.0j, pad=(-math.pi / 3, math.pi / 3),
                    v2=(0.9, 1.1), s_max: float = 0.0, c1_remote: float = 2.0, v1=(1.0, 1.0),
                    c1_slack: float = 1.0) -> Network:
    """Slack bus 1 (v fixed at 1 by default) feeding a load at bus 2, which also has a small costly generator."""
    buses = (
        Bus(1, v1[0], v1[1], is_reference=True, bus_type=3),
        Bus(2, v2[0], v2[1], p_demand=load.real, q_demand=load.imag, bus_type=2),
    )
    gens = (
        Generator(1, 0.0, 3.0, -3.0, 3.0, cost_c1=c1_slack),
        Generator(2, 0.0, 0.5, -1.0, 1.0, cost_c1=c1_remote),
    )
    branches = (Branch(1, 2, r, x, s_max=s_max, angmin=pad[0], angmax=pad[1]),)
    return Network(100.0, buses, gens, branches, name="two_bus")


def lossy_asymmetric_network() -> Network:
    """Two buses, one-sided PAD and a slack generator paid to produce, so losses are rewarded."""
    return two_bus_network(r=0.05, x=0.17, load=1.1 + 0.35j, pad=(0.25, 0.8), v1=(0.88, 1.1), v2=(0.82, 1.12),
                           c1_slack=-1.0, c1_remote=2.0)


def three_bus_network(pads=None, r: float = 0.01) -> Network:
    """Triangle with v fixed at buses 1 and 2 and free at bus 3; every bus has a generator."""
    pads = pads or {(1, 2): (-math.pi / 6, math.pi / 6), (2, 3): (-math.pi / 6, math.pi / 6),
                    (1, 3): (-math.pi / 6, math.pi / 6)}
    buses = (
        Bus(1, 1.0, 1.0, is_reference=True, bus_type=3),
        Bus(2, 1.0, 1.0, p_demand=0.3, q_demand=0.1, bus_type=2),
        Bus(3, 0.9, 1.1, p_demand=1.2, q_demand=0.4, bus_type=2),
    )
    gens = (
        Generator(1, 0.0, 2.0, -2.0, 2.0, cost_c2=0.5, cost_c1=1.0),
        Generator(2, 0.0, 1.0, -1.0, 1.0, cost_c1=1.5),
        Generator(3, 0.0, 0.4, -0.5, 0.5, cost_c1=3.0),
    )
    br = []
    for (a, b), (lo, hi) in pads.items():
        br.append(Branch(a, b, r, 10 * r, b_charge=0.02, angmin=lo, angmax=hi))
    return Network(100.0, buses, gens, tuple(br), name="three_bus")


@dataclass
class GridResult:
    objective: float
    point: ACPoint | None
    resolution: int
    feasible_points: int
    spacing: dict = field(default_factory=dict)
    lipschitz_bound: float = math.nan

    @property
    def feasible(self) -> bool:
        return self.point is not None


class InfeasibleAtResolution(RuntimeError):
    pass


def grid_global_opf(net: Network, resolution: int = 400, bounds: NetworkBounds | None = None,
                    chunk: int = 400_000) -> GridResult:
    """Exhaustive grid over non-reference angles and free voltage magnitudes.

    Every bus must carry exactly one generator, which absorbs the injection
    mismatch at each grid point; points violating any generator, thermal or PAD
    limit are discarded.  Every reported point is exactly AC-feasible, so the
    objective is an upper bound on the global optimum that tightens with resolution.
    """
    if len(net.buses) > 3:
        raise ValueError("grid oracle supports at most 3 buses")
    ids = [b.id for b in net.buses]
    gen_of = {}
    for k, g in enumerate(net.generators):
        if g.bus_id in gen_of:
            raise ValueError("grid oracle needs at most one generator per bus")
        gen_of[g.bus_id] = k
    if set(gen_of) != set(ids):
        raise ValueError("grid oracle needs a generator at every bus")
    b = bounds or NetworkBounds.from_network(net)
    th_box = angle_bounds(net, b)
    axes, names = [], []
    for bus in net.buses:
        if not bus.is_reference:
            iv = th_box[bus.id]
            axes.append(np.linspace(iv.lo, iv.hi, resolution))
            names.append(("th", bus.id))
    for bus in net.buses:
        iv = b.v[bus.id]
        if iv.hi > iv.lo:
            axes.append(np.linspace(iv.lo, iv.hi, resolution))
            names.append(("v", bus.id))
    spacing = {f"{k}_{i}": float(a[1] - a[0]) if a.size > 1 else 0.0 for (k, i), a in zip(names, axes)}
    consts = [(br, branch_constants(br)) for br in net.branches]

    shape = [a.size for a in axes]
    total = int(np.prod(shape)) if shape else 1
    best_obj, best_idx, nfeas = math.inf, None, 0
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        idx = np.unravel_index(flat, shape) if shape else ()
        vals = {nm: axes[k][idx[k]] for k, nm in enumerate(names)}
        obj, ok = _evaluate(net, b, gen_of, consts, vals, flat.size)
        nfeas += int(ok.sum())
        if ok.any():
            o = np.where(ok, obj, np.inf)
            k = int(np.argmin(o))
            if o[k] < best_obj:
                best_obj, best_idx = float(o[k]), int(flat[k])
    if best_idx is None:
        raise InfeasibleAtResolution(f"no feasible grid point at resolution {resolution}")
    idx = np.unravel_index(best_idx, shape) if shape else ()
    point = _point_at(net, b, gen_of, consts, names, axes, idx)
    lip = _neighbour_spread(net, b, gen_of, consts, names, axes, idx, best_obj)
    return GridResult(best_obj, point, resolution, nfeas, spacing, lip)


def _voltages(net, b, vals, n):
    V = {}
    for bus in net.buses:
        v = vals.get(("v", bus.id), np.full(n, b.v[bus.id].lo))
        th = vals.get(("th", bus.id), np.zeros(n))
        V[bus.id] = v * np.exp(1j * th)
    return V


def _evaluate(net, b, gen_of, consts, vals, n):
    V = _voltages(net, b, vals, n)
    inj = {bus.id: complex(bus.p_demand, bus.q_demand) + complex(bus.shunt_g, -bus.shunt_b) * np.abs(V[bus.id]) ** 2
           for bus in net.buses}
    ok = np.ones(n, dtype=bool)
    for br, bc in consts:
        vf, vt = V[br.from_bus], V[br.to_bus]
        w = vf * np.conj(vt)
        sf = bc.ii * np.abs(vf) ** 2 + bc.ij * w
        st = bc.jj * np.abs(vt) ** 2 + bc.ji * np.conj(w)
        inj[br.from_bus] = inj[br.from_bus] + sf
        inj[br.to_bus] = inj[br.to_bus] + st
        if br.limited:
            ok &= (np.abs(sf) <= br.s_max) & (np.abs(st) <= br.s_max)
        d = np.angle(w)
        ok &= (d >= br.angmin) & (d <= br.angmax)
    for e, iv in b.pad.items():
        d = np.angle(V[e[0]] * np.conj(V[e[1]]))
        ok &= (d >= iv.lo) & (d <= iv.hi)
    obj = np.zeros(n)
    for bus_id, k in gen_of.items():
        g = net.generators[k]
        s = inj[bus_id] * np.ones(n)
        pg, qg = s.real, s.imag
        ok &= (pg >= g.p_min) & (pg <= g.p_max) & (qg >= g.q_min) & (qg <= g.q_max)
        obj += g.cost_c2 * pg * pg + g.cost_c1 * pg + g.cost_c0
    return obj, ok


def _point_at(net, b, gen_of, consts, names, axes, idx) -> ACPoint:
    vals = {nm: np.array([axes[k][idx[k]]]) for k, nm in enumerate(names)}
    V = _voltages(net, b, vals, 1)
    v = {k: float(abs(z[0])) for k, z in V.items()}
    th = {k: float(np.angle(z[0])) for k, z in V.items()}
    inj = {bus.id: complex(bus.p_demand, bus.q_demand) + complex(bus.shunt_g, -bus.shunt_b) * v[bus.id] ** 2
           for bus in net.buses}
    for br, bc in consts:
        w = V[br.from_bus][0] * np.conj(V[br.to_bus][0])
        inj[br.from_bus] += bc.ii * v[br.from_bus] ** 2 + bc.ij * w
        inj[br.to_bus] += bc.jj * v[br.to_bus] ** 2 + bc.ji * np.conj(w)
    pg = [0.0] * len(net.generators)
    qg = [0.0] * len(net.generators)
    for bus_id, k in gen_of.items():
        pg[k], qg[k] = float(inj[bus_id].real), float(inj[bus_id].imag)
    return ACPoint(v, th, pg, qg)


def _neighbour_spread(net, b, gen_of, consts, names, axes, idx, best) -> float:
    """Largest objective change to a feasible grid neighbour of the optimum (an L*h estimate)."""
    spread = 0.0
    for k in range(len(axes)):
        for step in (-1, 1):
            j = list(idx)
            j[k] = j[k] + step
            if not 0 <= j[k] < axes[k].size:
                continue
            vals = {nm: np.array([axes[q][j[q]]]) for q, nm in enumerate(names)}
            obj, ok = _evaluate(net, b, gen_of, consts, vals, 1)
            if ok[0]:
                spread = max(spread, abs(float(obj[0]) - best))
    return spread
