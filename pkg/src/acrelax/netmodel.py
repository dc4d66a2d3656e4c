"""Matpower case parsing and the per-unit network model."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, replace

log = logging.getLogger(__name__)

DEFAULT_PAD = math.pi / 3
# PAD bounds are clamped strictly inside (-pi/2, pi/2) so tan() stays finite.
PAD_LIMIT = math.pi / 2 - 1e-4


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float
    v_max: float
    p_demand: float = 0.0
    q_demand: float = 0.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    is_reference: bool = False
    bus_type: int = 1
    base_kv: float = 0.0

    def __post_init__(self):
        if not (0 < self.v_min <= self.v_max):
            raise ValueError(f"bus {self.id}: need 0 < v_min <= v_max, got [{self.v_min}, {self.v_max}]")


@dataclass(frozen=True)
class Generator:
    bus_id: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost_c2: float = 0.0
    cost_c1: float = 0.0
    cost_c0: float = 0.0

    def __post_init__(self):
        if self.p_min > self.p_max or self.q_min > self.q_max:
            raise ValueError(f"generator at bus {self.bus_id}: inverted bounds")
        if self.cost_c2 < 0:
            raise ValueError(f"generator at bus {self.bus_id}: cost_c2 must be >= 0")

    def cost(self, p: float) -> float:
        return self.cost_c2 * p * p + self.cost_c1 * p + self.cost_c0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    s_max: float = 0.0
    angmin: float = -DEFAULT_PAD
    angmax: float = DEFAULT_PAD
    pad_defaulted: bool = False

    def __post_init__(self):
        if self.r * self.r + self.x * self.x <= 0:
            raise ValueError(f"branch {self.from_bus}-{self.to_bus}: zero impedance")
        if not (-math.pi / 2 < self.angmin <= self.angmax < math.pi / 2):
            raise ValueError(f"branch {self.from_bus}-{self.to_bus}: PAD bounds outside (-pi/2, pi/2)")

    @property
    def limited(self) -> bool:
        return self.s_max > 0


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    name: str = ""

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bus ids")
        known = set(ids)
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise ValueError(f"branch {br.from_bus}-{br.to_bus} references an unknown bus")
            if br.from_bus == br.to_bus:
                raise ValueError(f"branch {br.from_bus}-{br.to_bus} is a self loop")
        for g in self.generators:
            if g.bus_id not in known:
                raise ValueError(f"generator references unknown bus {g.bus_id}")
        refs = [b.id for b in self.buses if b.is_reference]
        if len(refs) != 1:
            raise ValueError(f"expected exactly one reference bus, found {len(refs)}")
        if not self.is_connected():
            log.warning("network %s is not connected", self.name or "<unnamed>")

    @property
    def reference(self) -> int:
        return next(b.id for b in self.buses if b.is_reference)

    def bus(self, bus_id: int) -> Bus:
        return self._bus_index()[bus_id]

    def _bus_index(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    def edges(self) -> list[tuple[int, int]]:
        """Distinct bus pairs carrying at least one branch, in first-seen orientation."""
        seen: dict[frozenset, tuple[int, int]] = {}
        for br in self.branches:
            key = frozenset((br.from_bus, br.to_bus))
            seen.setdefault(key, (br.from_bus, br.to_bus))
        return list(seen.values())

    def edge_of(self, br: Branch) -> tuple[tuple[int, int], bool]:
        """Return the edge a branch belongs to and whether it runs against it."""
        for e in self.edges():
            if e == (br.from_bus, br.to_bus):
                return e, False
            if e == (br.to_bus, br.from_bus):
                return e, True
        raise KeyError(br)

    def edge_pad(self, edge: tuple[int, int]) -> tuple[float, float]:
        """Intersection of the PAD bounds of all branches on an edge, oriented along it."""
        lo, hi = -PAD_LIMIT, PAD_LIMIT
        for br in self.branches:
            if (br.from_bus, br.to_bus) == edge:
                lo, hi = max(lo, br.angmin), min(hi, br.angmax)
            elif (br.to_bus, br.from_bus) == edge:
                lo, hi = max(lo, -br.angmax), min(hi, -br.angmin)
        if lo > hi:
            raise ValueError(f"parallel branches on edge {edge} have disjoint PAD bounds")
        return lo, hi

    def gens_at(self, bus_id: int) -> list[int]:
        return [k for k, g in enumerate(self.generators) if g.bus_id == bus_id]

    def is_connected(self) -> bool:
        if not self.buses:
            return True
        adj: dict[int, set[int]] = {b.id: set() for b in self.buses}
        for br in self.branches:
            adj[br.from_bus].add(br.to_bus)
            adj[br.to_bus].add(br.from_bus)
        start = self.buses[0].id
        seen, stack = {start}, [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.buses)

    def with_bounds(self, v: dict[int, tuple[float, float]] | None = None) -> "Network":
        buses = tuple(
            replace(b, v_min=v[b.id][0], v_max=v[b.id][1]) if v and b.id in v else b
            for b in self.buses
        )
        return replace(self, buses=buses)


@dataclass(frozen=True)
class BranchConstants:
    """Complex coefficients of the lifted flow equations of one branch.

    S_ij = ii * W_ii + ij * W_ij and S_ji = jj * W_jj + ji * conj(W_ij),
    with W_ij = V_i conj(V_j) oriented from_bus -> to_bus.
    """

    ii: complex
    ij: complex
    jj: complex
    ji: complex
    y: complex


def branch_constants(b: Branch) -> BranchConstants:
    z = complex(b.r, b.x)
    if z == 0:
        raise ValueError("zero impedance branch")
    y = 1 / z
    t = b.tap * complex(math.cos(b.shift), math.sin(b.shift))
    ytt = y + 0.5j * b.b_charge
    yff = ytt / (abs(t) ** 2)
    yft = -y / t.conjugate()
    ytf = -y / t
    return BranchConstants(
        ii=yff.conjugate(),
        ij=yft.conjugate(),
        jj=ytt.conjugate(),
        ji=ytf.conjugate(),
        y=y,
    )


# --- Matpower text -------------------------------------------------------------

_BLOCK_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;?", re.S)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _matrix(text: str, name: str, required: bool = True, min_cols: int = 1) -> list[tuple[int, list[float]]]:
    for m in _BLOCK_RE.finditer(text):
        if m.group(1) != name:
            continue
        first_line = text.count("\n", 0, m.start(2)) + 1
        rows = []
        body = m.group(2)
        for lineno, raw in enumerate(body.split("\n")):
            for chunk in raw.split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                try:
                    vals = [float(tok) for tok in re.split(r"[\s,]+", chunk) if tok]
                except ValueError:
                    raise ParseError(f"mpc.{name}: non-numeric entry in row {chunk!r}", first_line + lineno) from None
                if len(vals) < min_cols:
                    raise ParseError(
                        f"mpc.{name}: expected at least {min_cols} columns, got {len(vals)}", first_line + lineno
                    )
                rows.append((first_line + lineno, vals))
        return rows
    if required:
        raise ParseError(f"missing matrix mpc.{name}")
    return []


def _pad_bound(deg: float, default: float) -> float:
    if abs(deg) >= 360:
        return default
    return math.radians(deg)


def parse_matpower(text: str, name: str = "") -> Network:
    """Parse the Matpower subset used by NESTA/PGLib cases into a per-unit Network."""
    clean = _strip_comments(text)
    base = None
    for m in _SCALAR_RE.finditer(clean):
        if m.group(1) == "baseMVA":
            base = float(m.group(2))
    if base is None or base <= 0:
        raise ParseError("missing or invalid mpc.baseMVA")
    if not name:
        m = re.search(r"function\s+mpc\s*=\s*(\w+)", clean)
        name = m.group(1) if m else ""

    buses = []
    for line, r in _matrix(clean, "bus", min_cols=13):
        btype = int(r[1])
        try:
            buses.append(
                Bus(
                    id=int(r[0]),
                    v_min=r[12],
                    v_max=r[11],
                    p_demand=r[2] / base,
                    q_demand=r[3] / base,
                    shunt_g=r[4] / base,
                    shunt_b=r[5] / base,
                    is_reference=btype == 3,
                    bus_type=btype,
                    base_kv=r[9],
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), line) from None

    gens_raw = []
    for line, r in _matrix(clean, "gen", min_cols=10):
        if r[7] <= 0:
            gens_raw.append(None)
            continue
        gens_raw.append((line, r))

    costs = _matrix(clean, "gencost", required=False, min_cols=4)
    if costs and len(costs) < len(gens_raw):
        raise ParseError("mpc.gencost has fewer rows than mpc.gen", costs[-1][0])
    gens = []
    for k, entry in enumerate(gens_raw):
        if entry is None:
            continue
        line, r = entry
        c2 = c1 = c0 = 0.0
        if costs:
            cline, c = costs[k]
            if int(c[0]) != 2:
                raise UnsupportedFeatureError(f"line {cline}: only polynomial gencost (model 2) is supported")
            n = int(c[3])
            coeffs = c[4 : 4 + n]
            if n > 3:
                raise UnsupportedFeatureError(f"line {cline}: polynomial cost of degree {n - 1} is not supported")
            if len(coeffs) != n:
                raise ParseError(f"mpc.gencost: expected {n} coefficients", cline)
            coeffs = [0.0] * (3 - n) + list(coeffs)
            # cost per MW -> cost per unit of per-unit power
            c2, c1, c0 = coeffs[0] * base * base, coeffs[1] * base, coeffs[2]
        try:
            gens.append(
                Generator(
                    bus_id=int(r[0]),
                    p_min=r[9] / base,
                    p_max=r[8] / base,
                    q_min=r[4] / base,
                    q_max=r[3] / base,
                    cost_c2=c2,
                    cost_c1=c1,
                    cost_c0=c0,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), line) from None

    branches = []
    for line, r in _matrix(clean, "branch", min_cols=11):
        if r[10] <= 0:
            continue
        ratio = r[8] if r[8] != 0 else 1.0
        if len(r) >= 13:
            amin, amax = r[11], r[12]
        else:
            amin = amax = 0.0
        defaulted = False
        if amin == 0 and amax == 0:
            lo, hi = -DEFAULT_PAD, DEFAULT_PAD
            defaulted = True
        else:
            lo, hi = _pad_bound(amin, -DEFAULT_PAD), _pad_bound(amax, DEFAULT_PAD)
            defaulted = abs(amin) >= 360 or abs(amax) >= 360
        lo, hi = max(lo, -PAD_LIMIT), min(hi, PAD_LIMIT)
        try:
            branches.append(
                Branch(
                    from_bus=int(r[0]),
                    to_bus=int(r[1]),
                    r=r[2],
                    x=r[3],
                    b_charge=r[4],
                    tap=ratio,
                    shift=math.radians(r[9]),
                    s_max=r[5] / base,
                    angmin=lo,
                    angmax=hi,
                    pad_defaulted=defaulted,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), line) from None

    try:
        return Network(base_mva=base, buses=tuple(buses), generators=tuple(gens), branches=tuple(branches), name=name)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _fmt(x: float) -> str:
    return repr(float(x))


def to_matpower(net: Network) -> str:
    """Serialize a Network back to Matpower text (inverse of parse_matpower)."""
    base = net.base_mva
    out = [f"function mpc = {net.name or 'case'}", "mpc.version = '2';", f"mpc.baseMVA = {_fmt(base)};", ""]
    out.append("%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin")
    out.append("mpc.bus = [")
    for b in net.buses:
        btype = 3 if b.is_reference else (b.bus_type if b.bus_type != 3 else 2)
        vals = [b.id, btype, b.p_demand * base, b.q_demand * base, b.shunt_g * base, b.shunt_b * base,
                1, 1.0, 0.0, b.base_kv, 1, b.v_max, b.v_min]
        out.append("\t" + "\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in vals) + ";")
    out.append("];\n")
    out.append("%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin")
    out.append("mpc.gen = [")
    for g in net.generators:
        vals = [g.bus_id, 0.0, 0.0, g.q_max * base, g.q_min * base, 1.0, base, 1, g.p_max * base, g.p_min * base]
        out.append("\t" + "\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in vals) + ";")
    out.append("];\n")
    out.append("mpc.gencost = [")
    for g in net.generators:
        vals = [2, 0.0, 0.0, 3, g.cost_c2 / (base * base), g.cost_c1 / base, g.cost_c0]
        out.append("\t" + "\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in vals) + ";")
    out.append("];\n")
    out.append("%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax")
    out.append("mpc.branch = [")
    for br in net.branches:
        amin, amax = math.degrees(br.angmin), math.degrees(br.angmax)
        if br.pad_defaulted and br.angmin == -DEFAULT_PAD:
            amin = -360.0
        if br.pad_defaulted and br.angmax == DEFAULT_PAD:
            amax = 360.0
        rate = br.s_max * base
        vals = [br.from_bus, br.to_bus, br.r, br.x, br.b_charge, rate, rate, rate,
                br.tap, math.degrees(br.shift), 1, amin, amax]
        out.append("\t" + "\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in vals) + ";")
    out.append("];")
    return "\n".join(out) + "\n"


def load_case(path_or_name: str) -> Network:
    """Load a case from a file path, or one of the bundled cases by name."""
    from importlib import resources
    from pathlib import Path

    p = Path(path_or_name)
    if p.exists():
        return parse_matpower(p.read_text(), name=p.stem)
    bundled = {"case5": "nesta_case5_pjm", "case5_pjm": "nesta_case5_pjm", "nesta_case5_pjm": "nesta_case5_pjm"}
    key = bundled.get(path_or_name.removesuffix(".m"))
    if key is None:
        raise FileNotFoundError(path_or_name)
    text = resources.files("acrelax.data").joinpath(f"{key}.m").read_text()
    return parse_matpower(text, name=key)


def network_to_dict(net: Network) -> dict:
    from dataclasses import asdict

    d = asdict(net)
    d["reference"] = net.reference
    d["edges"] = [list(e) for e in net.edges()]
    return d


__all__ = [
    "Bus", "Generator", "Branch", "Network", "BranchConstants", "ParseError", "UnsupportedFeatureError",
    "parse_matpower", "to_matpower", "branch_constants", "load_case", "network_to_dict", "DEFAULT_PAD", "PAD_LIMIT",
]
