"""Command-line front end: parse, bounds, obbt, solve, verify-cuts, export-set, gap."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from . import cuts
from .intervals import DomainError, Interval, edge_params, w_nonedge_bounds, w_offdiag_bounds
from .netmodel import ParseError, UnsupportedFeatureError, load_case, network_to_dict
from .obbt import NetworkInfeasible, tighten
from .oracle import export_set_surface, surface_csv, verify_cuts
from .pipeline import gap_percent, solve_case
from .relax import NetworkBounds

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_SOLVER, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3, 4
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for parse errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("ACRELAX_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ACRELAX_SEED must be an integer, got {env!r}") from None


def _load(case: str):
    try:
        return load_case(case)
    except FileNotFoundError:
        raise UsageError(f"case not found: {case}") from None


def _emit(args, payload: dict, lines: list[str]):
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print("\n".join(lines))


def _write(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_parse(args) -> int:
    net = _load(args.case)
    d = network_to_dict(net)
    if args.json:
        print(json.dumps(d, indent=2))
        return EXIT_OK
    print(f"case {net.name or args.case}: base {net.base_mva} MVA, {len(net.buses)} buses, "
          f"{len(net.generators)} generators, {len(net.branches)} branches, {len(net.edges())} edges")
    print(f"{'bus':>5} {'type':>4} {'pd':>9} {'qd':>9} {'vmin':>6} {'vmax':>6}")
    for b in net.buses:
        print(f"{b.id:>5} {b.bus_type:>4} {b.p_demand:>9.4f} {b.q_demand:>9.4f} {b.v_min:>6.3f} {b.v_max:>6.3f}")
    return EXIT_OK


def _bounds_payload(net, nb: NetworkBounds, all_pairs: bool):
    buses, edges, pairs = {}, {}, {}
    for b in net.buses:
        v = nb.v[b.id]
        buses[str(b.id)] = {"v": list(v), "w": [v.lo * v.lo, v.hi * v.hi]}
    for e in net.edges():
        box = w_offdiag_bounds(nb.edge_params(e))
        edges[f"{e[0]}-{e[1]}"] = {"pad": list(nb.pad[e]), "wr": list(box.re), "wi": list(box.im)}
    if all_pairs:
        known = set(net.edges())
        ids = [b.id for b in net.buses]
        for k, i in enumerate(ids):
            for j in ids[k + 1:]:
                if (i, j) in known or (j, i) in known:
                    continue
                box = w_nonedge_bounds(nb.v[i], nb.v[j])
                pairs[f"{i}-{j}"] = {"wr": list(box.re), "wi": list(box.im)}
    return {"buses": buses, "edges": edges, "pairs": pairs}


def cmd_bounds(args) -> int:
    net = _load(args.case)
    d = _bounds_payload(net, NetworkBounds.from_network(net), args.all_pairs)
    lines = [f"{'bus':>5} {'v_lo':>8} {'v_hi':>8} {'w_lo':>8} {'w_hi':>8}"]
    for k, x in d["buses"].items():
        lines.append(f"{k:>5} {x['v'][0]:>8.4f} {x['v'][1]:>8.4f} {x['w'][0]:>8.4f} {x['w'][1]:>8.4f}")
    lines.append(f"{'edge':>7} {'pad_lo':>8} {'pad_hi':>8} {'wr_lo':>8} {'wr_hi':>8} {'wi_lo':>8} {'wi_hi':>8}")
    for k, x in d["edges"].items():
        lines.append(f"{k:>7} " + " ".join(f"{v:>8.4f}" for v in x["pad"] + x["wr"] + x["wi"]))
    for k, x in d["pairs"].items():
        lines.append(f"{k:>7} {'-':>8} {'-':>8} " + " ".join(f"{v:>8.4f}" for v in x["wr"] + x["wi"]))
    _emit(args, d, lines)
    return EXIT_OK


def cmd_obbt(args) -> int:
    net = _load(args.case)
    rep = tighten(net, args.model, eps=args.eps, max_passes=args.max_passes, jobs=args.jobs)
    d = rep.to_dict()
    if args.out:
        _write(args.out, json.dumps(d, indent=2))
    lines = [f"obbt ({args.model}): {rep.passes} passes, {rep.subproblems} subproblems, "
             f"fixpoint={rep.fixpoint}, {rep.wall_time:.2f} s"]
    for k, x in d["buses"].items():
        lines.append(f"  v_{k}: [{x['v_lo']:.6f}, {x['v_hi']:.6f}]")
    for k, x in d["edges"].items():
        lines.append(f"  pad {k}: [{x['pad_lo']:.6f}, {x['pad_hi']:.6f}]")
    _emit(args, d, lines)
    return EXIT_OK


def cmd_solve(args) -> int:
    net = _load(args.case)
    bounds = None
    if args.bounds:
        with open(args.bounds) as fh:
            bounds = NetworkBounds.from_dict(json.load(fh))
    reports = solve_case(net, args.model, bounds=bounds, obbt=args.obbt, jobs=args.jobs,
                         tol_rel=args.tol, max_iter=args.max_iter)
    rep = reports[args.model] if args.model in reports else None
    if rep is None or not math.isfinite(rep.lower_bound):
        status = rep.status if rep is not None else "not solved"
        print(f"solver failure: {status}", file=sys.stderr)
        return EXIT_SOLVER
    if args.trace:
        _write(args.trace, rep.trace_csv())
    d = {"case": args.case, "model": args.model, "obbt": args.obbt, "lower_bound": rep.lower_bound,
         "status": rep.status, "iterations": rep.iterations, "cuts_added": rep.cuts_added,
         "wall_time": sum(r.wall_time for k, r in reports.items() if k != "bounds")}
    lines = [f"model {args.model}{' +obbt' if args.obbt else ''}: lower bound {rep.lower_bound:.6f} "
             f"({rep.status}, {rep.iterations} iterations, {rep.cuts_added} cuts)"]
    if args.ac_obj is not None:
        g = gap_percent(args.ac_obj, rep.lower_bound)
        d["ac_obj"], d["gap"] = args.ac_obj, g
        lines.append(f"gap {g:.2f}%")
    _emit(args, d, lines)
    return EXIT_OK


def cmd_verify_cuts(args) -> int:
    seed = _seed(args.seed)
    rep = verify_cuts(draws=args.draws, samples=args.samples, seed=seed, tol=args.tol)
    lines = [f"{args.draws} draws x {args.samples} samples (seed {seed}): {len(rep['violations'])} violations"]
    for k, n in sorted(rep["checked"].items()):
        lines.append(f"  {k}: checked on {n} draws")
    for v in rep["violations"][:10]:
        lines.append(f"  VIOLATION draw {v['draw']} {v['cut']}: slack {v['slack']:.3e}")
    _emit(args, rep, lines)
    return EXIT_COUNTEREXAMPLE if rep["violations"] else EXIT_OK


def cmd_export_set(args) -> int:
    p = edge_params(Interval(*args.vi), Interval(*args.vj), Interval(*args.theta))
    text = surface_csv(export_set_surface(p, args.which, args.resolution))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.cuts:
        rows = [("edge", c) for c in cuts.cuts_for_edge(p).values()]
        _write(args.cuts, cuts.cuts_csv(rows))
    return EXIT_OK


def cmd_gap(args) -> int:
    g = gap_percent(args.ac, args.lb)
    _emit(args, {"ac": args.ac, "lb": args.lb, "gap": g}, [f"{g:.2f}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="acrelax", description="Strengthened convex relaxations of AC optimal power flow.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    models = ["soc", "qc", "qc-lnc"]

    p = sub.add_parser("parse", help="validate a Matpower case and dump it")
    p.add_argument("case")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("bounds", help="interval boxes for the lifted variables")
    p.add_argument("case")
    p.add_argument("--all-pairs", action="store_true", help="also list non-adjacent bus pairs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("obbt", help="optimization-based bound tightening")
    p.add_argument("case")
    p.add_argument("--model", choices=models, default="qc")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--max-passes", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write tightened bounds JSON here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_obbt)

    p = sub.add_parser("solve", help="lower bound from a relaxation")
    p.add_argument("case")
    p.add_argument("--model", choices=models, default="qc-lnc")
    p.add_argument("--obbt", action="store_true")
    p.add_argument("--bounds", help="bounds JSON (as written by obbt --out)")
    p.add_argument("--ac-obj", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify-cuts", help="fuzz the closed-form cuts against sampled points")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify_cuts)

    p = sub.add_parser("export-set", help="CSV surface of S_p or S_c for one line")
    p.add_argument("--which", choices=["Sp", "Sc"], default="Sp")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--vi", type=float, nargs=2, default=[0.9, 1.2])
    p.add_argument("--vj", type=float, nargs=2, default=[0.8, 1.0])
    p.add_argument("--theta", type=float, nargs=2, default=[math.pi / 12, 5 * math.pi / 12])
    p.add_argument("--out")
    p.add_argument("--cuts", help="also write the cut coefficients CSV here")
    p.set_defaults(func=cmd_export_set)

    p = sub.add_parser("gap", help="optimality gap in percent")
    p.add_argument("--ac", type=float, required=True)
    p.add_argument("--lb", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gap)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"acrelax: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UnsupportedFeatureError) as exc:
        print(f"acrelax: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (DomainError, cuts.UnsupportedCaseError, ValueError) as exc:
        print(f"acrelax: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetworkInfeasible, RuntimeError) as exc:
        print(f"acrelax: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
