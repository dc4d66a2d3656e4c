"""End-to-end solves: bounds, optional tightening, and nested relaxations."""

from __future__ import annotations

import logging
import math

from .lpcore import solve_lower_bound
from .netmodel import Network
from .obbt import merged_model, tighten
from .relax import NetworkBounds, build_model

log = logging.getLogger(__name__)

# each kind is solved after the looser ones; its cut pool seeds the next solve
CHAIN = {"soc": ["soc"], "qc": ["soc", "qc"], "qc-lnc": ["soc", "qc", "qc-lnc"]}


def gap_percent(ac_obj: float, lb: float) -> float:
    """100 (ac - lb) / |ac|; the absolute value only matters for negative objectives."""
    if ac_obj == 0:
        raise ValueError("gap undefined for a zero AC objective")
    if ac_obj < 0:
        log.warning("negative AC objective %s: gap uses |ac| in the denominator", ac_obj)
    return 100.0 * (ac_obj - lb) / abs(ac_obj)


def solve_case(net: Network, kind: str, bounds: NetworkBounds | None = None, obbt: bool = False,
               obbt_kind: str | None = None, jobs: int = 1, tol_rel: float = 1e-6, max_iter: int = 200,
               nested: bool = True) -> dict:
    """Solve ``kind`` and return {kind: SolveReport, ...} for every model of the chain.

    With ``nested`` the looser models are solved first and their final cut pools
    are handed on; those cuts are valid for the tighter models, so the bounds
    come out ordered.  With ``obbt`` the relaxation is the intersection of the
    models built on the original and on the tightened bounds.
    """
    if kind not in CHAIN:
        raise ValueError(f"unknown model kind {kind!r}")
    base = bounds or NetworkBounds.from_network(net)
    tight = None
    if obbt:
        tight = tighten(net, obbt_kind or kind, bounds=base, jobs=jobs).bounds
    reports = {}
    pool = None
    for k in CHAIN[kind] if nested else [kind]:
        model = merged_model(net, k, tight, base) if tight is not None else build_model(net, k, base)
        rep = solve_lower_bound(model, tol_rel=tol_rel, max_iter=max_iter, extra_cuts=pool)
        reports[k] = rep
        pool = rep.cut_pool
        if not math.isfinite(rep.lower_bound):
            break
    if tight is not None:
        reports["bounds"] = tight
    return reports
