"""Strengthened SOC and QC relaxations of AC optimal power flow, with verified cuts."""

from .cuts import (LinearCut, chen_cuts, cuts_for_edge, extreme_cut, lnc_cuts, normalize, wbound_cut)
from .intervals import EdgeParams, Interval, edge_params, w_nonedge_bounds, w_offdiag_bounds
from .lpcore import lp_solve, solve_lower_bound
from .netmodel import Network, load_case, parse_matpower
from .obbt import tighten
from .pipeline import gap_percent, solve_case
from .relax import NetworkBounds, add_lnc, build_model, build_qc, build_soc

__all__ = [
    "EdgeParams", "Interval", "LinearCut", "Network", "NetworkBounds", "add_lnc", "build_model", "build_qc",
    "build_soc", "chen_cuts", "cuts_for_edge", "edge_params", "extreme_cut", "gap_percent", "lnc_cuts",
    "load_case", "lp_solve", "normalize", "parse_matpower", "solve_case", "solve_lower_bound", "tighten",
    "w_nonedge_bounds", "w_offdiag_bounds", "wbound_cut",
]
__version__ = "0.1.0"
