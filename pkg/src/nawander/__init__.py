"""Exact non-archimedean engine for a wandering-domain construction.

The package computes, at desk scale, with the quadratic rational family
R(z) = (z^2 - z)/(bz - 1/a) over a residual-characteristic-2 field:
exact value-group arithmetic, ultrametric disk geometry, the family's
disk-image rules, itinerary planning, strict-itinerary point
construction, parameter refinement, and certificate emission plus
replay verification.
"""

__version__ = "0.1.0"

from .valgroup import ValExp, vmul, vadd_bound, rho_exponent, shrink_exponent
from .qifield import GaussianRational, sqrt_exact
from .geometry import Disk, Region, ZData, classify, contains
from .dynamics import FamilyParams, example_params, eval_map, orbit
from .planner import Plan, make_plan, default_plan, choose_m, choose_tau

__all__ = [
    "ValExp", "vmul", "vadd_bound", "rho_exponent", "shrink_exponent",
    "GaussianRational", "sqrt_exact",
    "Disk", "Region", "ZData", "classify", "contains",
    "FamilyParams", "example_params", "eval_map", "orbit",
    "Plan", "make_plan", "default_plan", "choose_m", "choose_tau",
]
