"""Packing, cutting orders, cost evaluation and plan optimization."""

from .arrangements import enumerate_arrangements, generate_arrangements
from .cutting import Job, ObjectiveVector, enumerate_cut_orders, evaluate_costs
from .packing import Cut, Packing, Placement, pack, pack_bar, pack_sheet, simulate, validate_packing
from .planning import CutPlan, finalize_term, optimize_atomic, term_bounds

__all__ = [
    "Cut", "CutPlan", "Job", "ObjectiveVector", "Packing", "Placement",
    "enumerate_arrangements", "enumerate_cut_orders", "evaluate_costs", "finalize_term",
    "generate_arrangements", "optimize_atomic", "pack", "pack_bar", "pack_sheet",
    "simulate", "term_bounds", "validate_packing",
]
