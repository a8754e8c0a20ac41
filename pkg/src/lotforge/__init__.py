"""lotforge: capacity-maximizing parking-lot layouts on rasterized grids.

Mixed-integer formulations (flow-based, flow with valid inequalities, and a
cut-based variant completed by dynamically separated connectivity cuts) for
two-way and one-way driveway configurations, with a brute-force oracle for
small instances and a CLI.
"""
from .engine import (BudgetNonPositive, ValidationReport, compare_formulations,
                     solve_instance, validate_layout)
from .formulations import (FormulationKind, MultiEntrance, TurnRestriction, Variant,
                           build_model)
from .grid import (AnchorSets, Cell, DriveGraph, FieldParams, GridSpec, Mode,
                   build_drive_graph, compute_anchor_sets, dump_instance, hop_rings,
                   load_instance, rasterize_polygon)
from .model import Layout, SolveResult, SolveStatus
from .oracle import OracleResult, brute_force_one_way, brute_force_two_way
from .synth import default_params, generate_instance

__all__ = [
    "AnchorSets", "BudgetNonPositive", "Cell", "DriveGraph", "FieldParams",
    "FormulationKind", "GridSpec", "Layout", "Mode", "MultiEntrance",
    "OracleResult", "SolveResult", "SolveStatus", "TurnRestriction",
    "ValidationReport", "Variant", "brute_force_one_way", "brute_force_two_way",
    "build_drive_graph", "build_model", "compare_formulations",
    "compute_anchor_sets", "default_params", "dump_instance",
    "generate_instance", "hop_rings", "load_instance", "rasterize_polygon",
    "solve_instance", "validate_layout",
]

__version__ = "0.1.0"
