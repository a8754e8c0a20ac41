"""Constraint emitters for each formulation variant and driveway mode.

Three variants share the single-purpose and accessibility families:

* flow: driveway connectivity through unit flows routed to the entrance (and,
  one-way, a second commodity out of the exit) with big-M forcing.
* flow-vis: the flow model plus bidirectional hop inequalities and (one-way)
  dead-end prevention.
* bnc: no flow variables; hop inequalities upfront and connectivity enforced by
  dynamically separated feasibility cuts (engine.py drives the loop).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from . import separation
from .grid import AnchorSets, Arc, Cell, DriveGraph, FieldParams, GridSpec, Mode
from .model import (SUPER_EXIT, SUPER_ROOT, LinearConstraint, ModelIR, VarRef,
                    dir_z_var, drive_var, flow_f_var, flow_g_var,
                    make_constraint, park0_var, park90_var)


class Variant(Enum):
    FLOW = "flow"
    FLOW_VIS = "flow-vis"
    CUT = "bnc"


class TurnRestriction(Enum):
    OFF = "off"
    UNIFORM = "uniform"
    NO_SHARP = "no-sharp"
    NO_OPPOSITE_OVERLAP = "no-opposite-overlap"
    MIN_SEGMENT = "min-segment"


_TWO_WAY_TURNS = (TurnRestriction.OFF, TurnRestriction.UNIFORM, TurnRestriction.NO_SHARP)
_ONE_WAY_TURNS = (TurnRestriction.OFF, TurnRestriction.NO_OPPOSITE_OVERLAP,
                  TurnRestriction.MIN_SEGMENT)


class MultiEntrance(Enum):
    SINGLE = "single"
    CONNECTED = "connected"
    DISJOINT = "disjoint"


class FewerThanTwoEntrances(ValueError):
    """connected/disjoint multi-entrance handling needs at least two entrances."""


class EntranceEqualsExit(ValueError):
    """One-way mode needs distinct entrance and exit cells."""


@dataclass(frozen=True)
class FormulationKind:
    variant: Variant
    turn: TurnRestriction = TurnRestriction.OFF
    multi_entrance: MultiEntrance = MultiEntrance.SINGLE

    def validate(self, grid: GridSpec) -> None:
        allowed = _TWO_WAY_TURNS if grid.mode is Mode.TWO_WAY else _ONE_WAY_TURNS
        if self.turn not in allowed:
            raise ValueError(f"turn restriction {self.turn.value} not valid in {grid.mode.value} mode")


@dataclass(frozen=True)
class AccessPlan:
    """How entrances/exits are wired: flow roots, dummy arcs, and exemptions."""

    option: MultiEntrance
    flow_root: Cell
    exit_flow_root: Cell | None
    entrance_dummy_arcs: tuple[Arc, ...]
    exit_dummy_arcs: tuple[Arc, ...]
    hop_roots: tuple[Cell, ...]
    sep_entrance_roots: tuple[Cell, ...]
    sep_exit_roots: tuple[Cell, ...]
    out_exempt: frozenset[Cell]
    in_exempt: frozenset[Cell]
    fix_active: tuple[Cell, ...]

    @property
    def disjoint(self) -> bool:
        return self.option is MultiEntrance.DISJOINT


def emit_multi_entrance(grid: GridSpec, option: MultiEntrance) -> AccessPlan:
    """Resolve entrance/exit handling into flow roots, dummy arcs, and exemptions.

    connected fixes every entrance active and routes flows to one designated
    root; disjoint attaches a virtual super-root (and, one-way, a super-exit) by
    dummy arcs so each driveway component only needs to touch some entrance.
    """
    entrances = grid.entrances
    exits = grid.exits
    if not entrances:
        raise FewerThanTwoEntrances("instance has no entrance")
    if option is not MultiEntrance.SINGLE and len(entrances) < 2:
        raise FewerThanTwoEntrances(f"{option.value} needs at least two entrances")
    if option is MultiEntrance.SINGLE and (len(entrances) > 1 or len(exits) > 1):
        raise ValueError("multiple entrances/exits require connected or disjoint handling")
    if grid.mode is Mode.ONE_WAY and not exits:
        raise EntranceEqualsExit("one-way mode needs an exit")
    fix_active = tuple(sorted(set(grid.existing_drive) | set(entrances) | set(exits)))
    if option is MultiEntrance.DISJOINT:
        return AccessPlan(
            option=option,
            flow_root=SUPER_ROOT,
            exit_flow_root=SUPER_EXIT if grid.mode is Mode.ONE_WAY else None,
            entrance_dummy_arcs=tuple((e, SUPER_ROOT) for e in entrances),
            exit_dummy_arcs=tuple((SUPER_EXIT, x) for x in exits),
            hop_roots=entrances,
            sep_entrance_roots=entrances,
            sep_exit_roots=exits,
            out_exempt=frozenset(entrances),
            in_exempt=frozenset(exits),
            fix_active=fix_active,
        )
    root = entrances[0]
    exit_root = exits[0] if exits else None
    return AccessPlan(
        option=option,
        flow_root=root,
        exit_flow_root=exit_root,
        entrance_dummy_arcs=(),
        exit_dummy_arcs=(),
        hop_roots=entrances,
        sep_entrance_roots=(root,),
        sep_exit_roots=(exit_root,) if exit_root is not None else (),
        out_exempt=frozenset((root,)),
        in_exempt=frozenset((exit_root,)) if exit_root is not None else frozenset(),
        fix_active=fix_active,
    )


# ---------------------------------------------------------------------------
# Shared families

def emit_single_purpose(anchors: AnchorSets, grid: GridSpec) -> list[LinearConstraint]:
    """Disaggregated single-purpose constraints: for each unblocked cell and each
    driving field covering it, that drive plus all parking fields covering the
    cell occupy it at most once; cells under no driving field get the pure
    parking-exclusion row."""
    out: list[LinearConstraint] = []
    for cell in grid.cells():
        if cell in grid.blocked:
            continue
        park_terms = [(1.0, park0_var(a)) for a in sorted(anchors.park0_covering.get(cell, ()))]
        park_terms += [(1.0, park90_var(a)) for a in sorted(anchors.park90_covering.get(cell, ()))]
        drives = sorted(anchors.drive_covering.get(cell, ()))
        if drives and park_terms:
            for drive_anchor in drives:
                out.append(make_constraint([(1.0, drive_var(drive_anchor))] + park_terms,
                                           "<=", 1.0, "single-purpose"))
        elif len(park_terms) >= 2:
            out.append(make_constraint(park_terms, "<=", 1.0, "single-purpose"))
    return out


def emit_accessibility(anchors: AnchorSets) -> tuple[list[LinearConstraint], list[VarRef]]:
    """Parking anchors need an active driving neighbor on a shorter edge; anchors
    with no candidate neighbor are fixed to zero (returned separately)."""
    out: list[LinearConstraint] = []
    zero_fix: list[VarRef] = []
    for anchor in sorted(anchors.park0):
        access = anchors.park0_access[anchor]
        if not access:
            zero_fix.append(park0_var(anchor))
            continue
        terms = [(1.0, park0_var(anchor))] + [(-1.0, drive_var(d)) for d in sorted(access)]
        out.append(make_constraint(terms, "<=", 0.0, "accessibility"))
    for anchor in sorted(anchors.park90):
        access = anchors.park90_access[anchor]
        if not access:
            zero_fix.append(park90_var(anchor))
            continue
        terms = [(1.0, park90_var(anchor))] + [(-1.0, drive_var(d)) for d in sorted(access)]
        out.append(make_constraint(terms, "<=", 0.0, "accessibility"))
    return out, zero_fix


# ---------------------------------------------------------------------------
# Flow systems

def _entrance_flow_system(anchors: AnchorSets, graph: DriveGraph, plan: AccessPlan,
                          var=flow_f_var) -> list[LinearConstraint]:
    """Unit-per-drive flow routed to the entrance root (multi-origin, one sink)."""
    drives = sorted(anchors.drive)
    out: list[LinearConstraint] = []
    total_y = [(-1.0, drive_var(d)) for d in drives]
    if plan.entrance_dummy_arcs:
        sink_terms = [(1.0, var(a)) for a in plan.entrance_dummy_arcs]
        out.append(make_constraint(sink_terms + total_y, "==", 0.0, "flow-sink"))
        dummy_out = {a[0]: a for a in plan.entrance_dummy_arcs}
        conserved = drives
    else:
        root = plan.flow_root
        sink_terms = [(1.0, var((nb, root))) for nb in graph.in_neighbors.get(root, ())]
        out.append(make_constraint(sink_terms + total_y, "==", -1.0, "flow-sink"))
        dummy_out = {}
        conserved = [d for d in drives if d != root]
    for node in conserved:
        terms = [(1.0, var((node, nb))) for nb in graph.out_neighbors.get(node, ())]
        if node in dummy_out:
            terms.append((1.0, var(dummy_out[node])))
        terms += [(-1.0, var((nb, node))) for nb in graph.in_neighbors.get(node, ())]
        terms.append((-1.0, drive_var(node)))
        out.append(make_constraint(terms, "==", 0.0, "flow-conserve"))
    return out


def _exit_flow_system(anchors: AnchorSets, graph: DriveGraph, plan: AccessPlan) -> list[LinearConstraint]:
    """Unit-per-drive flow sent out of the exit root (one source, multi-destination)."""
    drives = sorted(anchors.drive)
    out: list[LinearConstraint] = []
    total_y = [(-1.0, drive_var(d)) for d in drives]
    if plan.exit_dummy_arcs:
        source_terms = [(1.0, flow_g_var(a)) for a in plan.exit_dummy_arcs]
        out.append(make_constraint(source_terms + total_y, "==", 0.0, "exit-flow-source"))
        dummy_in = {a[1]: a for a in plan.exit_dummy_arcs}
        conserved = drives
    else:
        root = plan.exit_flow_root
        source_terms = [(1.0, flow_g_var((root, nb))) for nb in graph.out_neighbors.get(root, ())]
        out.append(make_constraint(source_terms + total_y, "==", -1.0, "exit-flow-source"))
        dummy_in = {}
        conserved = [d for d in drives if d != root]
    for node in conserved:
        terms = [(1.0, flow_g_var((nb, node))) for nb in graph.in_neighbors.get(node, ())]
        if node in dummy_in:
            terms.append((1.0, flow_g_var(dummy_in[node])))
        terms += [(-1.0, flow_g_var((node, nb))) for nb in graph.out_neighbors.get(node, ())]
        terms.append((-1.0, drive_var(node)))
        out.append(make_constraint(terms, "==", 0.0, "exit-flow-conserve"))
    return out


def emit_two_way_flow(anchors: AnchorSets, graph: DriveGraph, plan: AccessPlan) -> list[LinearConstraint]:
    """Flow conservation, sink balance, and the big-M forcing rows that confine
    flow to active driving cells (M = |D| - 1)."""
    out = _entrance_flow_system(anchors, graph, plan)
    big_m = float(max(len(anchors.drive) - 1, 1))
    for arc in sorted(graph.arcs):
        tail, head = arc
        out.append(make_constraint([(1.0, flow_f_var(arc)), (-big_m, drive_var(tail))],
                                   "<=", 0.0, "flow-forcing"))
        out.append(make_constraint([(1.0, flow_f_var(arc)), (-big_m, drive_var(head))],
                                   "<=", 0.0, "flow-forcing"))
    return out


def emit_one_way_flow(anchors: AnchorSets, graph: DriveGraph, plan: AccessPlan) -> list[LinearConstraint]:
    """Both commodities plus direction variables.

    Direction variable bounds (z <= f <= Mz, z <= g <= Mz) replace the big-M
    forcing rows, which the paired system makes redundant; z is tied to both
    endpoint drives and anti-parallel activation is excluded.
    """
    if plan.exit_flow_root is None:
        raise EntranceEqualsExit("one-way flow needs an exit root")
    if plan.flow_root == plan.exit_flow_root:
        raise EntranceEqualsExit("entrance and exit must differ")
    out = _entrance_flow_system(anchors, graph, plan)
    out += _exit_flow_system(anchors, graph, plan)
    big_m = float(max(len(anchors.drive) - 1, 1))
    for arc in sorted(graph.arcs):
        tail, head = arc
        z = dir_z_var(arc)
        out.append(make_constraint([(1.0, z), (-1.0, flow_f_var(arc))], "<=", 0.0, "z-flow-link"))
        out.append(make_constraint([(1.0, flow_f_var(arc)), (-big_m, z)], "<=", 0.0, "z-flow-link"))
        out.append(make_constraint([(1.0, z), (-1.0, flow_g_var(arc))], "<=", 0.0, "z-flow-link"))
        out.append(make_constraint([(1.0, flow_g_var(arc)), (-big_m, z)], "<=", 0.0, "z-flow-link"))
    out += emit_direction_couplings(graph)
    return out


def emit_direction_couplings(graph: DriveGraph) -> list[LinearConstraint]:
    """z <= y at both arc endpoints; at most one direction active per edge."""
    out: list[LinearConstraint] = []
    for arc in sorted(graph.arcs):
        tail, head = arc
        z = dir_z_var(arc)
        out.append(make_constraint([(1.0, z), (-1.0, drive_var(tail))], "<=", 0.0, "z-drive-link"))
        out.append(make_constraint([(1.0, z), (-1.0, drive_var(head))], "<=", 0.0, "z-drive-link"))
        if arc < (arc[1], arc[0]) and (arc[1], arc[0]) in graph.arcs:
            out.append(make_constraint([(1.0, z), (1.0, dir_z_var((arc[1], arc[0])))],
                                       "<=", 1.0, "anti-parallel"))
    return out


def emit_terminal_direction(graph: DriveGraph, plan: AccessPlan) -> tuple[list[LinearConstraint], list[VarRef]]:
    """Direction-variable facts implied by the flow system, added upfront in the
    cut formulation: no arc leaves the entrance root or enters the exit root; the
    exit root emits exactly its own unit, the entrance root receives one."""
    if plan.disjoint:
        return [], []
    out: list[LinearConstraint] = []
    zero_fix: list[VarRef] = []
    root = plan.flow_root
    exit_root = plan.exit_flow_root
    zero_fix.extend(dir_z_var((root, nb)) for nb in graph.out_neighbors.get(root, ()))
    in_terms = [(1.0, dir_z_var((nb, root))) for nb in graph.in_neighbors.get(root, ())]
    if in_terms:
        out.append(make_constraint(in_terms, "<=", 1.0, "terminal-direction"))
    if exit_root is not None:
        zero_fix.extend(dir_z_var((nb, exit_root)) for nb in graph.in_neighbors.get(exit_root, ()))
        out_terms = [(1.0, dir_z_var((exit_root, nb))) for nb in graph.out_neighbors.get(exit_root, ())]
        if out_terms:
            out.append(make_constraint(out_terms, "<=", 1.0, "terminal-direction"))
    return out, zero_fix


def flow_balance_identity(graph: DriveGraph, values: Mapping[VarRef, float],
                          entrances: Iterable[Cell], exits: Iterable[Cell],
                          tol: float = 1e-6) -> bool:
    """Check the implied identity: combined commodity outflow equals inflow at
    every valid driving cell that is not an entrance or exit."""
    terminals = set(entrances) | set(exits)
    for node in sorted(graph.nodes):
        if node in terminals:
            continue
        outflow = sum(values.get(flow_f_var((node, nb)), 0.0) + values.get(flow_g_var((node, nb)), 0.0)
                      for nb in graph.out_neighbors.get(node, ()))
        inflow = sum(values.get(flow_f_var((nb, node)), 0.0) + values.get(flow_g_var((nb, node)), 0.0)
                     for nb in graph.in_neighbors.get(node, ()))
        if abs(outflow - inflow) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Turn restrictions (appendix families)

_REFLECTIONS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_DIHEDRAL = tuple((sr, sc, swap) for sr, sc in _REFLECTIONS for swap in (False, True))


def _apply(offset: tuple[int, int], sr: int, sc: int, swap: bool) -> tuple[int, int]:
    r, c = offset
    if swap:
        r, c = c, r
    return (sr * r, sc * c)


def emit_turn_restrictions(anchors: AnchorSets, graph: DriveGraph, params: FieldParams,
                           option: TurnRestriction, mode: Mode) -> list[LinearConstraint]:
    """Appendix turn-handling families.

    Two-way: around every corner trio of drive anchors in a 2x2 block, forbid
    the diagonal anchors up to delta-1 cells away (uniform lane widths), and
    optionally the anti-diagonal anchors (no sharp turns). One-way: forbid
    opposite-direction arcs on overlapping driving fields, and optionally force
    a minimum straight segment of ell cells after every turn.
    """
    if option is TurnRestriction.OFF:
        return []
    out: list[LinearConstraint] = []
    seen: set = set()

    def push(cons: LinearConstraint) -> None:
        sig = cons.signature()
        if sig not in seen:
            seen.add(sig)
            out.append(cons)

    if mode is Mode.TWO_WAY:
        drive = anchors.drive
        trio = ((0, 0), (1, 0), (0, 1))
        for sr, sc in _REFLECTIONS:
            trio_t = [(sr * r, sc * c) for r, c in trio]
            diag_t = [(sr * k, sc * k) for k in range(1, params.delta)]
            sharp_t = [(sr * 1, sc * -1), (sr * -1, sc * 1)]
            for i, j in sorted(drive):
                cells = [Cell(i + r, j + c) for r, c in trio_t]
                if any(c not in drive for c in cells):
                    continue
                trio_terms = [(1.0, drive_var(c)) for c in cells]
                for dr, dc in diag_t:
                    target = Cell(i + dr, j + dc)
                    if target in drive:
                        push(make_constraint([(1.0, drive_var(target))] + trio_terms,
                                             "<=", 3.0, "turn"))
                if option is TurnRestriction.NO_SHARP:
                    for dr, dc in sharp_t:
                        target = Cell(i + dr, j + dc)
                        if target in drive:
                            push(make_constraint([(1.0, drive_var(target))] + trio_terms,
                                                 "<=", 3.0, "turn"))
        return out

    # One-way families act on direction variables.
    arcs = graph.arcs
    for (i, j), (i2, j2) in sorted(arcs):
        if i2 == i + 1 and j2 == j:  # southbound arc
            for k in range(1, params.delta):
                partner = (Cell(i + 1, j + k), Cell(i, j + k))
                if partner in arcs:
                    push(make_constraint([(1.0, dir_z_var(((Cell(i, j), Cell(i2, j2))))),
                                          (1.0, dir_z_var(partner))], "<=", 1.0, "turn"))
        elif i2 == i and j2 == j + 1:  # eastbound arc
            for k in range(1, params.delta):
                partner = (Cell(i + k, j + 1), Cell(i + k, j))
                if partner in arcs:
                    push(make_constraint([(1.0, dir_z_var(((Cell(i, j), Cell(i2, j2))))),
                                          (1.0, dir_z_var(partner))], "<=", 1.0, "turn"))
    if option is TurnRestriction.MIN_SEGMENT:
        base_in = ((0, -1), (0, 0))
        base_turn = ((0, 0), (-1, 0))
        for sr, sc, swap in _DIHEDRAL:
            for i, j in sorted(graph.nodes):
                a_tail = _apply(base_in[0], sr, sc, swap)
                a_head = _apply(base_in[1], sr, sc, swap)
                b_head = _apply(base_turn[1], sr, sc, swap)
                arc_in = (Cell(i + a_tail[0], j + a_tail[1]), Cell(i + a_head[0], j + a_head[1]))
                arc_turn = (Cell(i, j), Cell(i + b_head[0], j + b_head[1]))
                if arc_in not in arcs or arc_turn not in arcs:
                    continue
                for k in range(1, params.ell):
                    seg = _apply((-k, 0), sr, sc, swap)
                    for lateral in ((-k, -1), (-k, 1)):
                        lat = _apply(lateral, sr, sc, swap)
                        arc_lat = (Cell(i + seg[0], j + seg[1]), Cell(i + lat[0], j + lat[1]))
                        if arc_lat in arcs:
                            push(make_constraint([(1.0, dir_z_var(arc_in)),
                                                  (1.0, dir_z_var(arc_turn)),
                                                  (1.0, dir_z_var(arc_lat))], "<=", 2.0, "turn"))
    return out


# ---------------------------------------------------------------------------
# Assembly

@dataclass
class BuiltModel:
    model: ModelIR
    anchors: AnchorSets
    graph: DriveGraph
    plan: AccessPlan
    kind: FormulationKind
    grid: GridSpec
    params: FieldParams

    @property
    def edge_cut_big_m(self) -> int:
        return max(len(self.graph.arcs), 2)

    @property
    def flow_big_m(self) -> int:
        return max(len(self.anchors.drive) - 1, 1)


def build_model(grid: GridSpec, params: FieldParams, kind: FormulationKind,
                anchors: AnchorSets | None = None, graph: DriveGraph | None = None,
                regular_max_hop: int = separation.DEFAULT_REGULAR_MAX_HOP,
                regular_max_rhs: int = separation.DEFAULT_REGULAR_MAX_RHS) -> BuiltModel:
    """Assemble the full ModelIR for a formulation kind on one instance."""
    from .grid import build_drive_graph, compute_anchor_sets

    kind.validate(grid)
    if anchors is None:
        anchors = compute_anchor_sets(grid, params)
    if graph is None:
        graph = build_drive_graph(anchors, grid)
    plan = emit_multi_entrance(grid, kind.multi_entrance)

    model = ModelIR()
    for anchor in sorted(anchors.park0):
        model.add_var(park0_var(anchor))
    for anchor in sorted(anchors.park90):
        model.add_var(park90_var(anchor))
    for anchor in sorted(anchors.drive):
        model.add_var(drive_var(anchor))

    one_way = grid.mode is Mode.ONE_WAY
    with_flow = kind.variant in (Variant.FLOW, Variant.FLOW_VIS)
    if with_flow:
        for arc in sorted(graph.arcs):
            model.add_var(flow_f_var(arc))
        for arc in plan.entrance_dummy_arcs:
            model.add_var(flow_f_var(arc))
        if one_way:
            for arc in sorted(graph.arcs):
                model.add_var(flow_g_var(arc))
            for arc in plan.exit_dummy_arcs:
                model.add_var(flow_g_var(arc))
    if one_way:
        for arc in sorted(graph.arcs):
            model.add_var(dir_z_var(arc))

    for cell in plan.fix_active:
        model.fix(drive_var(cell), 1.0)

    model.add_constraints(emit_single_purpose(anchors, grid))
    access_cons, zero_fix = emit_accessibility(anchors)
    model.add_constraints(access_cons)
    for var in zero_fix:
        model.fix(var, 0.0)

    if with_flow:
        if one_way:
            model.add_constraints(emit_one_way_flow(anchors, graph, plan))
        else:
            model.add_constraints(emit_two_way_flow(anchors, graph, plan))
    elif one_way:
        model.add_constraints(emit_direction_couplings(graph))

    with_vis = kind.variant in (Variant.FLOW_VIS, Variant.CUT)
    if with_vis:
        fixed = frozenset(plan.fix_active)
        hops = separation.bidirectional_hop_inequalities(
            graph, anchors, plan.hop_roots, fixed, regular_max_hop, regular_max_rhs)
        if kind.variant is Variant.FLOW_VIS:
            # No incumbent-rejection loop runs for this variant, so everything
            # must sit in the model as a regular row.
            hops = [LinearConstraint(c.terms, c.sense, c.rhs, c.tag, lazy=False) for c in hops]
        model.add_constraints(hops)
        if one_way:
            model.add_constraints(separation.dead_end_prevention(
                graph, plan.out_exempt, plan.in_exempt))

    if kind.variant is Variant.CUT and one_way:
        terminal_cons, terminal_fix = emit_terminal_direction(graph, plan)
        model.add_constraints(terminal_cons)
        for var in terminal_fix:
            if var not in model.fixings:
                model.fix(var, 0.0)

    if kind.turn is not TurnRestriction.OFF:
        model.add_constraints(emit_turn_restrictions(anchors, graph, params, kind.turn, grid.mode))

    return BuiltModel(model=model, anchors=anchors, graph=graph, plan=plan,
                      kind=kind, grid=grid, params=params)
