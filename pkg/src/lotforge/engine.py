"""Solve orchestration: flow solves, the outer branch-and-cut loop, combinatorial
layout validation, and formulation comparison.

The cut formulation is completed dynamically: the backend solves the current
model, the incumbent is checked against the lazy hop-inequality pool and the
exact connectivity separators, violated constraints are added, and the model is
re-solved until the incumbent survives (optimal) or the budget runs out. Each
round appends one structured log record.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import separation
from .backend import get_backend
from .formulations import (AccessPlan, BuiltModel, FormulationKind, MultiEntrance,
                           TurnRestriction, Variant, build_model, emit_multi_entrance,
                           emit_turn_restrictions)
from .grid import (AnchorSets, Cell, DriveGraph, FieldParams, GridSpec, Mode,
                   build_drive_graph, compute_anchor_sets, connected_components,
                   drive_footprint, park0_footprint, park90_footprint)
from .model import (BOUND_TOL, Layout, LinearConstraint, SolveResult, SolveStats,
                    SolveStatus, VarRef, dir_z_var, drive_var, extract_layout,
                    park0_var, park90_var)


class BudgetNonPositive(ValueError):
    """Time budget must be positive."""


class EngineInternalError(RuntimeError):
    """An incumbent failed validation for a reason other than connectivity,
    which indicates a constraint-emitter bug rather than a model property."""


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def validate_layout(layout: Layout, grid: GridSpec, params: FieldParams,
                    multi_entrance: MultiEntrance = MultiEntrance.SINGLE,
                    turn: TurnRestriction = TurnRestriction.OFF,
                    anchors: AnchorSets | None = None,
                    graph: DriveGraph | None = None) -> ValidationReport:
    """Combinatorial re-check of a layout against every model property.

    Covers footprint bounds, single purpose, accessibility, driveway
    connectivity (per entrance-handling option), the one-way direction rules
    including commodity-flow realizability, and optional turn restrictions.
    """
    report = ValidationReport()
    if anchors is None:
        anchors = compute_anchor_sets(grid, params)
    if graph is None:
        graph = build_drive_graph(anchors, grid)
    plan = emit_multi_entrance(grid, multi_entrance)

    for cell in sorted(set(plan.fix_active) - layout.drive):
        report.add(f"fixed drive cell {tuple(cell)} is inactive")

    # (a) anchors valid, footprints in range and off blocked cells
    for name, actives, valid in (("park0", layout.park0, anchors.park0),
                                 ("park90", layout.park90, anchors.park90),
                                 ("drive", layout.drive, anchors.drive)):
        for cell in sorted(set(actives) - valid):
            report.add(f"{name} anchor {tuple(cell)} is not a valid anchor")

    # (b) single purpose
    occupied: dict[Cell, Cell] = {}
    for anchor in sorted(layout.park0):
        for cell in park0_footprint(anchor, params):
            if cell in occupied:
                report.add(f"cell {tuple(cell)} used by two parking fields")
            occupied[cell] = anchor
    for anchor in sorted(layout.park90):
        for cell in park90_footprint(anchor, params):
            if cell in occupied:
                report.add(f"cell {tuple(cell)} used by two parking fields")
            occupied[cell] = anchor
    drive_cells = set()
    for anchor in layout.drive:
        drive_cells.update(drive_footprint(anchor, params))
    for cell in sorted(set(occupied) & drive_cells):
        report.add(f"cell {tuple(cell)} used for both parking and driving")

    # (c) accessibility
    for anchor in sorted(layout.park0):
        if anchor in anchors.park0 and not (anchors.park0_access[anchor] & layout.drive):
            report.add(f"park0 anchor {tuple(anchor)} has no active drive neighbor")
    for anchor in sorted(layout.park90):
        if anchor in anchors.park90 and not (anchors.park90_access[anchor] & layout.drive):
            report.add(f"park90 anchor {tuple(anchor)} has no active drive neighbor")

    if grid.mode is Mode.TWO_WAY:
        # (d) driveway connectivity
        roots = set(plan.sep_entrance_roots)
        comps = connected_components(layout.drive, graph.undirected_neighbors)
        for comp in comps:
            if not (comp & roots):
                report.add(f"drive component of size {len(comp)} reaches no entrance"
                           f" (e.g. {tuple(sorted(comp)[0])})")
    else:
        _validate_one_way_directions(report, layout, graph, plan)

    # (f) optional turn restrictions
    if turn is not TurnRestriction.OFF:
        values: dict[VarRef, float] = {}
        for cell in layout.drive:
            values[drive_var(cell)] = 1.0
        for arc in layout.directions:
            values[dir_z_var(arc)] = 1.0
        for cons in emit_turn_restrictions(anchors, graph, params, turn, grid.mode):
            if not cons.satisfied_by(values):
                report.add(f"turn restriction violated: {cons.terms}")
    return report


def _validate_one_way_directions(report: ValidationReport, layout: Layout,
                                 graph: DriveGraph, plan: AccessPlan) -> None:
    active = layout.drive
    z = layout.directions
    for tail, head in sorted(z):
        if tail not in active or head not in active:
            report.add(f"direction arc {tuple(tail)}->{tuple(head)} touches inactive drive")
        if (head, tail) in z:
            report.add(f"anti-parallel direction arcs between {tuple(tail)} and {tuple(head)}")
        if (tail, head) not in graph.arcs:
            report.add(f"direction arc {tuple(tail)}->{tuple(head)} not in drive graph")
    out_deg: dict[Cell, int] = {}
    in_deg: dict[Cell, int] = {}
    for tail, head in z:
        out_deg[tail] = out_deg.get(tail, 0) + 1
        in_deg[head] = in_deg.get(head, 0) + 1
    for cell in sorted(active):
        if cell not in plan.out_exempt and not out_deg.get(cell):
            report.add(f"active drive {tuple(cell)} has no outgoing direction arc")
        if cell not in plan.in_exempt and not in_deg.get(cell):
            report.add(f"active drive {tuple(cell)} has no incoming direction arc")

    reach_entrance = separation._reach(z, set(plan.sep_entrance_roots), forward=False)
    for cell in sorted(active - reach_entrance):
        report.add(f"active drive {tuple(cell)} has no directed path to an entrance")
    reach_exit = separation._reach(z, set(plan.sep_exit_roots), forward=True)
    for cell in sorted(active - reach_exit):
        report.add(f"active drive {tuple(cell)} is not reachable from an exit")
    if not report.violations:
        ok_f, ok_g = separation.direction_digraph_realizable(
            layout, graph, plan.sep_entrance_roots, plan.sep_exit_roots,
            dummy_entrance_arcs=plan.disjoint)
        if not ok_f:
            report.add("direction digraph cannot carry the entrance commodity flow")
        if not ok_g:
            report.add("direction digraph cannot carry the exit commodity flow")


# ---------------------------------------------------------------------------
# Solving

LogFn = Callable[[dict], None]


def _finish(result: SolveResult, started: float) -> SolveResult:
    result.stats.wall_time = time.perf_counter() - started
    return result


def solve_instance(grid: GridSpec, params: FieldParams, kind: FormulationKind,
                   budget: float = 900.0, backend: str | None = None,
                   built: BuiltModel | None = None, log: LogFn | None = None,
                   per_component_cuts: bool = False, seed: int = 0) -> SolveResult:
    """Solve one instance with the requested formulation within a time budget.

    Flow variants are a single backend solve; the cut variant runs the outer
    separation loop. Every returned layout has passed validate_layout.
    """
    if budget <= 0:
        raise BudgetNonPositive(f"budget must be positive, got {budget}")
    started = time.perf_counter()
    if built is None:
        built = build_model(grid, params, kind)
    engine = get_backend(backend) if isinstance(backend, (str, type(None))) else backend

    if kind.variant in (Variant.FLOW, Variant.FLOW_VIS):
        raw = engine.solve(built.model, time_limit=budget, seed=seed)
        result = _raw_to_result(raw, built)
        if result.layout is not None:
            _require_valid(result.layout, built, kind)
        return _finish(result, started)

    return _finish(_outer_cut_loop(built, engine, budget, log, per_component_cuts, seed), started)


def _raw_to_result(raw, built: BuiltModel) -> SolveResult:
    stats = SolveStats(backend_nodes=raw.nodes)
    if raw.status is SolveStatus.INFEASIBLE:
        return SolveResult(SolveStatus.INFEASIBLE, lower_bound=0, upper_bound=-math.inf, stats=stats)
    if raw.values is None:
        return SolveResult(SolveStatus.TIME_LIMIT, lower_bound=0,
                           upper_bound=raw.dual_bound, stats=stats)
    layout = extract_layout(built.model, raw.values)
    lb = layout.stall_count
    ub = float(lb) if raw.status is SolveStatus.OPTIMAL else max(raw.dual_bound, float(lb))
    return SolveResult(raw.status, lower_bound=lb, upper_bound=ub, layout=layout,
                       stats=stats, assignment=raw.values)


def _require_valid(layout: Layout, built: BuiltModel, kind: FormulationKind) -> None:
    report = validate_layout(layout, built.grid, built.params,
                             multi_entrance=kind.multi_entrance, turn=kind.turn,
                             anchors=built.anchors, graph=built.graph)
    if not report.ok:
        raise EngineInternalError("solver returned an invalid layout: "
                                  + "; ".join(report.violations))


def _outer_cut_loop(built: BuiltModel, engine, budget: float, log: LogFn | None,
                    per_component: bool, seed: int) -> SolveResult:
    model = built.model
    plan = built.plan
    kind = built.kind
    started = time.perf_counter()
    lazy_pool: list[LinearConstraint] = [c for c in model.constraints if c.lazy]
    stats = SolveStats()
    best_lb = -1
    best_layout: Layout | None = None
    ub_track = math.inf

    while True:
        remaining = budget - (time.perf_counter() - started)
        if remaining <= 0.01:
            status = SolveStatus.TIME_LIMIT
            break
        raw = engine.solve(model, time_limit=remaining, seed=seed)
        stats.backend_nodes += raw.nodes
        if raw.status is SolveStatus.INFEASIBLE:
            # Cuts are valid inequalities, so infeasibility here means the
            # original instance is infeasible.
            return SolveResult(SolveStatus.INFEASIBLE, lower_bound=0,
                               upper_bound=-math.inf, stats=stats)
        if raw.values is None:
            ub_track = min(ub_track, raw.dual_bound)
            status = SolveStatus.TIME_LIMIT
            break
        ub_track = min(ub_track, raw.dual_bound)
        layout = extract_layout(model, raw.values)

        activated = []
        still_lazy = []
        for cons in lazy_pool:
            if not cons.satisfied_by(raw.values):
                activated.append(LinearConstraint(cons.terms, cons.sense, cons.rhs, cons.tag, lazy=False))
            else:
                still_lazy.append(cons)
        lazy_pool = still_lazy

        cuts = _separate(layout, built, per_component)
        new_rows = activated + cuts
        if not new_rows:
            _require_valid(layout, built, kind)
            lb = layout.stall_count
            if raw.status is SolveStatus.OPTIMAL:
                return SolveResult(SolveStatus.OPTIMAL, lower_bound=lb, upper_bound=float(lb),
                                   layout=layout, stats=stats, assignment=raw.values)
            if lb > best_lb:
                best_lb, best_layout = lb, layout
            status = SolveStatus.TIME_LIMIT
            break

        model.add_constraints(new_rows)
        stats.cut_rounds += 1
        stats.user_cuts += len(cuts)
        repaired = _repair_incumbent(layout, built)
        if repaired is not None and repaired.stall_count > best_lb:
            best_lb, best_layout = repaired.stall_count, repaired
        if log is not None:
            log({"round": stats.cut_rounds, "cuts_added": len(new_rows),
                 "lb": max(best_lb, 0), "ub": None if math.isinf(ub_track) else ub_track,
                 "elapsed_s": round(time.perf_counter() - started, 4)})

    lb = max(best_lb, 0)
    ub = max(ub_track, float(lb)) if not math.isinf(ub_track) else ub_track
    return SolveResult(status, lower_bound=lb, upper_bound=ub,
                       layout=best_layout, stats=stats)


def _separate(layout: Layout, built: BuiltModel, per_component: bool) -> list[LinearConstraint]:
    plan = built.plan
    if built.grid.mode is Mode.TWO_WAY:
        return separation.separate_two_way(layout, built.graph, built.anchors,
                                           plan.sep_entrance_roots)
    cuts = separation.separate_one_way(layout, built.graph, built.anchors,
                                       plan.sep_entrance_roots, plan.sep_exit_roots,
                                       built.edge_cut_big_m, per_component=per_component)
    if cuts:
        return cuts
    return separation.separate_flow_deficit(layout, built.graph,
                                            plan.sep_entrance_roots, plan.sep_exit_roots,
                                            built.flow_big_m,
                                            dummy_entrance_arcs=plan.disjoint)


def _repair_incumbent(layout: Layout, built: BuiltModel) -> Layout | None:
    """Best-effort feasible layout from a rejected incumbent (drops stranded
    drives and the parking that depended on them); None when fixed cells would
    have to go."""
    plan = built.plan
    grid = built.grid
    anchors = built.anchors
    graph = built.graph
    if grid.mode is Mode.TWO_WAY:
        roots = set(plan.sep_entrance_roots)
        kept: set[Cell] = set()
        for comp in connected_components(layout.drive, graph.undirected_neighbors):
            if comp & roots or (plan.disjoint and comp & set(grid.entrances)):
                kept |= comp
        directions: frozenset = frozenset()
    else:
        z = layout.directions
        kept = set(separation._reach(z, set(plan.sep_entrance_roots), forward=False))
        kept &= separation._reach(z, set(plan.sep_exit_roots), forward=True)
        kept &= layout.drive
        while True:
            arcs = {(t, h) for t, h in z if t in kept and h in kept}
            out_deg = {t for t, _ in arcs}
            in_deg = {h for _, h in arcs}
            drop = {c for c in kept
                    if (c not in plan.out_exempt and c not in out_deg)
                    or (c not in plan.in_exempt and c not in in_deg)}
            if not drop:
                break
            kept -= drop
        directions = frozenset((t, h) for t, h in z if t in kept and h in kept)
    if not set(plan.fix_active) <= kept:
        return None
    park0 = frozenset(a for a in layout.park0 if anchors.park0_access[a] & kept)
    park90 = frozenset(a for a in layout.park90 if anchors.park90_access[a] & kept)
    repaired = Layout(park0=park0, park90=park90, drive=frozenset(kept), directions=directions)
    report = validate_layout(repaired, grid, built.params,
                             multi_entrance=built.kind.multi_entrance,
                             turn=built.kind.turn, anchors=anchors, graph=graph)
    return repaired if report.ok else None


# ---------------------------------------------------------------------------
# Formulation comparison

@dataclass
class BenchRow:
    instance: str
    kind: str
    mode: str
    status: str
    lb: int
    ub: float | None
    gap: float | None
    time_s: float
    cut_rounds: int
    cuts: int

    def to_dict(self) -> dict:
        return {
            "instance": self.instance, "kind": self.kind, "mode": self.mode,
            "status": self.status, "lb": self.lb, "ub": self.ub, "gap": self.gap,
            "time_s": round(self.time_s, 4), "cut_rounds": self.cut_rounds,
            "cuts": self.cuts,
        }


def _bench_one(name: str, grid: GridSpec, params: FieldParams, kind: FormulationKind,
               budget: float, backend: str | None) -> BenchRow:
    result = solve_instance(grid, params, kind, budget=budget, backend=backend)
    ub = None if math.isinf(result.upper_bound) else round(result.upper_bound, 4)
    gap = result.gap
    gap_out = None if (math.isnan(gap) or math.isinf(gap)) else round(gap, 4)
    return BenchRow(instance=name, kind=kind.variant.value, mode=grid.mode.value,
                    status=result.status.value, lb=result.lower_bound, ub=ub, gap=gap_out,
                    time_s=result.stats.wall_time, cut_rounds=result.stats.cut_rounds,
                    cuts=result.stats.user_cuts)


def compare_formulations(instances: Sequence[tuple[str, GridSpec, FieldParams]],
                         kinds: Sequence[FormulationKind], budget: float,
                         backend: str | None = None, workers: int = 1) -> list[BenchRow]:
    """Per instance x formulation solve table (lower/upper bounds, gap, time, cuts)."""
    jobs = [(name, grid, params, kind) for name, grid, params in instances for kind in kinds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_worker, [(j, budget, backend) for j in jobs]))
    else:
        rows = [_bench_one(name, grid, params, kind, budget, backend)
                for name, grid, params, kind in jobs]
    return rows


def _bench_worker(packed) -> BenchRow:
    (name, grid, params, kind), budget, backend = packed
    return _bench_one(name, grid, params, kind, budget, backend)


def _median(values: list[float]) -> float | None:
    if not values:
        return None
    vals = sorted(values)
    mid = len(vals) // 2
    if len(vals) % 2:
        return vals[mid]
    return (vals[mid - 1] + vals[mid]) / 2


def summarize_rows(rows: Sequence[BenchRow]) -> list[dict]:
    """Group-I/II summary in the style of the experiment tables: Group I holds the
    instances every formulation solved to optimality; Group II the rest."""
    instances = sorted({r.instance for r in rows})
    kinds = sorted({r.kind for r in rows})
    by_instance: dict[str, list[BenchRow]] = {}
    for row in rows:
        by_instance.setdefault(row.instance, []).append(row)
    group1 = [i for i in instances
              if all(r.status == "optimal" for r in by_instance[i])]
    group2 = [i for i in instances if i not in group1]
    out: list[dict] = []
    for group_name, members in (("I", group1), ("II", group2)):
        for kind in kinds:
            sel = [r for r in rows if r.kind == kind and r.instance in members]
            if not sel:
                continue
            times = [r.time_s for r in sel]
            lbs = [float(r.lb) for r in sel]
            ubs = [r.ub for r in sel if r.ub is not None]
            gaps = [r.gap for r in sel if r.gap is not None]
            out.append({
                "group": group_name, "kind": kind, "count": len(sel),
                "avg_time_s": round(sum(times) / len(times), 4),
                "median_time_s": round(_median(times), 4),
                "avg_lb": round(sum(lbs) / len(lbs), 4),
                "median_lb": _median(lbs),
                "avg_ub": round(sum(ubs) / len(ubs), 4) if ubs else None,
                "avg_gap": round(sum(gaps) / len(gaps), 4) if gaps else None,
                "median_gap": _median(gaps) if gaps else None,
                "optimal_count": sum(1 for r in sel if r.status == "optimal"),
            })
    return out
