"""Valid inequalities and exact separation of driveway-connectivity violations.

Two families of constraints keep driving fields connected without flow
variables:

* Bidirectional hop inequalities, generated upfront: the ring of nodes at hop
  distance d from a drive cell (forward) or from the entrance (reverse) is a
  vertex separator, so a drive variable can be active only if the ring holds an
  active drive. Rings are shrunk to the boundary of the separated component and
  strengthened with parking variables whose access anchors all lie on the far
  side.

* Feasibility cuts, separated exactly at integer incumbents: minimum-cardinality
  vertex cuts (two-way, via node splitting and unit-capacity max flow) and
  minimum-weight edge cuts (one-way, with active direction arcs priced out of
  the cut) reject disconnected layouts.

One-way incumbents that pass both reachability checks can still fail to carry
the entrance/exit commodity flows (e.g. an exit with two outgoing direction
arcs but no incoming one emits more than its single unit). A third family of
flow-deficit cuts separates those, keeping the cut formulation equivalent to
the flow formulation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .grid import AnchorSets, Arc, Cell, DriveGraph, connected_components, hop_distances, hop_rings, multi_source_rings
from .model import (LinearConstraint, VarRef, dir_z_var, drive_var, make_constraint,
                    park0_var, park90_var)


class SeparationError(RuntimeError):
    """Internal inconsistency detected while generating cuts."""


class NoSeparatorExists(SeparationError):
    """Source and sink are directly adjacent; no vertex separator exists."""


class CutContainsHeavyArc(SeparationError):
    """The minimum edge cut severs an active direction arc; the incumbent was
    actually connected and separation should not have been called."""


@dataclass
class SeparationAudit:
    """Counters for the self-checks every separation call performs."""

    cuts_emitted: int = 0
    violations_confirmed: int = 0
    separator_checks: int = 0

    def reset(self) -> None:
        self.cuts_emitted = 0
        self.violations_confirmed = 0
        self.separator_checks = 0


AUDIT = SeparationAudit()


# ---------------------------------------------------------------------------
# Max flow (Dinic)

class Dinic:
    """Max flow with integer capacities on an adjacency-list residual graph."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, cap: int) -> int:
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0)
        return idx

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        big = sum(self.cap[idx] for idx in self.head[s]) + 1
        while True:
            level = self._bfs(s, t)
            if level is None:
                break
            it = [0] * self.n
            while True:
                pushed = self._dfs(s, t, big, level, it)
                if not pushed:
                    break
                flow += pushed
        return flow

    def _bfs(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        queue = [s]
        for u in queue:
            for idx in self.head[u]:
                v = self.to[idx]
                if self.cap[idx] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _dfs(self, u: int, t: int, limit: int, level: list[int], it: list[int]) -> int:
        if u == t:
            return limit
        while it[u] < len(self.head[u]):
            idx = self.head[u][it[u]]
            v = self.to[idx]
            if self.cap[idx] > 0 and level[v] == level[u] + 1:
                pushed = self._dfs(v, t, min(limit, self.cap[idx]), level, it)
                if pushed:
                    self.cap[idx] -= pushed
                    self.cap[idx ^ 1] += pushed
                    return pushed
            it[u] += 1
        return 0

    def residual_reachable(self, s: int) -> set[int]:
        seen = {s}
        queue = [s]
        for u in queue:
            for idx in self.head[u]:
                v = self.to[idx]
                if self.cap[idx] > 0 and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    def residual_coreachable(self, t: int) -> set[int]:
        """Nodes that can still reach ``t`` in the residual graph (the min cut
        nearest the sink separates them from the rest)."""
        incoming: list[list[int]] = [[] for _ in range(self.n)]
        for idx, v in enumerate(self.to):
            if self.cap[idx] > 0:
                incoming[v].append(idx ^ 1)  # residual arc u->v; remember u via the pair
        seen = {t}
        queue = [t]
        for v in queue:
            for pair_idx in incoming[v]:
                u = self.to[pair_idx]
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return seen


# ---------------------------------------------------------------------------
# Vertex and edge separators

@dataclass(frozen=True)
class VertexSeparator:
    """Nodes whose removal separates the entrance side from the far side."""

    cut_nodes: frozenset[Cell]
    near_side: frozenset[Cell]
    far_side: frozenset[Cell]


@dataclass(frozen=True)
class EdgeCut:
    """Arcs crossing from source_side to sink_side; every directed path between
    the sides uses one of them."""

    cut_arcs: frozenset[Arc]
    source_side: frozenset[Cell]
    sink_side: frozenset[Cell]


def min_vertex_cut(graph: DriveGraph, source_set: Iterable[Cell],
                   sink_set: Iterable[Cell]) -> VertexSeparator:
    """Minimum-cardinality vertex separator between two contracted node sets.

    Standard node-splitting construction: every non-contracted node becomes an
    in/out pair joined by a unit-capacity edge, adjacency arcs get infinite
    capacity, and the contracted sets become a super-source and super-sink. When
    removing the cut splits the graph into more than two components, the cut is
    shrunk to the boundary of the sink-side component for a tighter constraint.
    """
    source_set = frozenset(source_set)
    sink_set = frozenset(sink_set)
    if not source_set or not sink_set or source_set & sink_set:
        raise SeparationError("source and sink sets must be disjoint and nonempty")
    nodes = graph.nodes
    middle = sorted(nodes - source_set - sink_set)
    inf = len(nodes) + 1
    idx_in = {m: 2 + 2 * i for i, m in enumerate(middle)}
    idx_out = {m: 3 + 2 * i for i, m in enumerate(middle)}
    net = Dinic(2 + 2 * len(middle))
    for m in middle:
        net.add_edge(idx_in[m], idx_out[m], 1)
    for tail, headc in sorted(graph.arcs):
        if tail in sink_set or headc in source_set:
            continue
        if tail in source_set and headc in sink_set:
            raise NoSeparatorExists(
                f"contracted source touches contracted sink via {tuple(tail)}->{tuple(headc)}")
        u = 0 if tail in source_set else idx_out[tail]
        v = 1 if headc in sink_set else idx_in[headc]
        net.add_edge(u, v, inf)
    flow = net.max_flow(0, 1)
    if flow >= inf:
        raise NoSeparatorExists("no finite vertex cut between the contracted sets")
    # Take the minimum cut nearest the sink, so separators hug the stranded
    # component rather than the entrance.
    coreach = net.residual_coreachable(1)
    cut = frozenset(m for m in middle if idx_out[m] in coreach and idx_in[m] not in coreach)

    remaining = nodes - cut
    far: set[Cell] = set()
    for comp in connected_components(remaining, graph.undirected_neighbors):
        if comp & sink_set:
            far |= comp
    shrunk = frozenset(v for v in cut
                       if any(nb in far for nb in graph.undirected_neighbors(v)))
    far_f = frozenset(far)
    near = frozenset(nodes - far_f - shrunk)
    _assert_separates(graph, shrunk, near, far_f)
    if far_f & source_set:
        raise SeparationError("vertex cut failed to separate the contracted sets")
    return VertexSeparator(cut_nodes=shrunk, near_side=near, far_side=far_f)


def _assert_separates(graph: DriveGraph, cut: frozenset[Cell],
                      near: frozenset[Cell], far: frozenset[Cell]) -> None:
    # BFS from the far side avoiding cut nodes must stay inside the far side.
    seen = set(far)
    queue = sorted(far)
    for node in queue:
        for nb in graph.undirected_neighbors(node):
            if nb in cut or nb in seen:
                continue
            seen.add(nb)
            queue.append(nb)
    if seen & near:
        raise SeparationError("separator does not disconnect its certified sides")
    AUDIT.separator_checks += 1


def min_weighted_edge_cut(graph: DriveGraph, z_active: Iterable[Arc],
                          source_side_seed: Iterable[Cell], sink_side_seed: Iterable[Cell],
                          big_m: int) -> EdgeCut:
    """Minimum-weight directed edge cut with active direction arcs priced at big_m.

    Arcs carrying an active direction variable (and the arcs attaching the
    contracted seeds) weigh big_m; all other arcs weigh one, so the cut has
    minimum cardinality among cuts avoiding active arcs. The returned crossing
    arcs run from the source side into the sink side.
    """
    z_active = frozenset(z_active)
    source_seed = sorted(set(source_side_seed))
    sink_seed = sorted(set(sink_side_seed))
    if not source_seed or not sink_seed or set(source_seed) & set(sink_seed):
        raise SeparationError("edge-cut seeds must be disjoint and nonempty")
    nodes = sorted(graph.nodes)
    index = {n: 2 + i for i, n in enumerate(nodes)}
    net = Dinic(2 + len(nodes))
    for cell in source_seed:
        net.add_edge(0, index[cell], big_m)
    for cell in sink_seed:
        net.add_edge(index[cell], 1, big_m)
    for tail, headc in sorted(graph.arcs):
        weight = big_m if (tail, headc) in z_active else 1
        net.add_edge(index[tail], index[headc], weight)
    flow = net.max_flow(0, 1)
    if flow >= big_m:
        raise CutContainsHeavyArc(
            "minimum edge cut cannot avoid active direction arcs; incumbent was connected")
    reach = net.residual_reachable(0)
    source_side = frozenset(n for n in nodes if index[n] in reach)
    sink_side = frozenset(nodes) - source_side
    cut_arcs = frozenset((t, h) for (t, h) in graph.arcs
                         if t in source_side and h in sink_side)
    if cut_arcs & z_active:
        raise CutContainsHeavyArc("edge cut severs an active direction arc")
    _assert_edge_cut(graph, cut_arcs, frozenset(source_seed), frozenset(sink_seed))
    return EdgeCut(cut_arcs=cut_arcs, source_side=source_side, sink_side=sink_side)


def _assert_edge_cut(graph: DriveGraph, cut_arcs: frozenset[Arc],
                     sources: frozenset[Cell], sinks: frozenset[Cell]) -> None:
    seen = set(sources)
    queue = sorted(sources)
    for node in queue:
        for nb in graph.out_neighbors.get(node, ()):
            if (node, nb) in cut_arcs or nb in seen:
                continue
            seen.add(nb)
            queue.append(nb)
    if seen & sinks:
        raise SeparationError("edge cut does not break all source-to-sink paths")
    AUDIT.separator_checks += 1


# ---------------------------------------------------------------------------
# Strengthened constraint assembly

def strengthened_lhs(anchors: AnchorSets, cell: Cell, region: frozenset[Cell]) -> list[tuple[float, VarRef]]:
    """LHS terms for a connectivity cut at ``cell``: its drive variable plus every
    parking variable covering the cell whose access anchors all lie in ``region``."""
    terms: list[tuple[float, VarRef]] = [(1.0, drive_var(cell))]
    for anchor in sorted(anchors.park0_covering.get(cell, ())):
        if anchors.park0_access[anchor] <= region:
            terms.append((1.0, park0_var(anchor)))
    for anchor in sorted(anchors.park90_covering.get(cell, ())):
        if anchors.park90_access[anchor] <= region:
            terms.append((1.0, park90_var(anchor)))
    return terms


def _cut_constraint(anchors: AnchorSets, cell: Cell, region: frozenset[Cell],
                    rhs_vars: Sequence[VarRef], tag: str, lazy: bool = False) -> LinearConstraint:
    terms = strengthened_lhs(anchors, cell, region)
    terms.extend((-1.0, v) for v in rhs_vars)
    return make_constraint(terms, "<=", 0.0, tag, lazy)


# ---------------------------------------------------------------------------
# Bidirectional hop inequalities

DEFAULT_REGULAR_MAX_HOP = 3
DEFAULT_REGULAR_MAX_RHS = 8


def _component_of(graph: DriveGraph, start: Cell, removed: frozenset[Cell]) -> frozenset[Cell]:
    comp = {start}
    queue = [start]
    for node in queue:
        for nb in graph.undirected_neighbors(node):
            if nb in removed or nb in comp:
                continue
            comp.add(nb)
            queue.append(nb)
    return frozenset(comp)


def _boundary(graph: DriveGraph, ring: frozenset[Cell], comp: frozenset[Cell]) -> frozenset[Cell]:
    return frozenset(v for v in ring
                     if any(nb in comp for nb in graph.undirected_neighbors(v)))


def forward_hop_inequalities(graph: DriveGraph, anchors: AnchorSets, roots: Sequence[Cell],
                             fixed_active: frozenset[Cell],
                             regular_max_hop: int = DEFAULT_REGULAR_MAX_HOP,
                             regular_max_rhs: int = DEFAULT_REGULAR_MAX_RHS,
                             _seen: set | None = None) -> list[LinearConstraint]:
    """Hop inequalities around each drive cell, for depths up to its root distance.

    The depth-d ring around a cell separates it from every root at distance >= d,
    so the cell's drive variable (plus far-side-only parking variables) is bounded
    by the ring's drive variables. Rings containing an always-active drive cell
    yield satisfied constraints and are skipped.
    """
    dist = hop_distances(graph, roots)
    seen = _seen if _seen is not None else set()
    out: list[LinearConstraint] = []
    root_set = set(roots)
    for node in sorted(graph.nodes):
        if node in root_set:
            continue
        pi = dist.get(node)
        if not pi:
            continue  # unreachable; the reverse family fixes it to zero
        rings = hop_rings(graph, node)
        for d in range(1, pi + 1):
            ring = rings.get(d)
            if not ring:
                break
            comp = _component_of(graph, node, ring)
            cut = _boundary(graph, ring, comp)
            if cut & fixed_active:
                continue
            region = comp | cut
            cons = _cut_constraint(anchors, node, region, [drive_var(v) for v in sorted(cut)],
                                   "hop-forward",
                                   lazy=not (d <= regular_max_hop or len(cut) <= regular_max_rhs))
            sig = cons.signature()
            if sig in seen:
                continue
            seen.add(sig)
            out.append(cons)
    return out


def reverse_hop_inequalities(graph: DriveGraph, anchors: AnchorSets, roots: Sequence[Cell],
                             fixed_active: frozenset[Cell],
                             regular_max_hop: int = DEFAULT_REGULAR_MAX_HOP,
                             regular_max_rhs: int = DEFAULT_REGULAR_MAX_RHS,
                             _seen: set | None = None) -> list[LinearConstraint]:
    """Hop inequalities built from rings around the entrance(s).

    Each ring separates the root side from one or more far components; every far
    component yields one constraint per cell, with the separator shrunk to that
    component's boundary. Drive cells unreachable from the roots fall into far
    components with an empty boundary and get fixed to zero by an empty sum.
    """
    rings = multi_source_rings(graph, roots)
    pi_max = max(rings)
    seen = _seen if _seen is not None else set()
    root_set = set(roots)
    out: list[LinearConstraint] = []
    for d in range(1, pi_max + 1):
        ring = rings.get(d, frozenset())
        remaining = graph.nodes - ring
        for comp in connected_components(remaining, graph.undirected_neighbors):
            if comp & root_set:
                continue
            cut = _boundary(graph, ring, comp)
            if cut & fixed_active:
                continue
            region = comp | cut
            rhs = [drive_var(v) for v in sorted(cut)]
            lazy = not (d <= regular_max_hop or len(cut) <= regular_max_rhs)
            for cell in sorted(comp):
                cons = _cut_constraint(anchors, cell, region, rhs, "hop-reverse", lazy=lazy)
                sig = cons.signature()
                if sig in seen:
                    continue
                seen.add(sig)
                out.append(cons)
    return out


def bidirectional_hop_inequalities(graph: DriveGraph, anchors: AnchorSets, roots: Sequence[Cell],
                                   fixed_active: frozenset[Cell],
                                   regular_max_hop: int = DEFAULT_REGULAR_MAX_HOP,
                                   regular_max_rhs: int = DEFAULT_REGULAR_MAX_RHS) -> list[LinearConstraint]:
    seen: set = set()
    out = forward_hop_inequalities(graph, anchors, roots, fixed_active,
                                   regular_max_hop, regular_max_rhs, _seen=seen)
    out += reverse_hop_inequalities(graph, anchors, roots, fixed_active,
                                    regular_max_hop, regular_max_rhs, _seen=seen)
    return out


# ---------------------------------------------------------------------------
# Dead-end prevention (one-way)

def dead_end_prevention(graph: DriveGraph, out_exempt: Iterable[Cell],
                        in_exempt: Iterable[Cell]) -> list[LinearConstraint]:
    """One-way dead-end elimination on drive and direction variables.

    A non-terminal drive cell with at most one neighbor cannot be active (it
    would need its incoming and outgoing arc on the same edge); with more
    neighbors it needs at least two active ones. Every active cell needs an
    outgoing direction arc (except cells whose entrance flow leaves elsewhere)
    and an incoming one (except exit-side cells).
    """
    out_exempt = frozenset(out_exempt)
    in_exempt = frozenset(in_exempt)
    terminals = out_exempt | in_exempt
    out: list[LinearConstraint] = []
    for node in sorted(graph.nodes):
        nbs = graph.undirected_neighbors(node)
        if node not in terminals:
            if len(nbs) <= 1:
                out.append(make_constraint([(1.0, drive_var(node))], "<=", 0.0, "dead-end"))
            else:
                terms = [(1.0, drive_var(nb)) for nb in nbs]
                terms.append((-2.0, drive_var(node)))
                out.append(make_constraint(terms, ">=", 0.0, "dead-end"))
        if node not in out_exempt:
            terms = [(1.0, dir_z_var((node, nb))) for nb in graph.out_neighbors.get(node, ())]
            terms.append((-1.0, drive_var(node)))
            out.append(make_constraint(terms, ">=", 0.0, "dead-end"))
        if node not in in_exempt:
            terms = [(1.0, dir_z_var((nb, node))) for nb in graph.in_neighbors.get(node, ())]
            terms.append((-1.0, drive_var(node)))
            out.append(make_constraint(terms, ">=", 0.0, "dead-end"))
    return out


# ---------------------------------------------------------------------------
# Feasibility-cut separation at integer incumbents

def _incumbent_values(layout) -> dict[VarRef, float]:
    values: dict[VarRef, float] = {}
    for cell in layout.drive:
        values[drive_var(cell)] = 1.0
    for cell in layout.park0:
        values[park0_var(cell)] = 1.0
    for cell in layout.park90:
        values[park90_var(cell)] = 1.0
    for arc in layout.directions:
        values[dir_z_var(arc)] = 1.0
    return values


def _check_violated(constraints: list[LinearConstraint], layout) -> None:
    values = _incumbent_values(layout)
    for cons in constraints:
        if cons.satisfied_by(values):
            raise SeparationError(f"emitted cut is not violated by its incumbent: {cons}")
        AUDIT.violations_confirmed += 1
    AUDIT.cuts_emitted += len(constraints)


def separate_two_way(layout, graph: DriveGraph, anchors: AnchorSets,
                     roots: Sequence[Cell]) -> list[LinearConstraint]:
    """Reject two-way incumbents whose active drives do not all reach a root.

    For every active component without a root, the root component and the other
    active components are contracted to a super-source, the offending component
    to a super-sink, and a minimum vertex cut between them yields one
    strengthened connectivity cut per component cell.
    """
    active = layout.drive
    root_set = set(roots)
    comps = connected_components(active, graph.undirected_neighbors)
    bad = [c for c in comps if not (c & root_set)]
    if not bad:
        return []
    cuts: list[LinearConstraint] = []
    for comp in bad:
        source = (active - comp) | root_set
        sep = min_vertex_cut(graph, source, comp)
        region = sep.far_side | sep.cut_nodes
        rhs = [drive_var(v) for v in sorted(sep.cut_nodes)]
        for cell in sorted(comp):
            cuts.append(_cut_constraint(anchors, cell, region, rhs, "feasibility-cut"))
    _check_violated(cuts, layout)
    return cuts


def _reach(arcs: Iterable[Arc], starts: Iterable[Cell], forward: bool) -> set[Cell]:
    adj: dict[Cell, list[Cell]] = {}
    for tail, headc in arcs:
        if forward:
            adj.setdefault(tail, []).append(headc)
        else:
            adj.setdefault(headc, []).append(tail)
    seen = set(starts)
    queue = sorted(seen)
    for node in queue:
        for nb in sorted(adj.get(node, ())):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return seen


def separate_one_way(layout, graph: DriveGraph, anchors: AnchorSets,
                     entrance_roots: Sequence[Cell], exit_roots: Sequence[Cell],
                     big_m: int, per_component: bool = False) -> list[LinearConstraint]:
    """Reject one-way incumbents with drives that cannot reach the entrance or be
    reached from the exit along active direction arcs.

    Stranded cells are cut off with a minimum-weight edge cut between the
    stranded side and the reachable side; the crossing arcs (all carrying
    inactive direction variables) bound each stranded drive variable, with the
    usual parking-variable strengthening over the stranded side.
    """
    active = layout.drive
    z = layout.directions
    cuts: list[LinearConstraint] = []

    reach_entrance = _reach(z, set(entrance_roots), forward=False)
    stranded = frozenset(active - reach_entrance)
    if stranded:
        groups = (connected_components(stranded, graph.undirected_neighbors)
                  if per_component else [stranded])
        for group in groups:
            sink_seed = (active - group) | set(entrance_roots)
            cut = min_weighted_edge_cut(graph, z, group, sink_seed, big_m)
            region = cut.source_side
            rhs = [dir_z_var(a) for a in sorted(cut.cut_arcs)]
            for cell in sorted(group):
                cuts.append(_cut_constraint(anchors, cell, region, rhs, "feasibility-cut"))

    reach_exit = _reach(z, set(exit_roots), forward=True)
    stranded = frozenset(active - reach_exit)
    if stranded:
        groups = (connected_components(stranded, graph.undirected_neighbors)
                  if per_component else [stranded])
        for group in groups:
            source_seed = (active - group) | set(exit_roots)
            cut = min_weighted_edge_cut(graph, z, source_seed, group, big_m)
            region = cut.sink_side
            rhs = [dir_z_var(a) for a in sorted(cut.cut_arcs)]
            for cell in sorted(group):
                cuts.append(_cut_constraint(anchors, cell, region, rhs, "feasibility-cut"))

    if cuts:
        _check_violated(cuts, layout)
    return cuts


# ---------------------------------------------------------------------------
# Flow-realizability of a one-way direction digraph

def lower_bounded_flow_feasible(nodes: Sequence[Cell], arcs: Sequence[tuple[Cell, Cell, int, int]],
                                supply: Mapping[Cell, int]) -> tuple[bool, set[Cell]]:
    """Feasibility of a flow with per-arc lower bounds and node imbalances.

    ``arcs`` holds (tail, head, lower, capacity); ``supply`` maps each node to its
    required net outflow. Returns (feasible, residual-source-side nodes); the
    second component certifies the violated node set when infeasible.
    """
    index = {n: 2 + i for i, n in enumerate(nodes)}
    net = Dinic(2 + len(nodes))
    imbalance = {n: int(supply.get(n, 0)) for n in nodes}
    for tail, headc, lower, cap in arcs:
        if lower:
            imbalance[tail] -= lower
            imbalance[headc] += lower
        if cap - lower > 0:
            net.add_edge(index[tail], index[headc], cap - lower)
    need = 0
    for n in nodes:
        b = imbalance[n]
        # net outflow b > 0 means the node still has b units to inject
        if b > 0:
            net.add_edge(0, index[n], b)
            need += b
        elif b < 0:
            net.add_edge(index[n], 1, -b)
    flow = net.max_flow(0, 1)
    feasible = flow >= need
    reach = net.residual_reachable(0)
    return feasible, {n for n in nodes if index[n] in reach}


def direction_digraph_realizable(layout, graph: DriveGraph,
                                 entrance_roots: Sequence[Cell], exit_roots: Sequence[Cell],
                                 dummy_entrance_arcs: bool = False) -> tuple[bool, bool]:
    """Whether the incumbent's direction arcs can carry both commodity flows.

    Returns (entrance_flow_ok, exit_flow_ok): the entrance commodity ships one
    unit from every active drive cell to the entrance side with at least one
    unit on every active arc; the exit commodity is the mirror image.
    """
    ok_f, _ = _commodity_check(layout, entrance_roots, reverse=False,
                               dummy=dummy_entrance_arcs)
    ok_g, _ = _commodity_check(layout, exit_roots, reverse=True,
                               dummy=dummy_entrance_arcs)
    return ok_f, ok_g


def _commodity_check(layout, roots: Sequence[Cell], reverse: bool,
                     dummy: bool) -> tuple[bool, set[Cell]]:
    """Entrance-commodity feasibility on the active direction digraph.

    Every active cell must ship one unit to the flow root along the active arcs,
    with at least one unit on each arc (the model couples z <= f). With
    ``reverse`` the arcs are flipped and the roots are the exit cells, which
    checks the exit commodity. With ``dummy`` the units drain through a virtual
    super-sink fed by every root (the disjoint multi-entrance variant).
    """
    active = sorted(layout.drive)
    n = len(active)
    if n == 0:
        return True, set()
    oriented: list[Arc] = []
    for tail, headc in sorted(layout.directions):
        if reverse:
            tail, headc = headc, tail
        oriented.append((tail, headc))
    # Large enough that no arc can saturate: single-arc flow <= total supply.
    cap = n + len(oriented) + 5
    roots = [r for r in roots if r in layout.drive]
    if not roots:
        return False, set()
    if dummy:
        sink = Cell(-9, -9)
        nodes = active + [sink]
        arcs = [(t, h, 1, cap) for t, h in oriented]
        arcs.extend((r, sink, 0, cap) for r in roots)
        supply: dict[Cell, int] = {cell: 1 for cell in active}
        supply[sink] = -n
    else:
        root = roots[0]
        if any(t == root for t, _ in oriented):
            # The flow root cannot emit flow, so no active arc may leave it.
            return False, set()
        nodes = list(active)
        arcs = [(t, h, 1, cap) for t, h in oriented]
        supply = {cell: 1 for cell in active}
        supply[root] = -(n - 1)
    feasible, reach = lower_bounded_flow_feasible(nodes, arcs, supply)
    return feasible, {c for c in reach if c.row >= 0}


def separate_flow_deficit(layout, graph: DriveGraph, entrance_roots: Sequence[Cell],
                          exit_roots: Sequence[Cell], big_m: int,
                          dummy_entrance_arcs: bool = False) -> list[LinearConstraint]:
    """Cuts for incumbents whose direction digraph passes reachability but cannot
    carry the commodity flows.

    Summing the entrance-flow conservation over a node set S that excludes the
    flow root, and applying the direction-variable bounds, gives the valid
    inequality sum(z out of S) <= sum(y in S) + M * sum(z into S). The residual
    side of the failed feasibility network certifies a violated S; the exit
    commodity gives the mirror family.
    """
    cuts: list[LinearConstraint] = []
    for reverse, roots in ((False, entrance_roots), (True, exit_roots)):
        ok, reach = _commodity_check(layout, roots, reverse=reverse, dummy=dummy_entrance_arcs)
        if ok:
            continue
        violated = frozenset(layout.drive) - frozenset(reach)
        if not violated or (not dummy_entrance_arcs and roots and roots[0] in violated):
            raise SeparationError("flow deficit detected but no valid violated node set found")
        terms: list[tuple[float, VarRef]] = []
        for tail, headc in sorted(graph.arcs):
            crosses_out = tail in violated and headc not in violated
            crosses_in = headc in violated and tail not in violated
            if reverse:
                crosses_out, crosses_in = crosses_in, crosses_out
            if crosses_out:
                terms.append((1.0, dir_z_var((tail, headc))))
            elif crosses_in:
                terms.append((-float(big_m), dir_z_var((tail, headc))))
        for cell in sorted(violated):
            terms.append((-1.0, drive_var(cell)))
        cuts.append(make_constraint(terms, "<=", 0.0, "flow-deficit"))
    if cuts:
        _check_violated(cuts, layout)
    return cuts
