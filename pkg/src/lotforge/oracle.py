"""Brute-force ground truth for small instances.

Enumerates every admissible set of active driving anchors, checks driveway
feasibility combinatorially (connectivity to the entrance for two-way lots; the
existence of a direction assignment carrying both commodity flows for one-way
lots), and packs parking fields exactly by branch and bound. Shares nothing
with the MIP path except the cell geometry, so it serves as an independent
check of every formulation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .grid import (AnchorSets, Arc, Cell, DriveGraph, FieldParams, GridSpec, Mode,
                   build_drive_graph, compute_anchor_sets, drive_footprint,
                   park0_footprint, park90_footprint)
from .model import Layout
from .separation import lower_bounded_flow_feasible

MAX_TWO_WAY_DRIVES = 20
MAX_TWO_WAY_PARKS = 26
MAX_ONE_WAY_DRIVES = 14


class InstanceTooLarge(ValueError):
    """Instance exceeds the brute-force guards."""


class UnsupportedInstance(ValueError):
    """The oracle handles single-entrance (and single-exit) instances only."""


@dataclass
class OracleResult:
    optimum: int | None
    witness: Layout | None
    explored: int


@dataclass
class _Candidate:
    var_kind: str
    anchor: Cell
    foot_mask: int
    access_mask: int
    conflicts: int = 0


def _prepare(grid: GridSpec, params: FieldParams):
    anchors = compute_anchor_sets(grid, params)
    graph = build_drive_graph(anchors, grid)
    if len(grid.entrances) != 1 or (grid.mode is Mode.ONE_WAY and len(grid.exits) != 1):
        raise UnsupportedInstance("oracle supports exactly one entrance (and one exit)")
    drives = sorted(anchors.drive)
    dindex = {d: i for i, d in enumerate(drives)}
    cindex = {c: i for i, c in enumerate(sorted(grid.cells()))}
    foot_masks = []
    for d in drives:
        mask = 0
        for cell in drive_footprint(d, params):
            mask |= 1 << cindex[cell]
        foot_masks.append(mask)
    neighbor_masks = [0] * len(drives)
    for d in drives:
        for nb in graph.undirected_neighbors(d):
            neighbor_masks[dindex[d]] |= 1 << dindex[nb]

    candidates: list[_Candidate] = []
    for anchor in sorted(anchors.park0):
        access = anchors.park0_access[anchor]
        if not access:
            continue
        foot = 0
        for cell in park0_footprint(anchor, params):
            foot |= 1 << cindex[cell]
        amask = 0
        for d in access:
            amask |= 1 << dindex[d]
        candidates.append(_Candidate("park0", anchor, foot, amask))
    for anchor in sorted(anchors.park90):
        access = anchors.park90_access[anchor]
        if not access:
            continue
        foot = 0
        for cell in park90_footprint(anchor, params):
            foot |= 1 << cindex[cell]
        amask = 0
        for d in access:
            amask |= 1 << dindex[d]
        candidates.append(_Candidate("park90", anchor, foot, amask))
    for i, a in enumerate(candidates):
        for j in range(i + 1, len(candidates)):
            if a.foot_mask & candidates[j].foot_mask:
                a.conflicts |= 1 << j
                candidates[j].conflicts |= 1 << i
    unblocked = sum(1 for c in grid.cells() if c not in grid.blocked)
    return anchors, graph, drives, dindex, foot_masks, neighbor_masks, candidates, unblocked


def _connected(mask: int, root_bit: int, neighbor_masks: list[int]) -> bool:
    if not mask & root_bit:
        return False
    seen = root_bit
    frontier = root_bit
    while frontier:
        grow = 0
        m = frontier
        while m:
            low = m & -m
            grow |= neighbor_masks[low.bit_length() - 1]
            m ^= low
        frontier = grow & mask & ~seen
        seen |= frontier
    return seen == mask


def _max_packing(avail: int, candidates: list[_Candidate], stop_at: int) -> tuple[int, int]:
    """Exact maximum set of pairwise-compatible parking fields from ``avail``.

    Branch and bound on the lowest-index candidate with the remaining-count
    upper bound; returns (size, chosen_mask). ``stop_at`` is a proven cap that
    allows early exit."""
    best_size = 0
    best_mask = 0
    stack = [(avail, 0, 0)]
    while stack:
        pool, size, chosen = stack.pop()
        if size + pool.bit_count() <= best_size:
            continue
        if not pool:
            if size > best_size:
                best_size, best_mask = size, chosen
                if best_size >= stop_at:
                    return best_size, best_mask
            continue
        low = pool & -pool
        idx = low.bit_length() - 1
        # exclude branch first so the include branch is explored first off the stack
        stack.append((pool ^ low, size, chosen))
        stack.append((pool & ~low & ~candidates[idx].conflicts, size + 1, chosen | low))
    return best_size, best_mask


def _pack_upper_bound(drive_cells: int, unblocked: int, cand_count: int,
                      params: FieldParams) -> int:
    free = unblocked - drive_cells.bit_count()
    return min(cand_count, free // (params.omega * params.ell))


def _layout_from(drives_mask: int, drives: list[Cell], chosen: int,
                 candidates: list[_Candidate], directions=frozenset()) -> Layout:
    park0, park90 = set(), set()
    m = chosen
    while m:
        low = m & -m
        cand = candidates[low.bit_length() - 1]
        (park0 if cand.var_kind == "park0" else park90).add(cand.anchor)
        m ^= low
    active = {drives[i] for i in range(len(drives)) if drives_mask >> i & 1}
    return Layout(park0=frozenset(park0), park90=frozenset(park90),
                  drive=frozenset(active), directions=frozenset(directions))


def brute_force_two_way(grid: GridSpec, params: FieldParams) -> OracleResult:
    """Optimal two-way stall count by exhaustive enumeration of connected
    driveway sets and exact parking packings."""
    if grid.mode is not Mode.TWO_WAY:
        raise UnsupportedInstance("two-way oracle called on a one-way instance")
    (anchors, graph, drives, dindex, foot_masks, neighbor_masks,
     candidates, unblocked) = _prepare(grid, params)
    if len(drives) > MAX_TWO_WAY_DRIVES:
        raise InstanceTooLarge(f"|D| = {len(drives)} exceeds {MAX_TWO_WAY_DRIVES}")
    if len(candidates) > MAX_TWO_WAY_PARKS:
        raise InstanceTooLarge(f"{len(candidates)} parking anchors exceed {MAX_TWO_WAY_PARKS}")

    required = 0
    for cell in set(grid.entrances) | grid.existing_drive:
        required |= 1 << dindex[cell]
    root_bit = 1 << dindex[grid.entrances[0]]
    free_bits = [i for i in range(len(drives)) if not required >> i & 1]

    best = -1
    best_layout: Layout | None = None
    explored = 0
    for combo in range(1 << len(free_bits)):
        mask = required
        m = combo
        while m:
            low = m & -m
            mask |= 1 << free_bits[low.bit_length() - 1]
            m ^= low
        explored += 1
        if not _connected(mask, root_bit, neighbor_masks):
            continue
        drive_cells = 0
        mm = mask
        while mm:
            low = mm & -mm
            drive_cells |= foot_masks[low.bit_length() - 1]
            mm ^= low
        avail = 0
        for i, cand in enumerate(candidates):
            if not cand.foot_mask & drive_cells and cand.access_mask & mask:
                avail |= 1 << i
        if _pack_upper_bound(drive_cells, unblocked, avail.bit_count(), params) <= best:
            continue
        size, chosen = _max_packing(avail, candidates, stop_at=1 << 30)
        if size > best:
            best = size
            best_layout = _layout_from(mask, drives, chosen, candidates)
    if best < 0:
        return OracleResult(optimum=None, witness=None, explored=explored)
    return OracleResult(optimum=best, witness=best_layout, explored=explored)


# ---------------------------------------------------------------------------
# One-way feasibility: search for a direction assignment

def _one_way_direction_search(active: list[Cell], graph: DriveGraph,
                              entrance: Cell, exit_cell: Cell) -> list[Arc] | None:
    """Find arc directions on the active set that both commodity flows can use.

    Backtracks over the internal undirected edges (skip / one direction / the
    other), never directing an arc out of the entrance or into the exit, with
    degree and optimistic-reachability pruning. A complete assignment is
    accepted when every cell reaches the entrance and is reached from the exit
    and both lower-bounded flow systems are feasible, which is exactly the
    feasibility notion of the flow formulation.
    """
    active_set = set(active)
    edges: list[tuple[Cell, Cell]] = []
    for u in active:
        for v in graph.undirected_neighbors(u):
            if v in active_set and u < v:
                edges.append((u, v))
    n = len(active)

    def allowed_dirs(u: Cell, v: Cell) -> list[Arc]:
        dirs = []
        for tail, headc in ((u, v), (v, u)):
            if tail == entrance or headc == exit_cell:
                continue
            if (tail, headc) in graph.arcs:
                dirs.append((tail, headc))
        return dirs

    options = [allowed_dirs(u, v) for u, v in edges]

    def optimistic_ok(chosen: list[Arc], undecided_from: int) -> bool:
        adj_fwd: dict[Cell, list[Cell]] = {c: [] for c in active}
        adj_rev: dict[Cell, list[Cell]] = {c: [] for c in active}
        for tail, headc in chosen:
            adj_fwd[tail].append(headc)
            adj_rev[headc].append(tail)
        for k in range(undecided_from, len(edges)):
            for tail, headc in options[k]:
                adj_fwd[tail].append(headc)
                adj_rev[headc].append(tail)
        # every cell must be able to reach the entrance ...
        seen = {entrance}
        queue = [entrance]
        for node in queue:
            for nb in adj_rev[node]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        if len(seen) != n:
            return False
        # ... and be reachable from the exit
        seen = {exit_cell}
        queue = [exit_cell]
        for node in queue:
            for nb in adj_fwd[node]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return len(seen) == n

    def flows_ok(chosen: list[Arc]) -> bool:
        cap = n + len(chosen) + 5
        supply = {c: 1 for c in active}
        supply[entrance] = -(n - 1)
        ok, _ = lower_bounded_flow_feasible(active, [(t, h, 1, cap) for t, h in chosen], supply)
        if not ok:
            return False
        supply = {c: 1 for c in active}
        supply[exit_cell] = -(n - 1)
        ok, _ = lower_bounded_flow_feasible(active, [(h, t, 1, cap) for t, h in chosen], supply)
        return ok

    in_deg = {c: 0 for c in active}
    out_deg = {c: 0 for c in active}
    undecided = {c: 0 for c in active}
    for u, v in edges:
        undecided[u] += 1
        undecided[v] += 1

    chosen: list[Arc] = []

    def degrees_viable(cell: Cell) -> bool:
        need_out = cell != entrance
        need_in = cell != exit_cell
        if need_out and out_deg[cell] + undecided[cell] < 1:
            return False
        if need_in and in_deg[cell] + undecided[cell] < 1:
            return False
        return True

    def search(k: int) -> bool:
        if k == len(edges):
            for cell in active:
                if cell != entrance and out_deg[cell] < 1:
                    return False
                if cell != exit_cell and in_deg[cell] < 1:
                    return False
            return optimistic_ok(chosen, len(edges)) and flows_ok(chosen)
        if not optimistic_ok(chosen, k):
            return False
        u, v = edges[k]
        undecided[u] -= 1
        undecided[v] -= 1
        for arc in options[k]:
            tail, headc = arc
            out_deg[tail] += 1
            in_deg[headc] += 1
            chosen.append(arc)
            if degrees_viable(u) and degrees_viable(v) and search(k + 1):
                return True
            chosen.pop()
            out_deg[tail] -= 1
            in_deg[headc] -= 1
        skip_ok = degrees_viable(u) and degrees_viable(v) and search(k + 1)
        if skip_ok:
            return True
        undecided[u] += 1
        undecided[v] += 1
        return False

    return list(chosen) if search(0) else None


def brute_force_one_way(grid: GridSpec, params: FieldParams) -> OracleResult:
    """Optimal one-way stall count by exhaustive enumeration of driveway sets
    plus a direction-assignment search per set."""
    if grid.mode is not Mode.ONE_WAY:
        raise UnsupportedInstance("one-way oracle called on a two-way instance")
    (anchors, graph, drives, dindex, foot_masks, neighbor_masks,
     candidates, unblocked) = _prepare(grid, params)
    if len(drives) > MAX_ONE_WAY_DRIVES:
        raise InstanceTooLarge(f"|D| = {len(drives)} exceeds {MAX_ONE_WAY_DRIVES}")

    entrance = grid.entrances[0]
    exit_cell = grid.exits[0]
    required = 0
    for cell in set(grid.entrances) | set(grid.exits) | grid.existing_drive:
        required |= 1 << dindex[cell]
    root_bit = 1 << dindex[entrance]
    free_bits = [i for i in range(len(drives)) if not required >> i & 1]

    best = -1
    best_layout: Layout | None = None
    explored = 0
    for combo in range(1 << len(free_bits)):
        mask = required
        m = combo
        while m:
            low = m & -m
            mask |= 1 << free_bits[low.bit_length() - 1]
            m ^= low
        explored += 1
        if not _connected(mask, root_bit, neighbor_masks):
            continue
        drive_cells = 0
        mm = mask
        while mm:
            low = mm & -mm
            drive_cells |= foot_masks[low.bit_length() - 1]
            mm ^= low
        avail = 0
        for i, cand in enumerate(candidates):
            if not cand.foot_mask & drive_cells and cand.access_mask & mask:
                avail |= 1 << i
        if _pack_upper_bound(drive_cells, unblocked, avail.bit_count(), params) <= best:
            continue
        active = [drives[i] for i in range(len(drives)) if mask >> i & 1]
        if not _quick_infeasible(active, graph, entrance, exit_cell):
            continue
        directions = _one_way_direction_search(active, graph, entrance, exit_cell)
        if directions is None:
            continue
        size, chosen = _max_packing(avail, candidates, stop_at=1 << 30)
        if size > best:
            best = size
            best_layout = _layout_from(mask, drives, chosen, candidates, directions)
    if best < 0:
        return OracleResult(optimum=None, witness=None, explored=explored)
    return OracleResult(optimum=best, witness=best_layout, explored=explored)


def _quick_infeasible(active: Sequence[Cell], graph: DriveGraph,
                      entrance: Cell, exit_cell: Cell) -> bool:
    """Cheap necessary conditions before the direction search.

    A non-terminal cell with one active neighbor is a dead end, and a bridge
    whose removal leaves the entrance and exit on the same side would have to
    carry traffic in both directions. Returns False when the set is certainly
    infeasible."""
    active_set = set(active)
    if len(active_set) == 1:
        return False  # cannot hold both the entrance and the exit
    adj: dict[Cell, list[Cell]] = {}
    edges: list[tuple[Cell, Cell]] = []
    for u in active:
        adj[u] = [v for v in graph.undirected_neighbors(u) if v in active_set]
        if len(adj[u]) == 0:
            return False
        if len(adj[u]) == 1 and u not in (entrance, exit_cell):
            return False
        edges.extend((u, v) for v in adj[u] if u < v)
    for u, v in edges:
        side = {v}
        queue = [v]
        for node in queue:
            for nb in adj[node]:
                if {node, nb} == {u, v} or nb in side:
                    continue
                side.add(nb)
                queue.append(nb)
        if u in side:
            continue  # not a bridge
        if (entrance in side) == (exit_cell in side):
            return False
    return True
