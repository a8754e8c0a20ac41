"""Synthetic instance generation for tests and benchmarks.

Uniform random blocked cells at a given rate, entrance placed on the boundary
(one-way lots get an adjacent exit). The standard geometry is the working
resolution: unit-width stalls two cells long, with two-cell driveways for
two-way lots and one-cell driveways for one-way lots.
"""
from __future__ import annotations

import random
from typing import Iterable

from .grid import (Cell, FieldParams, GridSpec, Mode, build_drive_graph,
                   compute_anchor_sets, connected_components)


def _access_connected(grid: GridSpec, anchors, params: FieldParams) -> bool:
    """All entrances and exits must share one drive-graph component (after the
    one-way entrance-exit arc removal), so the instance is not trivially infeasible."""
    graph = build_drive_graph(anchors, grid)
    access = list(grid.entrances) + list(grid.exits)
    for comp in connected_components(graph.nodes, graph.undirected_neighbors):
        if access[0] in comp:
            return all(cell in comp for cell in access)
    return False


def default_params(mode: Mode | str) -> FieldParams:
    mode = Mode(mode)
    return FieldParams(omega=1, ell=2, delta=2 if mode is Mode.TWO_WAY else 1)


def _boundary_anchors(grid: GridSpec, delta: int) -> list[Cell]:
    rows, cols = grid.mu, grid.nu
    out = []
    for i in range(rows - delta + 1):
        for j in range(cols - delta + 1):
            if i in (0, rows - delta) or j in (0, cols - delta):
                out.append(Cell(i, j))
    return out


def generate_instance(rows: int, cols: int, blocked_rate: float = 0.2,
                      mode: Mode | str = Mode.TWO_WAY, seed: int = 0,
                      entrances: int = 1, params: FieldParams | None = None,
                      max_attempts: int = 200) -> tuple[GridSpec, FieldParams]:
    """Random instance with a boundary entrance; deterministic for a given seed.

    Resamples the blocked pattern until the requested access cells are valid
    driving anchors (one-way exits sit next to their entrance when possible).
    """
    mode = Mode(mode)
    if params is None:
        params = default_params(mode)
    rng = random.Random(seed)
    for _ in range(max_attempts):
        blocked = frozenset(Cell(r, c) for r in range(rows) for c in range(cols)
                            if rng.random() < blocked_rate)
        base = GridSpec(mu=rows, nu=cols, blocked=blocked, mode=Mode.TWO_WAY)
        candidates = []
        for anchor in _boundary_anchors(base, params.delta):
            footprint_ok = all(
                Cell(anchor.row + k, anchor.col + l) not in blocked
                for k in range(params.delta) for l in range(params.delta))
            if footprint_ok:
                candidates.append(anchor)
        if len(candidates) < entrances + (1 if mode is Mode.ONE_WAY else 0):
            continue
        rng.shuffle(candidates)
        chosen_entrances = candidates[:entrances]
        exits: list[Cell] = []
        if mode is Mode.ONE_WAY:
            remaining = [c for c in candidates[entrances:]]
            for e in chosen_entrances:
                adjacent = [c for c in remaining
                            if abs(c.row - e.row) + abs(c.col - e.col) == 1 and c not in exits]
                pool = adjacent or [c for c in remaining if c not in exits]
                if not pool:
                    break
                exits.append(pool[0])
            if len(exits) != len(chosen_entrances):
                continue
        try:
            grid = base.with_access(chosen_entrances, exits, mode=mode)
            anchors = compute_anchor_sets(grid, params)
        except Exception:
            continue
        if not _access_connected(grid, anchors, params):
            continue
        return grid, params
    raise RuntimeError(f"could not generate a valid {rows}x{cols} instance "
                       f"at blocked rate {blocked_rate} (seed {seed})")
