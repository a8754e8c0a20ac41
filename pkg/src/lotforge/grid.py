"""Rasterized parking-lot grids and the index sets the optimization models consume.

A lot is a mu x nu grid of square cells. Rectangular parking fields (omega x ell
cells, in two orientations) and square driving fields (delta x delta cells) are
placed by their top-left anchor cell. This module computes, for a given grid and
field geometry, the sets of valid anchors, the inverse coverage maps, the
access-neighbor maps, and the grid graph over valid driving anchors.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, NamedTuple


class Cell(NamedTuple):
    row: int
    col: int


Arc = tuple[Cell, Cell]

EARTH_RADIUS_M = 6_371_000.0


class Mode(Enum):
    TWO_WAY = "two-way"
    ONE_WAY = "one-way"


class GridError(ValueError):
    """Invalid grid construction input."""


class EntranceInvalid(GridError):
    """An entrance, exit, or existing-drive anchor is not a valid driving anchor."""


class SourceNotInGraph(KeyError):
    """BFS source is not a node of the drive graph."""


class DegeneratePolygon(ValueError):
    """Polygon has (near) zero area."""


class CellSizeNonPositive(ValueError):
    """Rasterization cell size must be positive."""


def _as_cells(cells: Iterable[Iterable[int]]) -> frozenset[Cell]:
    return frozenset(Cell(int(r), int(c)) for r, c in cells)


@dataclass(frozen=True)
class GridSpec:
    """A rasterized lot: dimensions, blocked cells, fixed driveways, and access points.

    ``entrances`` may be empty on a freshly rasterized grid; it must be populated
    before anchor sets are computed. In one-way mode at least one exit is required
    and no cell may serve as both an entrance and an exit.
    """

    mu: int
    nu: int
    blocked: frozenset[Cell] = frozenset()
    existing_drive: frozenset[Cell] = frozenset()
    entrances: tuple[Cell, ...] = ()
    exits: tuple[Cell, ...] = ()
    mode: Mode = Mode.TWO_WAY

    def __post_init__(self):
        if self.mu <= 0 or self.nu <= 0:
            raise GridError(f"grid dimensions must be positive, got {self.mu}x{self.nu}")
        object.__setattr__(self, "blocked", _as_cells(self.blocked))
        object.__setattr__(self, "existing_drive", _as_cells(self.existing_drive))
        object.__setattr__(self, "entrances", tuple(Cell(*c) for c in self.entrances))
        object.__setattr__(self, "exits", tuple(Cell(*c) for c in self.exits))
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("blocked", "existing_drive", "entrances", "exits"):
            for cell in getattr(self, name):
                if not self.in_range(cell):
                    raise GridError(f"{name} cell {tuple(cell)} outside {self.mu}x{self.nu} grid")
        for name in ("existing_drive", "entrances", "exits"):
            overlap = set(getattr(self, name)) & self.blocked
            if overlap:
                raise GridError(f"{name} cells {sorted(overlap)} are blocked")
        if set(self.entrances) & set(self.exits):
            raise GridError("entrances and exits must be distinct cells")
        if self.mode is Mode.ONE_WAY and self.entrances and not self.exits:
            raise GridError("one-way mode requires at least one exit")
        if self.mode is Mode.TWO_WAY and self.exits:
            raise GridError("two-way mode takes no exits (the entrance serves both)")

    def in_range(self, cell: Cell) -> bool:
        return 0 <= cell.row < self.mu and 0 <= cell.col < self.nu

    def cells(self) -> Iterable[Cell]:
        for i in range(self.mu):
            for j in range(self.nu):
                yield Cell(i, j)

    def with_access(self, entrances: Iterable[Iterable[int]],
                    exits: Iterable[Iterable[int]] = (), mode: Mode | str | None = None) -> "GridSpec":
        """Return a copy with entrances/exits (and optionally mode) replaced."""
        new_mode = self.mode if mode is None else Mode(mode)
        return replace(self, entrances=tuple(Cell(*c) for c in entrances),
                       exits=tuple(Cell(*c) for c in exits), mode=new_mode)


@dataclass(frozen=True)
class FieldParams:
    """Field geometry in cells: parking omega x ell, driving delta x delta."""

    omega: int
    ell: int
    delta: int

    def __post_init__(self):
        if self.omega < 1 or self.ell < 1 or self.delta < 1:
            raise GridError("field dimensions must be at least one cell")
        if self.ell < self.omega:
            raise GridError("parking length ell must be >= width omega")
        if self.delta < self.omega:
            raise GridError("driving width delta must be >= parking width omega")

    def validate_for(self, mode: Mode) -> None:
        if mode is Mode.TWO_WAY and self.delta < 2 * self.omega:
            raise GridError("two-way mode requires delta >= 2*omega")


def park0_footprint(anchor: Cell, params: FieldParams) -> list[Cell]:
    """Cells of the east-west parking field anchored at ``anchor``."""
    i, j = anchor
    return [Cell(i + k, j + l) for k in range(params.omega) for l in range(params.ell)]


def park90_footprint(anchor: Cell, params: FieldParams) -> list[Cell]:
    """Cells of the north-south parking field anchored at ``anchor``."""
    i, j = anchor
    return [Cell(i + k, j + l) for k in range(params.ell) for l in range(params.omega)]


def drive_footprint(anchor: Cell, params: FieldParams) -> list[Cell]:
    """Cells of the square driving field anchored at ``anchor``."""
    i, j = anchor
    return [Cell(i + k, j + l) for k in range(params.delta) for l in range(params.delta)]


@dataclass(frozen=True)
class AnchorSets:
    """Valid anchors, inverse coverage maps, and access-neighbor maps."""

    park0: frozenset[Cell]
    park90: frozenset[Cell]
    drive: frozenset[Cell]
    park0_covering: Mapping[Cell, frozenset[Cell]]
    park90_covering: Mapping[Cell, frozenset[Cell]]
    drive_covering: Mapping[Cell, frozenset[Cell]]
    park0_access: Mapping[Cell, frozenset[Cell]]
    park90_access: Mapping[Cell, frozenset[Cell]]


def _valid_anchors(grid: GridSpec, height: int, width: int) -> set[Cell]:
    blocked = grid.blocked
    anchors = set()
    for i in range(grid.mu - height + 1):
        for j in range(grid.nu - width + 1):
            if all(Cell(i + k, j + l) not in blocked
                   for k in range(height) for l in range(width)):
                anchors.add(Cell(i, j))
    return anchors


def compute_anchor_sets(grid: GridSpec, params: FieldParams) -> AnchorSets:
    """Compute every anchor whose full footprint is in range and free of blocked cells.

    Also builds the duals (which anchors cover a given cell) and, for each parking
    anchor, the driving anchors whose field lies flush against one of the parking
    field's shorter edges and spans it entirely.

    Raises EntranceInvalid if an entrance, exit, or existing-drive cell is not a
    valid driving anchor.
    """
    params.validate_for(grid.mode)
    if not grid.entrances:
        raise EntranceInvalid("grid has no entrance")
    omega, ell, delta = params.omega, params.ell, params.delta

    park0 = _valid_anchors(grid, omega, ell)
    park90 = _valid_anchors(grid, ell, omega)
    drive = _valid_anchors(grid, delta, delta)

    for name, cells in (("entrance", grid.entrances), ("exit", grid.exits),
                        ("existing drive", grid.existing_drive)):
        for cell in cells:
            if cell not in drive:
                raise EntranceInvalid(f"{name} anchor {tuple(cell)} is not a valid driving anchor")

    park0_covering: dict[Cell, set[Cell]] = {}
    park90_covering: dict[Cell, set[Cell]] = {}
    drive_covering: dict[Cell, set[Cell]] = {}
    for anchor in park0:
        for cell in park0_footprint(anchor, params):
            park0_covering.setdefault(cell, set()).add(anchor)
    for anchor in park90:
        for cell in park90_footprint(anchor, params):
            park90_covering.setdefault(cell, set()).add(anchor)
    for anchor in drive:
        for cell in drive_footprint(anchor, params):
            drive_covering.setdefault(cell, set()).add(anchor)

    # A drive field grants access to a parking field when it sits flush against
    # one of the two shorter (width omega) edges and overlaps that edge entirely.
    park0_access: dict[Cell, frozenset[Cell]] = {}
    for anchor in park0:
        i, j = anchor
        rows = range(i + omega - delta, i + 1)
        candidates = [Cell(k, j - delta) for k in rows] + [Cell(k, j + ell) for k in rows]
        park0_access[anchor] = frozenset(c for c in candidates if c in drive)
    park90_access: dict[Cell, frozenset[Cell]] = {}
    for anchor in park90:
        i, j = anchor
        cols = range(j + omega - delta, j + 1)
        candidates = [Cell(i - delta, l) for l in cols] + [Cell(i + ell, l) for l in cols]
        park90_access[anchor] = frozenset(c for c in candidates if c in drive)

    return AnchorSets(
        park0=frozenset(park0),
        park90=frozenset(park90),
        drive=frozenset(drive),
        park0_covering={c: frozenset(s) for c, s in park0_covering.items()},
        park90_covering={c: frozenset(s) for c, s in park90_covering.items()},
        drive_covering={c: frozenset(s) for c, s in drive_covering.items()},
        park0_access=park0_access,
        park90_access=park90_access,
    )


@dataclass(frozen=True)
class DriveGraph:
    """Directed grid graph over valid driving anchors (both arc directions present).

    In one-way mode, arcs directly joining an entrance anchor and an exit anchor
    are removed: an optimal solution never needs the direct connection.
    """

    nodes: frozenset[Cell]
    arcs: frozenset[Arc]
    out_neighbors: Mapping[Cell, tuple[Cell, ...]]
    in_neighbors: Mapping[Cell, tuple[Cell, ...]]

    def undirected_neighbors(self, cell: Cell) -> tuple[Cell, ...]:
        merged = set(self.out_neighbors.get(cell, ())) | set(self.in_neighbors.get(cell, ()))
        return tuple(sorted(merged))


def build_drive_graph(anchors: AnchorSets, grid: GridSpec) -> DriveGraph:
    """4-neighborhood graph on drive anchors, with one-way entrance-exit arcs removed."""
    nodes = anchors.drive
    removed: set[frozenset[Cell]] = set()
    if grid.mode is Mode.ONE_WAY:
        removed = {frozenset((e, x)) for e in grid.entrances for x in grid.exits}
    arcs: set[Arc] = set()
    out_neighbors: dict[Cell, list[Cell]] = {n: [] for n in nodes}
    in_neighbors: dict[Cell, list[Cell]] = {n: [] for n in nodes}
    for node in sorted(nodes):
        i, j = node
        for other in (Cell(i - 1, j), Cell(i + 1, j), Cell(i, j - 1), Cell(i, j + 1)):
            if other not in nodes or frozenset((node, other)) in removed:
                continue
            arcs.add((node, other))
            out_neighbors[node].append(other)
            in_neighbors[other].append(node)
    return DriveGraph(
        nodes=nodes,
        arcs=frozenset(arcs),
        out_neighbors={n: tuple(sorted(v)) for n, v in out_neighbors.items()},
        in_neighbors={n: tuple(sorted(v)) for n, v in in_neighbors.items()},
    )


def hop_rings(graph: DriveGraph, source: Cell) -> dict[int, frozenset[Cell]]:
    """Nodes grouped by exact undirected hop distance from ``source`` (BFS layers)."""
    if source not in graph.nodes:
        raise SourceNotInGraph(f"source {tuple(source)} not in drive graph")
    return multi_source_rings(graph, [source])


def multi_source_rings(graph: DriveGraph, sources: Iterable[Cell]) -> dict[int, frozenset[Cell]]:
    """BFS layers from a set of sources; layer 0 is the source set itself."""
    frontier = sorted(set(sources))
    for s in frontier:
        if s not in graph.nodes:
            raise SourceNotInGraph(f"source {tuple(s)} not in drive graph")
    seen: set[Cell] = set(frontier)
    rings: dict[int, frozenset[Cell]] = {0: frozenset(frontier)}
    depth = 0
    while frontier:
        depth += 1
        nxt: list[Cell] = []
        for node in frontier:
            for nb in graph.undirected_neighbors(node):
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        if nxt:
            rings[depth] = frozenset(nxt)
        frontier = sorted(set(nxt))
    return rings


def hop_distances(graph: DriveGraph, sources: Iterable[Cell]) -> dict[Cell, int]:
    """Undirected hop distance from the nearest source; unreachable nodes absent."""
    dist: dict[Cell, int] = {}
    for depth, ring in multi_source_rings(graph, sources).items():
        for node in ring:
            dist[node] = depth
    return dist


def connected_components(cells: Iterable[Cell], neighbors) -> list[frozenset[Cell]]:
    """Connected components of ``cells`` under a neighbor function, deterministic order."""
    cells = set(cells)
    components: list[frozenset[Cell]] = []
    seen: set[Cell] = set()
    for start in sorted(cells):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nb in neighbors(node):
                if nb in cells and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        seen |= comp
        components.append(frozenset(comp))
    return components


# ---------------------------------------------------------------------------
# Polygon rasterization

def project_lonlat(vertices: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Equirectangular projection to meters about the vertex centroid.

    Adequate at lot scale (well under a kilometer); x grows east, y grows north.
    """
    pts = [(float(lon), float(lat)) for lon, lat in vertices]
    lon0 = sum(p[0] for p in pts) / len(pts)
    lat0 = sum(p[1] for p in pts) / len(pts)
    coslat = math.cos(math.radians(lat0))
    return [(EARTH_RADIUS_M * math.radians(lon - lon0) * coslat,
             EARTH_RADIUS_M * math.radians(lat - lat0)) for lon, lat in pts]


def rasterize_polygon(vertices: Iterable[tuple[float, float]], cell_size_m: float, *,
                      rotation_deg: float = 0.0, min_overlap_fraction: float = 0.0,
                      mode: Mode | str = Mode.TWO_WAY, planar: bool = False) -> GridSpec:
    """Rasterize a simple lon/lat polygon onto an axis-aligned grid of square cells.

    A cell is part of the lot (unblocked) when its square overlaps the polygon
    interior with positive area; ``min_overlap_fraction`` > 0 switches to a
    threshold on the overlapped area fraction. Row 0 is the northernmost row and
    the grid origin sits at the bounding-box corner. ``rotation_deg`` rotates the
    polygon clockwise about its centroid before gridding (an explicit placement
    input, not an optimized one). Entrances and exits are not inferred; use
    ``GridSpec.with_access`` on the result.
    """
    from shapely.geometry import Polygon, box

    if cell_size_m <= 0:
        raise CellSizeNonPositive(f"cell size must be positive, got {cell_size_m}")
    pts = [(float(x), float(y)) for x, y in vertices]
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(pts) < 3:
        raise DegeneratePolygon("polygon needs at least three distinct vertices")
    xy = pts if planar else project_lonlat(pts)
    poly = Polygon(xy)
    if rotation_deg:
        import shapely.affinity
        poly = shapely.affinity.rotate(poly, -rotation_deg, origin="centroid")
    if not poly.is_valid or poly.area <= 0:
        raise DegeneratePolygon("polygon is degenerate or self-intersecting")

    minx, miny, maxx, maxy = poly.bounds
    s = float(cell_size_m)
    ncols = max(1, math.ceil((maxx - minx) / s - 1e-9))
    nrows = max(1, math.ceil((maxy - miny) / s - 1e-9))
    area_floor = max(min_overlap_fraction * s * s, 1e-9 * s * s)
    blocked = set()
    for r in range(nrows):
        for c in range(ncols):
            cell_box = box(minx + c * s, maxy - (r + 1) * s, minx + (c + 1) * s, maxy - r * s)
            if poly.intersection(cell_box).area < area_floor:
                blocked.add(Cell(r, c))
    return GridSpec(mu=nrows, nu=ncols, blocked=frozenset(blocked), mode=Mode(mode))


# ---------------------------------------------------------------------------
# Instance JSON

def instance_to_dict(grid: GridSpec, params: FieldParams) -> dict:
    """Canonical instance dictionary (cell lists sorted row-major)."""
    return {
        "rows": grid.mu,
        "cols": grid.nu,
        "blocked": [list(c) for c in sorted(grid.blocked)],
        "existing_drive": [list(c) for c in sorted(grid.existing_drive)],
        "entrances": [list(c) for c in grid.entrances],
        "exits": [list(c) for c in grid.exits],
        "omega": params.omega,
        "ell": params.ell,
        "delta": params.delta,
        "mode": grid.mode.value,
    }


def instance_from_dict(data: Mapping) -> tuple[GridSpec, FieldParams]:
    try:
        grid = GridSpec(
            mu=int(data["rows"]),
            nu=int(data["cols"]),
            blocked=_as_cells(data.get("blocked", ())),
            existing_drive=_as_cells(data.get("existing_drive", ())),
            entrances=tuple(Cell(int(r), int(c)) for r, c in data["entrances"]),
            exits=tuple(Cell(int(r), int(c)) for r, c in data.get("exits", ())),
            mode=Mode(data.get("mode", "two-way")),
        )
        params = FieldParams(omega=int(data["omega"]), ell=int(data["ell"]), delta=int(data["delta"]))
    except GridError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise GridError(f"malformed instance: {exc}") from exc
    return grid, params


def dump_instance(grid: GridSpec, params: FieldParams) -> str:
    return json.dumps(instance_to_dict(grid, params), indent=2, sort_keys=True) + "\n"


def load_instance(text: str) -> tuple[GridSpec, FieldParams]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridError(f"instance is not valid JSON: {exc}") from exc
    return instance_from_dict(data)
