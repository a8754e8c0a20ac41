"""ASCII and SVG rendering of solved layouts.

ASCII legend: ``#`` blocked, ``G`` east-west parking, ``B`` north-south parking,
``D`` driving, ``E`` entrance field, ``X`` exit field, ``.`` unused. Row 0
prints first. The optional direction map shows each cell's outgoing arc as
``> < ^ v`` (``+`` for a junction with several outgoing arcs).
"""
from __future__ import annotations

from dataclasses import dataclass

from .grid import Cell, FieldParams, GridSpec, Mode, drive_footprint, park0_footprint, park90_footprint
from .model import Layout


class UnknownFormat(ValueError):
    """Unsupported render format."""


@dataclass(frozen=True)
class RenderStyle:
    format: str = "ascii"  # "ascii" | "svg"
    show_directions: bool = False
    flip_arrows: bool = False

    def validate(self, grid: GridSpec) -> None:
        if self.format not in ("ascii", "svg"):
            raise UnknownFormat(f"unknown render format {self.format!r}")
        if self.show_directions and grid.mode is not Mode.ONE_WAY:
            raise ValueError("direction rendering applies to one-way layouts only")


def _cell_chars(layout: Layout, grid: GridSpec, params: FieldParams) -> list[list[str]]:
    chars = [["." for _ in range(grid.nu)] for _ in range(grid.mu)]

    def paint(cells, glyph):
        for cell in cells:
            if grid.in_range(cell):
                chars[cell.row][cell.col] = glyph

    for anchor in sorted(layout.drive):
        paint(drive_footprint(anchor, params), "D")
    for anchor in sorted(layout.park0):
        paint(park0_footprint(anchor, params), "G")
    for anchor in sorted(layout.park90):
        paint(park90_footprint(anchor, params), "B")
    for anchor in grid.entrances:
        paint(drive_footprint(anchor, params), "E")
    for anchor in grid.exits:
        paint(drive_footprint(anchor, params), "X")
    for cell in grid.blocked:
        chars[cell.row][cell.col] = "#"
    return chars


_ARROWS = {(0, 1): ">", (0, -1): "<", (-1, 0): "^", (1, 0): "v"}


def _direction_chars(layout: Layout, grid: GridSpec, flip: bool) -> list[list[str]]:
    chars = [["." for _ in range(grid.nu)] for _ in range(grid.mu)]
    outgoing: dict[Cell, list[Cell]] = {}
    for tail, head in sorted(layout.directions):
        if flip:
            tail, head = head, tail
        outgoing.setdefault(tail, []).append(head)
    for tail, heads in outgoing.items():
        if not grid.in_range(tail):
            continue
        if len(heads) > 1:
            chars[tail.row][tail.col] = "+"
        else:
            head = heads[0]
            chars[tail.row][tail.col] = _ARROWS[(head.row - tail.row, head.col - tail.col)]
    for cell in grid.blocked:
        chars[cell.row][cell.col] = "#"
    return chars


def render_ascii(layout: Layout, grid: GridSpec, params: FieldParams,
                 style: RenderStyle = RenderStyle()) -> str:
    style.validate(grid)
    lines = ["".join(row) for row in _cell_chars(layout, grid, params)]
    if style.show_directions:
        lines.append("")
        lines.extend("".join(row) for row in _direction_chars(layout, grid, style.flip_arrows))
    return "\n".join(lines) + "\n"


_SVG_COLORS = {
    ".": "#ffffff", "#": "#d94f4f", "D": "#b7b7b7", "G": "#63b36a",
    "B": "#5a8fd6", "E": "#8e5aa8", "X": "#c79fd9",
}


def render_svg(layout: Layout, grid: GridSpec, params: FieldParams,
               style: RenderStyle = RenderStyle(format="svg"), cell_px: int = 24) -> str:
    style.validate(grid)
    chars = _cell_chars(layout, grid, params)
    width, height = grid.nu * cell_px, grid.mu * cell_px
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<defs><marker id="ah" markerWidth="6" markerHeight="6" refX="5" refY="3" '
        'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#222"/></marker></defs>',
    ]
    for r in range(grid.mu):
        for c in range(grid.nu):
            color = _SVG_COLORS[chars[r][c]]
            parts.append(f'<rect x="{c * cell_px}" y="{r * cell_px}" width="{cell_px}" '
                         f'height="{cell_px}" fill="{color}" stroke="#666" stroke-width="0.5"/>')
    if style.show_directions:
        half = cell_px / 2
        for tail, head in sorted(layout.directions):
            if style.flip_arrows:
                tail, head = head, tail
            x1, y1 = tail.col * cell_px + half, tail.row * cell_px + half
            x2, y2 = head.col * cell_px + half, head.row * cell_px + half
            # shorten toward the head so the arrowhead stays inside the cell
            x2, y2 = x1 + 0.75 * (x2 - x1), y1 + 0.75 * (y2 - y1)
            parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
                         'stroke="#222" stroke-width="1.6" marker-end="url(#ah)"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
