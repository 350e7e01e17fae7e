""" ASCII rendering of blueprints. """

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Mapping

from .constants import (
    ASSEMBLER_CORNER_GLYPH,
    ASSEMBLER_HORIZONTAL_GLYPH,
    ASSEMBLER_SIZE,
    ASSEMBLER_VERTICAL_GLYPH,
    CONVEYOR_GLYPHS,
    EMPTY_GLYPH,
    INSERTER_GLYPHS,
    RECIPE_GLYPHS,
)
from .domain import Direction, GridCoord
from .exceptions import BlueprintOptimizerError
from .validator import Blueprint, CellKind


@dataclass(frozen=True)
class RenderStyle:
    empty: str = EMPTY_GLYPH
    conveyors: Mapping[int, str] = field(default_factory=lambda: dict(CONVEYOR_GLYPHS))
    inserters: Mapping[int, str] = field(default_factory=lambda: dict(INSERTER_GLYPHS))
    corner: str = ASSEMBLER_CORNER_GLYPH
    horizontal: str = ASSEMBLER_HORIZONTAL_GLYPH
    vertical: str = ASSEMBLER_VERTICAL_GLYPH
    legend: bool = False

    def __post_init__(self) -> None:
        glyphs = (
            [self.empty, self.corner, self.horizontal, self.vertical]
            + [self.conveyors[d] for d in Direction]
            + [self.inserters[d] for d in Direction]
        )
        if any(len(glyph) != 1 for glyph in glyphs):
            raise BlueprintOptimizerError("render glyphs must be single characters")
        if len(set(glyphs)) != len(glyphs):
            raise BlueprintOptimizerError("render glyphs must be unique")

    def recipe(self, item: int) -> str:
        return RECIPE_GLYPHS[item] if 0 <= item < len(RECIPE_GLYPHS) else "?"

    def legend_lines(self) -> List[str]:
        lines = [f"{self.empty}  empty"]
        lines += [f"{self.conveyors[d]}  conveyor {d.name.lower()}" for d in Direction]
        lines += [f"{self.inserters[d]}  inserter {d.name.lower()}" for d in Direction]
        glyphs = f"{self.corner}{self.horizontal}{self.vertical}"
        lines.append(f"{glyphs} assembler, centre shows the recipe")
        return lines


DEFAULT_STYLE = RenderStyle()


def _block_glyph(style: RenderStyle, anchor: GridCoord, coord: GridCoord, recipe: int):
    dx, dy = coord.x - anchor.x, coord.y - anchor.y
    last = ASSEMBLER_SIZE - 1
    on_x_edge = dx in (0, last)
    on_y_edge = dy in (0, last)
    if on_x_edge and on_y_edge:
        return style.corner
    if on_y_edge:
        return style.horizontal
    if on_x_edge:
        return style.vertical
    return style.recipe(recipe)


def render_ascii(bp: Blueprint, style: RenderStyle = DEFAULT_STYLE) -> str:
    """One line per row, one glyph per tile"""

    lines = []
    for y in range(1, bp.height + 1):
        row = []
        for x in range(1, bp.width + 1):
            coord = GridCoord(x, y)
            cell = bp.cell(coord)
            if cell.kind is CellKind.CONVEYOR:
                row.append(style.conveyors[cell.direction])
            elif cell.kind is CellKind.INSERTER:
                row.append(style.inserters[cell.direction])
            elif cell.kind is CellKind.ASSEMBLER:
                row.append(_block_glyph(style, cell.anchor, coord, cell.recipe))
            else:
                row.append(style.empty)
        lines.append("".join(row))

    if style.legend:
        lines.append("")
        lines += style.legend_lines()
    return "\n".join(lines) + "\n"

