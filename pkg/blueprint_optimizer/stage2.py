"""
Stage 2: packing assemblers and their inserter slots into the grid.

Only counts from Stage 1 are used; item types are never read here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .constants import AXIS_HORIZONTAL, AXIS_VERTICAL
from .domain import (
    Direction,
    Grid,
    GridCoord,
    block_tiles,
    candidate_anchors,
    grid_value,
    make_grid,
    side_tiles,
)
from .exceptions import InconsistentInputsError, LedgerError, SearchLimitError
from .fdsolver import (
    Model,
    Mode,
    SearchConfig,
    Status,
    Var,
    implication,
    lex_less,
    linear,
    total,
)

_LOGGER = logging.getLogger(__name__)

Flat = Tuple[int, ...]


def _axis(toward: Direction) -> int:
    if toward in (Direction.EAST, Direction.WEST):
        return AXIS_HORIZONTAL
    return AXIS_VERTICAL


@dataclass(frozen=True)
class PackingLayout:
    """
    An assembler packing.

    `assembler_layout` marks block anchors with 1, `inserter_layout` marks
    inserter slots with their axis. `anchors[a]` is where Stage 1 assembler
    `a` was put and `positions[a]` lists its inserter slots.
    """

    assembler_layout: Grid
    inserter_layout: Grid
    anchors: Tuple[GridCoord, ...]
    positions: Tuple[Tuple[GridCoord, ...], ...]

    @property
    def width(self) -> int:
        return len(self.assembler_layout[0]) if self.assembler_layout else 0

    @property
    def height(self) -> int:
        return len(self.assembler_layout)

    def flatten(self) -> Flat:
        """Row-major assembler_layout, tile (x, y) at index (y - 1)w + x - 1"""
        return tuple(cell for row in self.assembler_layout for cell in row)

    def anchor_tiles(self) -> List[GridCoord]:
        """Anchors in row-major order"""
        return [
            GridCoord(x + 1, y + 1)
            for y, row in enumerate(self.assembler_layout)
            for x, cell in enumerate(row)
            if cell
        ]


@dataclass(frozen=True)
class Stage2Ledger:
    """Flattened assembler layouts already handed to Stage 3"""

    attempts: Tuple[Flat, ...] = ()

    def __len__(self) -> int:
        return len(self.attempts)

    def __contains__(self, flat: object) -> bool:
        return flat in self.attempts


def record_packing(ledger: Stage2Ledger, layout: PackingLayout) -> Stage2Ledger:
    """Stores the assembler grid only, inserter arrangements are left to Stage 3"""

    flat = layout.flatten()
    if flat in ledger:
        raise LedgerError("assembler layout is already recorded")
    return Stage2Ledger(ledger.attempts + (flat,))


@dataclass
class Stage2Model:
    width: int
    height: int
    model: Model
    anchors: Dict[GridCoord, Var]
    assigned: List[Dict[GridCoord, Var]]
    attached: Dict[GridCoord, Dict[GridCoord, Tuple[Var, int]]]


def build_stage2_model(
    width: int,
    height: int,
    reserved: Grid,
    num_assemblers: int,
    inserter_totals: Sequence[int],
    ledger: Optional[Stage2Ledger] = None,
) -> Stage2Model:
    """Encodes disjoint blocks, inserter slots and exclusion of recorded grids"""

    if len(inserter_totals) != num_assemblers:
        raise InconsistentInputsError(
            f"{len(inserter_totals)} inserter totals for {num_assemblers} assemblers"
        )
    ledger = ledger or Stage2Ledger()
    model = Model("stage2")

    candidates = candidate_anchors(width, height, reserved)
    anchors = {p: model.add_bool(f"anchor{p}") for p in candidates}
    model.post(total(anchors.values(), "==", num_assemblers))

    covering: Dict[GridCoord, List[Var]] = {}
    for p, var in anchors.items():
        for tile in block_tiles(p):
            covering.setdefault(tile, []).append(var)
    for tile, vars in covering.items():
        if len(vars) > 1:
            model.post(total(vars, "<=", 1))

    assigned: List[Dict[GridCoord, Var]] = []
    for a in range(num_assemblers):
        row = {p: model.add_bool(f"at[{a}]{p}") for p in candidates}
        model.post(total(row.values(), "==", 1))
        assigned.append(row)
    for p, var in anchors.items():
        model.post(linear([(1, var)] + [(-1, row[p]) for row in assigned], "==", 0))

    attached: Dict[GridCoord, Dict[GridCoord, Tuple[Var, int]]] = {}
    claims: Dict[GridCoord, List[Var]] = {}
    for p, var in anchors.items():
        slots = {}
        for tile, toward in side_tiles(p):
            if not tile.inside(width, height) or grid_value(reserved, tile):
                continue
            slot = model.add_bool(f"slot{p}{tile}")
            model.post(implication([slot], [var]))
            slots[tile] = (slot, _axis(toward))
            claims.setdefault(tile, []).append(slot)
        attached[p] = slots
        model.post(
            linear(
                [(1, slot) for slot, _ in slots.values()]
                + [
                    (-inserter_totals[a], assigned[a][p])
                    for a in range(num_assemblers)
                ],
                "==",
                0,
            )
        )

    for tile, slots in claims.items():
        model.post(total(slots + covering.get(tile, []), "<=", 1))

    flat = [
        anchors.get(GridCoord(x, y), 0)
        for y in range(1, height + 1)
        for x in range(1, width + 1)
    ]
    for index, attempt in enumerate(ledger.attempts):
        if len(attempt) != len(flat):
            raise InconsistentInputsError(
                f"ledger entry {index} covers {len(attempt)} tiles, "
                f"grid has {len(flat)}"
            )
        below = model.add_bool(f"ledger_below[{index}]", decision=False)
        model.post(lex_less(flat, attempt, enforce=[below]))
        model.post(lex_less(attempt, flat, enforce=[~below]))

    _LOGGER.debug(
        "Stage 2 model: %sx%s, %s candidate anchors, %s assemblers, %s ledger entries",
        width,
        height,
        len(candidates),
        num_assemblers,
        len(ledger),
    )
    return Stage2Model(width, height, model, anchors, assigned, attached)


def solve_stage2(
    built: Stage2Model, time_limit: float = 0.0, node_limit: int = 0
) -> Optional[PackingLayout]:
    """First packing in search order, None when every grid is used up"""

    outcome = built.model.solve(
        SearchConfig(mode=Mode.FIRST, time_limit=time_limit, node_limit=node_limit)
    )
    if outcome.status is Status.UNSAT:
        _LOGGER.info("Stage 2 found no further packing")
        return None
    if outcome.status is Status.LIMIT_REACHED:
        _LOGGER.warning("Stage 2 stopped at its search limit")
        raise SearchLimitError("stage 2")

    values = outcome.assignment
    chosen = {p for p, var in built.anchors.items() if values[var]}
    anchors = tuple(
        next(p for p, var in row.items() if values[var]) for row in built.assigned
    )
    slots: Dict[GridCoord, int] = {}
    positions = []
    for anchor in anchors:
        tiles = []
        for tile, (slot, axis) in built.attached[anchor].items():
            if values[slot]:
                tiles.append(tile)
                slots[tile] = axis
        positions.append(tuple(sorted(tiles, key=lambda c: (c.y, c.x))))

    layout = PackingLayout(
        assembler_layout=make_grid(
            built.width, built.height, lambda c: int(c in chosen)
        ),
        inserter_layout=make_grid(built.width, built.height, lambda c: slots.get(c, 0)),
        anchors=anchors,
        positions=tuple(positions),
    )
    _LOGGER.info("Stage 2 packing: anchors %s", ", ".join(map(str, anchors)) or "none")
    return layout
