"""
Solver independent checks of finished blueprints.

`validate_structure` re-derives routes and carried items from the objects
alone, `simulate_flow` computes steady state rates, and
`brute_force_layout_oracle` enumerates small routing problems outright,
judging each grid with its own route walk in `routing_walk_problems`.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Set, Tuple

from .constants import (
    CONVEYOR_PENALTY,
    INSERTER_PENALTY,
    ORACLE_MAX_ITEMS,
    ORACLE_MAX_TILES,
    SIMULATION_SLACK_ROUNDS,
)
from .domain import (
    Direction,
    Grid,
    GridCoord,
    ProblemInstance,
    block_tiles,
    grid_value,
    make_grid,
    side_tiles,
)
from .exceptions import InstanceError, SimulationError
from .stage3 import GridLike, ObjectGrid, check_route_grids, derive_route_grids

_LOGGER = logging.getLogger(__name__)


class CellKind(Enum):
    EMPTY = "empty"
    CONVEYOR = "conveyor"
    INSERTER = "inserter"
    ASSEMBLER = "assembler"


@dataclass(frozen=True)
class Cell:
    """One tile; assembler cells name the anchor of their block and its recipe"""

    kind: CellKind = CellKind.EMPTY
    direction: Optional[Direction] = None
    anchor: Optional[GridCoord] = None
    recipe: int = 0

    @classmethod
    def conveyor(cls, direction: Direction) -> Cell:
        return cls(CellKind.CONVEYOR, direction=Direction(direction))

    @classmethod
    def inserter(cls, direction: Direction) -> Cell:
        return cls(CellKind.INSERTER, direction=Direction(direction))

    @classmethod
    def assembler(cls, anchor: GridCoord, recipe: int) -> Cell:
        return cls(CellKind.ASSEMBLER, anchor=anchor, recipe=recipe)


EMPTY_CELL = Cell()


@dataclass(frozen=True)
class Blueprint:
    """A finished layout. `instance` travels along but is not part of equality."""

    width: int
    height: int
    cells: Tuple[Tuple[Cell, ...], ...]
    predicted_rate: int = 0
    instance: Optional[ProblemInstance] = field(default=None, compare=False)

    @classmethod
    def from_grids(
        cls,
        width: int,
        height: int,
        conveyors: Grid,
        inserters: Grid,
        placements: Mapping[GridCoord, int],
        predicted_rate: int = 0,
        instance: Optional[ProblemInstance] = None,
    ) -> Blueprint:
        blocks = {
            tile: anchor for anchor in placements for tile in block_tiles(anchor)
        }

        def cell_at(coord: GridCoord) -> Cell:
            if coord in blocks:
                return Cell.assembler(blocks[coord], placements[blocks[coord]])
            if grid_value(conveyors, coord):
                return Cell.conveyor(Direction(grid_value(conveyors, coord)))
            if grid_value(inserters, coord):
                return Cell.inserter(Direction(grid_value(inserters, coord)))
            return EMPTY_CELL

        cells = tuple(
            tuple(cell_at(GridCoord(x, y)) for x in range(1, width + 1))
            for y in range(1, height + 1)
        )
        return cls(width, height, cells, predicted_rate, instance)

    def cell(self, coord: GridCoord) -> Cell:
        return self.cells[coord.y - 1][coord.x - 1]

    def coords(self):
        for y in range(1, self.height + 1):
            for x in range(1, self.width + 1):
                yield GridCoord(x, y)

    def _direction_grid(self, kind: CellKind) -> Grid:
        def value(coord: GridCoord) -> int:
            cell = self.cell(coord)
            return int(cell.direction) if cell.kind is kind and cell.direction else 0

        return make_grid(self.width, self.height, value)

    @property
    def conveyors(self) -> Grid:
        return self._direction_grid(CellKind.CONVEYOR)

    @property
    def inserters(self) -> Grid:
        return self._direction_grid(CellKind.INSERTER)

    def placements(self) -> Dict[GridCoord, int]:
        """Anchor to recipe of every assembler block"""
        found: Dict[GridCoord, int] = {}
        for coord in self.coords():
            cell = self.cell(coord)
            if cell.kind is CellKind.ASSEMBLER and cell.anchor is not None:
                found.setdefault(cell.anchor, cell.recipe)
        return dict(sorted(found.items()))

    def count(self, kind: CellKind) -> int:
        return sum(1 for coord in self.coords() if self.cell(coord).kind is kind)


def _block_shape_problems(bp: Blueprint, inst: ProblemInstance) -> List[str]:
    problems = []
    for anchor, recipe in bp.placements().items():
        for tile in block_tiles(anchor):
            if not tile.inside(bp.width, bp.height):
                continue
            if bp.cell(tile) != Cell.assembler(anchor, recipe):
                problems.append(f"malformed assembler block at {anchor}")
                break
        if inst.recipe_for(recipe) is None:
            problems.append(
                f"assembler at {anchor} runs item {recipe} which has no recipe"
            )
    for coord in bp.coords():
        cell = bp.cell(coord)
        directed = cell.kind in (CellKind.CONVEYOR, CellKind.INSERTER)
        if directed and cell.direction is None:
            problems.append(f"{cell.kind.value} at {coord} has no direction")
    return problems


def _assembler_service_problems(
    bp: Blueprint, inst: ProblemInstance, carrying: Grid
) -> List[str]:
    """Each assembler needs an output inserter and an input per ingredient"""

    problems = []
    inserters = bp.inserters
    for anchor, product in bp.placements().items():
        recipe = inst.recipe_for(product)
        if recipe is None:
            continue
        outputs = 0
        delivered = set()
        for tile, toward in side_tiles(anchor):
            if not tile.inside(bp.width, bp.height):
                continue
            direction = grid_value(inserters, tile)
            if direction == toward.opposite:
                outputs += 1
            elif direction == toward:
                delivered.add(grid_value(carrying, tile))
        if not outputs:
            problems.append(f"assembler at {anchor} has no output inserter")
        for item in recipe.ingredient_items:
            if item not in delivered:
                problems.append(f"assembler at {anchor} receives no item {item}")
    return problems


def validate_structure(bp: Blueprint, inst: ProblemInstance) -> List[str]:
    """Lists every broken layout rule, empty when the blueprint is legal"""

    if (bp.width, bp.height) != (inst.width, inst.height):
        return [
            f"blueprint is {bp.width}x{bp.height}, "
            f"instance is {inst.width}x{inst.height}"
        ]
    if len(bp.cells) != bp.height or any(len(row) != bp.width for row in bp.cells):
        return [f"cell grid is not {bp.width}x{bp.height}"]

    problems = _block_shape_problems(bp, inst)
    placements = bp.placements()
    labels = derive_route_grids(bp.conveyors, bp.inserters, inst, placements)
    problems += list(labels.problems)
    problems += check_route_grids(
        bp.conveyors, bp.inserters, labels.routes, labels.carrying, inst, placements
    )
    problems += _assembler_service_problems(bp, inst, labels.carrying)

    unique = list(dict.fromkeys(problems))
    if unique:
        _LOGGER.info("Blueprint breaks %s rules, first: %s", len(unique), unique[0])
    return unique


@dataclass(frozen=True)
class FlowReport:
    """
    Steady state rates in items per minute.

    `tile_rates` holds conveyor throughput and inserter transfer rates,
    `assembler_rates` the production of each block by anchor and
    `utilization` that production as a share of the recipe rate.
    """

    tile_rates: Mapping[GridCoord, Fraction]
    assembler_rates: Mapping[GridCoord, Fraction]
    utilization: Mapping[GridCoord, Fraction]
    delivered_rate: Fraction
    starved: Tuple[GridCoord, ...]
    rounds: int


class _FlowNetwork:
    """Static wiring of a blueprint, evaluated once per fixed point round"""

    def __init__(self, bp: Blueprint, inst: ProblemInstance) -> None:
        self.inst = inst
        self.placements = bp.placements()
        self.objects = ObjectGrid(bp.conveyors, bp.inserters, inst, self.placements)
        labels = derive_route_grids(bp.conveyors, bp.inserters, inst, self.placements)
        self.routes = labels.routes
        self.carrying = labels.carrying

        objects = self.objects
        self.conveyors = [c for c in bp.coords() if objects.conveyor(c)]
        self.inserters = [c for c in bp.coords() if objects.inserter(c)]
        self.source_rate = {
            coord: Fraction(source.rate) for coord, source in objects.sources.items()
        }

        # pickups drain in route order, upstream first
        self.drainers: Dict[GridCoord, List[GridCoord]] = {}
        for coord in self.inserters:
            pickup = self.pickup(coord)
            key = objects.blocks.get(pickup, pickup)
            self.drainers.setdefault(key, []).append(coord)
        for key, drainers in self.drainers.items():
            drainers.sort(key=lambda c: (grid_value(self.routes, c), c.y, c.x))

    def pickup(self, inserter: GridCoord) -> GridCoord:
        return inserter.step(Direction(self.objects.inserter(inserter)).opposite)

    def drop(self, inserter: GridCoord) -> GridCoord:
        return inserter.step(Direction(self.objects.inserter(inserter)))

    def shares(self, available: Fraction, drainers: List[GridCoord]):
        """Split `available` among inserters, each capped at the inserter rate"""
        cap = Fraction(self.inst.inserter_rate)
        left = available
        taken = {}
        for coord in drainers:
            taken[coord] = min(cap, left)
            left -= taken[coord]
        return taken, left

    def round(
        self,
        throughput: Dict[GridCoord, Fraction],
        moved: Dict[GridCoord, Fraction],
        production: Dict[GridCoord, Fraction],
    ):
        objects, inst = self.objects, self.inst
        capacity = Fraction(inst.conveyor_capacity)

        leftover: Dict[GridCoord, Fraction] = {}
        next_moved: Dict[GridCoord, Fraction] = {}
        for conveyor in self.conveyors:
            taken, left = self.shares(
                throughput[conveyor], self.drainers.get(conveyor, [])
            )
            next_moved.update(taken)
            leftover[conveyor] = left
        for anchor in self.placements:
            taken, _ = self.shares(production[anchor], self.drainers.get(anchor, []))
            next_moved.update(taken)
        for inserter in self.inserters:
            pickup = self.pickup(inserter)
            if objects.inserter(pickup):
                next_moved[inserter] = min(
                    Fraction(inst.inserter_rate), moved[pickup]
                )
            next_moved.setdefault(inserter, Fraction(0))

        next_throughput = {}
        for conveyor in self.conveyors:
            inflow = self.source_rate.get(conveyor, Fraction(0))
            for feeder in objects.feeders(conveyor):
                if objects.conveyor(feeder):
                    inflow += leftover[feeder]
                else:
                    inflow += moved[feeder]
            next_throughput[conveyor] = min(capacity, inflow)

        received: Dict[GridCoord, Dict[int, Fraction]] = {
            a: {} for a in self.placements
        }
        for inserter in self.inserters:
            drop = self.drop(inserter)
            if drop in objects.blocks:
                item = grid_value(self.carrying, inserter)
                bucket = received[objects.blocks[drop]]
                bucket[item] = bucket.get(item, Fraction(0)) + moved[inserter]

        next_production = {}
        for anchor, product in self.placements.items():
            recipe = inst.recipe_for(product)
            rate = Fraction(recipe.rate) if recipe else Fraction(0)
            for item, qty in recipe.ingredients if recipe else ():
                supplied = received[anchor].get(item, Fraction(0))
                rate = min(rate, supplied * recipe.qty_produced / qty)
            next_production[anchor] = rate

        return next_throughput, next_moved, next_production


def simulate_flow(bp: Blueprint, inst: ProblemInstance) -> FlowReport:
    """Steady state rates as the least fixed point of rate propagation"""

    network = _FlowNetwork(bp, inst)
    zero = Fraction(0)
    throughput = {c: zero for c in network.conveyors}
    moved = {c: zero for c in network.inserters}
    production = {a: zero for a in network.placements}

    limit = (
        len(network.conveyors)
        + len(network.inserters)
        + len(network.placements)
        + SIMULATION_SLACK_ROUNDS
    )
    rounds = 0
    while True:
        rounds += 1
        if rounds > limit:
            raise SimulationError(f"flow did not settle after {limit} rounds")
        state = network.round(throughput, moved, production)
        if state == (throughput, moved, production):
            break
        throughput, moved, production = state

    dest = inst.destination
    delivered = throughput.get(dest, zero) if network.objects.conveyor(dest) else zero
    utilization = {}
    for anchor, product in network.placements.items():
        recipe = inst.recipe_for(product)
        utilization[anchor] = production[anchor] / recipe.rate if recipe else zero

    starved = tuple(c for c in network.inserters if moved[c] == 0)
    for coord in starved:
        _LOGGER.warning("Inserter at %s receives no items", coord)

    tile_rates = dict(throughput)
    tile_rates.update(moved)
    report = FlowReport(
        tile_rates=dict(sorted(tile_rates.items())),
        assembler_rates=production,
        utilization=utilization,
        delivered_rate=delivered,
        starved=starved,
        rounds=rounds,
    )
    _LOGGER.info(
        "Flow settled after %s rounds, delivering %s of %s per minute",
        rounds,
        delivered,
        bp.predicted_rate,
    )
    return report


class _RoutingWalk:
    """
    Routing-only object grids judged as a transport graph.

    Every object lists the tiles its items come from. Routes are walked
    outwards from the sources, pushing the carried item along and counting
    the longest walk to each object.
    """

    def __init__(
        self, conveyors: GridLike, inserters: GridLike, inst: ProblemInstance
    ) -> None:
        self.conveyors = conveyors
        self.inserters = inserters
        self.inst = inst
        self.delivers = inst.supply(inst.out_item) > 0

    def at(self, coord: GridCoord) -> Tuple[Optional[CellKind], int]:
        if not coord.inside(self.inst.width, self.inst.height):
            return None, 0
        if grid_value(self.conveyors, coord):
            return CellKind.CONVEYOR, grid_value(self.conveyors, coord)
        if grid_value(self.inserters, coord):
            return CellKind.INSERTER, grid_value(self.inserters, coord)
        return None, 0

    def accepts(self, coord: GridCoord, direction: Direction) -> bool:
        """Whether items moving in `direction` may enter the object on `coord`"""
        kind, facing = self.at(coord)
        return kind is CellKind.CONVEYOR or (
            kind is CellKind.INSERTER and facing == direction
        )

    def inputs(self, coord: GridCoord) -> List[GridCoord]:
        kind, facing = self.at(coord)
        if kind is CellKind.INSERTER:
            return [coord.step(Direction(facing).opposite)]
        found = []
        for direction in Direction:
            behind = coord.step(direction.opposite)
            if self.at(behind)[1] == direction:
                found.append(behind)
        return found

    def local(self, coord: GridCoord) -> List[str]:
        """Rules reading only `coord` and its four neighbours"""
        inst = self.inst
        kind, facing = self.at(coord)
        problems = []
        is_source = inst.source_at(coord) is not None
        is_destination = coord == inst.destination
        if is_source and kind is not CellKind.CONVEYOR:
            problems.append(f"source {coord} has no conveyor")
        if is_destination and self.delivers != (kind is CellKind.CONVEYOR):
            problems.append(f"destination {coord} has the wrong object")
        if kind is None:
            return problems

        direction = Direction(facing)
        behind = coord.step(direction.opposite)
        ahead = coord.step(direction)
        if kind is CellKind.CONVEYOR:
            inputs = self.inputs(coord)
            if is_source and inputs:
                problems.append(f"source {coord} receives items")
            if not is_source and not inputs:
                problems.append(f"conveyor {coord} receives nothing")
            if is_destination:
                if behind not in inputs:
                    problems.append(f"destination {coord} is not fed from behind")
                if self.at(ahead)[0] is CellKind.CONVEYOR:
                    problems.append(f"destination {coord} passes items on")
            elif not self.accepts(ahead, direction):
                problems.append(f"conveyor {coord} runs into nothing")
            return problems

        if is_source or is_destination:
            problems.append(f"inserter on {coord}")
        if not behind.inside(inst.width, inst.height):
            problems.append(f"inserter {coord} picks up outside")
        elif behind == inst.destination:
            problems.append(f"inserter {coord} picks up at the destination")
        elif not self.accepts(behind, direction):
            problems.append(f"inserter {coord} picks up nothing")
        if not self.accepts(ahead, direction):
            problems.append(f"inserter {coord} drops onto nothing")
        elif (
            self.at(behind)[0] is CellKind.CONVEYOR
            and self.at(ahead)[0] is CellKind.CONVEYOR
        ):
            problems.append(f"inserter {coord} links two conveyors")
        return problems

    def problems(self) -> List[str]:
        inst = self.inst
        found = [p for coord in inst.tiles() for p in self.local(coord)]
        if found:
            return found

        objects = [c for c in inst.tiles() if self.at(c)[0] is not None]
        waiting = {c: len(self.inputs(c)) for c in objects}
        after: Dict[GridCoord, List[GridCoord]] = {c: [] for c in objects}
        for coord in objects:
            for upstream in self.inputs(coord):
                after[upstream].append(coord)

        ready = deque(c for c in objects if not waiting[c])
        length = {c: 1 for c in ready}
        item = {c: inst.source_at(c).item for c in ready}
        arriving: Dict[GridCoord, Set[int]] = {c: set() for c in objects}
        while ready:
            coord = ready.popleft()
            for nxt in after[coord]:
                length[nxt] = max(length.get(nxt, 0), length[coord] + 1)
                arriving[nxt].add(item[coord])
                waiting[nxt] -= 1
                if waiting[nxt]:
                    continue
                if len(arriving[nxt]) > 1:
                    found.append(f"mixed items at {nxt}")
                item[nxt] = min(arriving[nxt])
                ready.append(nxt)

        looped = [c for c in objects if waiting[c]]
        if looped:
            found.append(f"route loops back through {looped[0]}")
            return found
        found += [
            f"route to {c} is longer than {inst.max_route}"
            for c in objects
            if length[c] > inst.max_route
        ]
        dest = inst.destination
        if self.delivers and item[dest] != inst.out_item:
            found.append(f"destination {dest} receives item {item[dest]}")
        return found


def routing_walk_problems(
    conveyors: GridLike, inserters: GridLike, inst: ProblemInstance
) -> List[str]:
    """Rule breaks of a routing-only object grid, found by walking its routes"""
    return _RoutingWalk(conveyors, inserters, inst).problems()


def _tile_options(
    inst: ProblemInstance,
    coord: GridCoord,
    conveyor_penalty: int,
    inserter_penalty: int,
):
    """Objects a tile may hold, cheapest first; reserved tiles only take conveyors"""
    conveyors = [(int(d), 0, conveyor_penalty) for d in Direction]
    if inst.source_at(coord) is not None:
        return conveyors
    if coord == inst.destination:
        return conveyors if inst.supply(inst.out_item) > 0 else [(0, 0, 0)]
    options = [(0, 0, 0)] + [(0, int(d), inserter_penalty) for d in Direction]
    return sorted(options + conveyors, key=lambda option: option[2])


def brute_force_layout_oracle(
    inst: ProblemInstance,
    conveyor_penalty: int = CONVEYOR_PENALTY,
    inserter_penalty: int = INSERTER_PENALTY,
) -> Optional[int]:
    """
    Cheapest legal object grid of a routing-only instance, by enumeration.

    Returns None when no object grid is legal. Partial grids are cut as soon
    as a tile and all its neighbours are decided and break a local rule, or
    when they cannot beat the best grid found so far.
    """

    if inst.width * inst.height > ORACLE_MAX_TILES or inst.num_items > ORACLE_MAX_ITEMS:
        raise InstanceError(
            f"oracle handles at most {ORACLE_MAX_TILES} tiles and "
            f"{ORACLE_MAX_ITEMS} items, got {inst.width}x{inst.height} with "
            f"{inst.num_items} items"
        )

    tiles = list(inst.tiles())
    order = {coord: k for k, coord in enumerate(tiles)}
    settled_at: Dict[int, List[GridCoord]] = {}
    for coord in tiles:
        steps = [coord.step(d) for d in Direction]
        around = [coord] + [c for c in steps if c.inside(inst.width, inst.height)]
        settled_at.setdefault(max(order[c] for c in around), []).append(coord)

    options = [
        _tile_options(inst, coord, conveyor_penalty, inserter_penalty)
        for coord in tiles
    ]
    # cheapest cost still owed by tiles k.. onwards
    owed = [0] * (len(tiles) + 1)
    for k in range(len(tiles) - 1, -1, -1):
        owed[k] = owed[k + 1] + min(price for _, _, price in options[k])

    conveyors = [[0] * inst.width for _ in range(inst.height)]
    inserters = [[0] * inst.width for _ in range(inst.height)]
    walk = _RoutingWalk(conveyors, inserters, inst)
    best: List[Optional[int]] = [None]
    leaves = [0]

    def complete(cost: int) -> None:
        leaves[0] += 1
        if not walk.problems():
            best[0] = cost

    def visit(k: int, cost: int) -> None:
        if best[0] is not None and cost + owed[k] >= best[0]:
            return
        if k == len(tiles):
            complete(cost)
            return
        coord = tiles[k]
        for conveyor, inserter, price in options[k]:
            conveyors[coord.y - 1][coord.x - 1] = conveyor
            inserters[coord.y - 1][coord.x - 1] = inserter
            if not any(walk.local(t) for t in settled_at.get(k, ())):
                visit(k + 1, cost + price)
        conveyors[coord.y - 1][coord.x - 1] = 0
        inserters[coord.y - 1][coord.x - 1] = 0

    visit(0, 0)
    _LOGGER.debug(
        "Oracle checked %s complete grids of %sx%s, best %s",
        leaves[0],
        inst.width,
        inst.height,
        best[0],
    )
    return best[0]
