""" Problem representation, instance validation and model bounds. """

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Set, Tuple

from .constants import (
    ASSEMBLER_SIZE,
    CONVEYOR_CAPACITY,
    INSERTER_RATE,
    MAX_INSERTERS_PER_ASSEMBLER,
)
from .exceptions import InstanceError

_LOGGER = logging.getLogger(__name__)

Grid = Tuple[Tuple[int, ...], ...]


class Direction(IntEnum):
    """Transport direction codes, 0 is reserved for an absent object"""

    NORTH = 1
    SOUTH = 2
    EAST = 3
    WEST = 4

    @property
    def dx(self) -> int:
        return _DELTAS[self][0]

    @property
    def dy(self) -> int:
        return _DELTAS[self][1]

    @property
    def opposite(self) -> Direction:
        return _OPPOSITES[self]

    @property
    def letter(self) -> str:
        return self.name[0]

    @classmethod
    def from_letter(cls, letter: str) -> Direction:
        for direction in cls:
            if direction.letter == letter.upper():
                return direction
        raise ValueError(f"unknown direction {letter!r}")


_DELTAS = {
    Direction.NORTH: (0, -1),
    Direction.SOUTH: (0, 1),
    Direction.EAST: (1, 0),
    Direction.WEST: (-1, 0),
}

_OPPOSITES = {
    Direction.NORTH: Direction.SOUTH,
    Direction.SOUTH: Direction.NORTH,
    Direction.EAST: Direction.WEST,
    Direction.WEST: Direction.EAST,
}


@dataclass(frozen=True, order=True)
class GridCoord:
    """1-based tile coordinate, x grows east and y grows south"""

    x: int
    y: int

    def step(self, direction: Direction) -> GridCoord:
        return GridCoord(self.x + direction.dx, self.y + direction.dy)

    def inside(self, width: int, height: int) -> bool:
        return 1 <= self.x <= width and 1 <= self.y <= height

    def __str__(self) -> str:
        return f"({self.x},{self.y})"


@dataclass(frozen=True)
class Recipe:
    product: int
    ingredients: Tuple[Tuple[int, int], ...]
    qty_produced: int = 1
    rate: int = 1

    @classmethod
    def build(
        cls, product: int, ingredients: Mapping[int, int], qty_produced: int, rate: int
    ) -> Recipe:
        return cls(product, tuple(sorted(ingredients.items())), qty_produced, rate)

    @property
    def ingredient_items(self) -> Tuple[int, ...]:
        return tuple(item for item, _ in self.ingredients)

    def quantity(self, item: int) -> int:
        """Units of `item` needed per craft, 0 when it is not an ingredient"""
        for ingredient, qty in self.ingredients:
            if ingredient == item:
                return qty
        return 0

    def consumption(self, item: int) -> Fraction:
        """Items per minute of `item` consumed at full utilization"""
        return Fraction(self.quantity(item) * self.rate, self.qty_produced)


@dataclass(frozen=True)
class Source:
    coord: GridCoord
    item: int
    rate: int


@dataclass(frozen=True)
class ProblemInstance:
    """A blueprint problem: area, sources, destination and recipe book"""

    width: int
    height: int
    num_items: int
    out_item: int
    sources: Tuple[Source, ...]
    destination: GridCoord
    recipes: Tuple[Recipe, ...]
    inserter_rate: int = INSERTER_RATE
    conveyor_capacity: int = CONVEYOR_CAPACITY
    _recipe_index: Dict[int, Recipe] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        for recipe in self.recipes:
            self._recipe_index.setdefault(recipe.product, recipe)

    @property
    def items(self) -> range:
        return range(1, self.num_items + 1)

    @property
    def max_route(self) -> int:
        return self.width + self.height

    def recipe_for(self, item: int) -> Optional[Recipe]:
        return self._recipe_index.get(item)

    def supply(self, item: int) -> int:
        """Aggregate source rate of `item`"""
        return sum(source.rate for source in self.sources if source.item == item)

    def source_at(self, coord: GridCoord) -> Optional[Source]:
        for source in self.sources:
            if source.coord == coord:
                return source
        return None

    def tiles(self) -> Iterator[GridCoord]:
        """Row-major walk over the blueprint"""
        for y in range(1, self.height + 1):
            for x in range(1, self.width + 1):
                yield GridCoord(x, y)

    @property
    def reserved(self) -> Grid:
        marked = {source.coord for source in self.sources} | {self.destination}
        return make_grid(self.width, self.height, lambda c: int(c in marked))

    def producible_items(self) -> Set[int]:
        """Items reachable from the sources through the recipe book"""
        available = {source.item for source in self.sources}
        changed = True
        while changed:
            changed = False
            for recipe in self.recipes:
                if recipe.product in available:
                    continue
                if all(item in available for item in recipe.ingredient_items):
                    available.add(recipe.product)
                    changed = True
        return available


@dataclass(frozen=True)
class ModelBounds:
    max_rate: int
    max_assemblers: int
    max_consumption: int
    max_inserters_in: int
    max_inserters_out: int


def make_grid(width: int, height: int, value: Callable[[GridCoord], int]) -> Grid:
    return tuple(
        tuple(value(GridCoord(x, y)) for x in range(1, width + 1))
        for y in range(1, height + 1)
    )


def zero_grid(width: int, height: int) -> Grid:
    return tuple(tuple(0 for _ in range(width)) for _ in range(height))


def grid_value(grid: Grid, coord: GridCoord) -> int:
    return grid[coord.y - 1][coord.x - 1]


def _ceil_div(numerator: int, denominator: int) -> int:
    return -(-numerator // denominator)


def _recipe_cycles(inst: ProblemInstance) -> List[int]:
    """Products that sit on a cycle of the ingredient graph"""
    state: Dict[int, int] = {}
    cyclic: List[int] = []

    def visit(item: int) -> None:
        state[item] = 1
        recipe = inst.recipe_for(item)
        for ingredient in recipe.ingredient_items if recipe else ():
            if state.get(ingredient) == 1:
                cyclic.append(ingredient)
            elif ingredient not in state:
                visit(ingredient)
        state[item] = 2

    for recipe in inst.recipes:
        if recipe.product not in state:
            visit(recipe.product)
    return sorted(set(cyclic))


def validate_instance(inst: ProblemInstance) -> List[str]:
    """Lists every broken instance invariant, empty when the instance is usable"""

    violations: List[str] = []

    if inst.width < 1 or inst.height < 1:
        violations.append(f"grid {inst.width}x{inst.height} must be at least 1x1")
    if inst.inserter_rate < 1:
        violations.append("inserter_rate must be at least 1")
    if inst.conveyor_capacity < 1:
        violations.append("conveyor_capacity must be at least 1")
    if inst.num_items < 1:
        violations.append("num_items must be at least 1")
    if inst.out_item not in inst.items:
        violations.append(f"out_item {inst.out_item} outside 1..{inst.num_items}")

    if not inst.destination.inside(inst.width, inst.height):
        violations.append(f"destination {inst.destination} outside the grid")

    seen: Set[GridCoord] = set()
    for source in inst.sources:
        if source.coord == inst.destination:
            violations.append("source overlaps destination")
        if source.coord in seen:
            violations.append(f"duplicate source tile {source.coord}")
        seen.add(source.coord)
        if not source.coord.inside(inst.width, inst.height):
            violations.append(f"source {source.coord} outside the grid")
        if source.item not in inst.items:
            violations.append(f"source item {source.item} outside 1..{inst.num_items}")
        if source.rate < 1:
            violations.append(f"source {source.coord} rate must be at least 1")

    products: Set[int] = set()
    for recipe in inst.recipes:
        if recipe.product in products:
            violations.append(f"duplicate recipe for item {recipe.product}")
        products.add(recipe.product)
        if recipe.product not in inst.items:
            violations.append(
                f"recipe product {recipe.product} outside 1..{inst.num_items}"
            )
        if recipe.product in recipe.ingredient_items:
            violations.append(f"recipe for item {recipe.product} consumes its product")
        if recipe.qty_produced < 1 or recipe.rate < 1:
            violations.append(f"recipe for item {recipe.product} has a zero quantity")
        for item, qty in recipe.ingredients:
            if item not in inst.items:
                violations.append(
                    f"recipe for item {recipe.product} uses unknown item {item}"
                )
            if qty < 1:
                violations.append(
                    f"recipe for item {recipe.product} needs some of item {item}"
                )

    for item in _recipe_cycles(inst):
        violations.append(f"recipe cycle through item {item}")

    if inst.out_item not in inst.producible_items():
        violations.append("out_item unproducible")

    if violations:
        _LOGGER.debug("Instance has %s violations", len(violations))
    return violations


def derive_bounds(inst: ProblemInstance) -> ModelBounds:
    """Finite domain bounds shared by the stage models"""

    if not inst.recipes:
        raise InstanceError("empty recipe book, no bounds derivable")

    max_rate = max(recipe.rate for recipe in inst.recipes)
    max_consumption = max(
        (
            _ceil_div(qty * recipe.rate, recipe.qty_produced)
            for recipe in inst.recipes
            for _, qty in recipe.ingredients
        ),
        default=0,
    )

    def inserters_for(flow: int) -> int:
        needed = _ceil_div(flow, inst.inserter_rate)
        return min(max(needed, 1), MAX_INSERTERS_PER_ASSEMBLER)

    bounds = ModelBounds(
        max_rate=max_rate,
        max_assemblers=(inst.width // ASSEMBLER_SIZE) * (inst.height // ASSEMBLER_SIZE),
        max_consumption=max_consumption,
        max_inserters_in=inserters_for(max_consumption),
        max_inserters_out=inserters_for(max_rate),
    )
    _LOGGER.debug("Derived %s", bounds)
    return bounds


def block_tiles(anchor: GridCoord) -> List[GridCoord]:
    """Tiles of the 3x3 assembler block whose top-left tile is `anchor`"""
    return [
        GridCoord(anchor.x + dx, anchor.y + dy)
        for dy in range(ASSEMBLER_SIZE)
        for dx in range(ASSEMBLER_SIZE)
    ]


def side_tiles(anchor: GridCoord) -> List[Tuple[GridCoord, Direction]]:
    """
    Tiles orthogonally adjacent to a block, north side first, then south,
    west and east, each paired with the direction pointing into the block.
    Tiles may lie outside the grid.
    """
    span = range(ASSEMBLER_SIZE)
    north = [(GridCoord(anchor.x + d, anchor.y - 1), Direction.SOUTH) for d in span]
    south = [
        (GridCoord(anchor.x + d, anchor.y + ASSEMBLER_SIZE), Direction.NORTH)
        for d in span
    ]
    west = [(GridCoord(anchor.x - 1, anchor.y + d), Direction.EAST) for d in span]
    east = [
        (GridCoord(anchor.x + ASSEMBLER_SIZE, anchor.y + d), Direction.WEST)
        for d in span
    ]
    return north + south + west + east


def candidate_anchors(width: int, height: int, reserved: Grid) -> List[GridCoord]:
    """Row-major anchors whose block fits in the grid and avoids reserved tiles"""
    anchors = []
    for y in range(1, height - ASSEMBLER_SIZE + 2):
        for x in range(1, width - ASSEMBLER_SIZE + 2):
            anchor = GridCoord(x, y)
            if not any(grid_value(reserved, tile) for tile in block_tiles(anchor)):
                anchors.append(anchor)
    return anchors
