"""
Stage 3: assigning assemblers to a packing and routing conveyors and inserters.

Transport tiles carry a route value that starts at 1 on source conveyors and
on inserters emptying an assembler, and grows by exactly one over the longest
feeder. Values strictly increase along every route, so no route can close on
itself. The same rules are available without a solver through
`derive_route_grids` and `check_route_grids`.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .constants import CONVEYOR_PENALTY, INSERTER_PENALTY
from .domain import (
    Direction,
    Grid,
    GridCoord,
    ProblemInstance,
    block_tiles,
    grid_value,
    make_grid,
    side_tiles,
    zero_grid,
)
from .exceptions import InconsistentInputsError, SearchLimitError
from .fdsolver import (
    Model,
    Objective,
    ReifiedEq,
    ReifiedGt,
    SearchConfig,
    Status,
    Var,
    implication,
    linear,
    total,
)
from .stage1 import Stage1Solution
from .stage2 import PackingLayout

_LOGGER = logging.getLogger(__name__)

GridLike = Sequence[Sequence[int]]
Placements = Mapping[GridCoord, int]


@dataclass(frozen=True)
class LayoutSolution:
    """Routed layout; `assignments[a]` is the anchor of active assembler a"""

    conveyors: Grid
    inserters: Grid
    routes: Grid
    carrying: Grid
    assignments: Tuple[GridCoord, ...]
    objective_value: int


def placements_of(stage1: Stage1Solution, assignments: Sequence[GridCoord]):
    """Anchor to product map of the placed assemblers"""
    return {
        anchor: stage1.assembler_recipes[a] for a, anchor in enumerate(assignments)
    }


def routing_inputs(inst: ProblemInstance) -> Tuple[Stage1Solution, PackingLayout]:
    """Zero-assembler stage results, for instances that only need routing"""
    stage1 = Stage1Solution(
        num_assemblers=0,
        assembler_recipes=(),
        assembler_rates=(),
        inserters_in=(),
        inserters_out=(),
        consuming=(),
        objective_value=0,
    )
    packing = PackingLayout(
        assembler_layout=zero_grid(inst.width, inst.height),
        inserter_layout=zero_grid(inst.width, inst.height),
        anchors=(),
        positions=(),
    )
    return stage1, packing


def delivers_output(inst: ProblemInstance, products: Sequence[int]) -> bool:
    """Whether anything can reach the destination, which then hosts a conveyor"""
    return inst.supply(inst.out_item) > 0 or inst.out_item in products


# Solver independent rules


class ObjectGrid:
    """Read access to a pair of direction grids plus the assembler blocks"""

    def __init__(
        self,
        conveyors: GridLike,
        inserters: GridLike,
        inst: ProblemInstance,
        placements: Placements,
    ) -> None:
        self.conveyors = conveyors
        self.inserters = inserters
        self.inst = inst
        self.products = dict(placements)
        self.blocks: Dict[GridCoord, GridCoord] = {}
        for anchor in placements:
            for tile in block_tiles(anchor):
                self.blocks.setdefault(tile, anchor)
        self.sources = {source.coord: source for source in inst.sources}
        self.delivers = delivers_output(inst, list(placements.values()))

    def free(self, coord: GridCoord) -> bool:
        return coord.inside(self.inst.width, self.inst.height) and (
            coord not in self.blocks
        )

    def conveyor(self, coord: GridCoord) -> int:
        return grid_value(self.conveyors, coord) if self.free(coord) else 0

    def inserter(self, coord: GridCoord) -> int:
        return grid_value(self.inserters, coord) if self.free(coord) else 0

    def direction(self, coord: GridCoord) -> int:
        return self.conveyor(coord) or self.inserter(coord)

    def feeders(self, coord: GridCoord) -> List[GridCoord]:
        """Neighbouring objects pointing into `coord`"""
        found = []
        for direction in Direction:
            behind = coord.step(direction.opposite)
            if self.direction(behind) == direction:
                found.append(behind)
        return found

    def block_product(self, coord: GridCoord) -> int:
        return self.products[self.blocks[coord]]


def object_problems(objects: ObjectGrid, coord: GridCoord) -> List[str]:
    """Rules that only depend on which objects sit on `coord` and its neighbours"""

    problems: List[str] = []
    inst = objects.inst
    conveyor = grid_value(objects.conveyors, coord)
    inserter = grid_value(objects.inserters, coord)

    if coord in objects.blocks:
        if conveyor or inserter:
            problems.append(f"object on assembler block at {coord}")
        return problems
    if conveyor and inserter:
        problems.append(f"conveyor and inserter share {coord}")
        return problems

    is_source = coord in objects.sources
    is_destination = coord == inst.destination
    if is_source and not conveyor:
        problems.append(f"source tile {coord} must host a conveyor")
    if is_destination and objects.delivers and not conveyor:
        problems.append(f"destination {coord} must host a conveyor")
    if is_destination and not objects.delivers and (conveyor or inserter):
        problems.append(f"destination {coord} receives nothing but hosts an object")
    if inserter and (is_source or is_destination):
        problems.append(f"inserter on reserved tile {coord}")

    if conveyor:
        direction = Direction(conveyor)
        feeders = objects.feeders(coord)
        if is_source and feeders:
            problems.append(f"source tile {coord} is fed")
        if not is_source and not feeders:
            problems.append(f"no route start / non-increasing route value at {coord}")
        ahead = coord.step(direction)
        if is_destination:
            if coord.step(direction.opposite) not in feeders:
                problems.append(
                    f"destination conveyor at {coord} does not continue its feed"
                )
            if objects.conveyor(ahead):
                problems.append(f"destination conveyor at {coord} feeds {ahead}")
        elif not ahead.inside(inst.width, inst.height):
            problems.append(f"conveyor at {coord} leads out of the grid")
        elif ahead in objects.blocks:
            problems.append(f"conveyor at {coord} runs into an assembler")
        elif not (objects.conveyor(ahead) or objects.inserter(ahead) == direction):
            problems.append(f"conveyor at {coord} leads nowhere")

    if inserter:
        direction = Direction(inserter)
        pickup = coord.step(direction.opposite)
        drop = coord.step(direction)
        if not pickup.inside(inst.width, inst.height) or not drop.inside(
            inst.width, inst.height
        ):
            problems.append(f"inserter at {coord} reaches outside the grid")
            return problems
        if pickup == inst.destination:
            problems.append(f"inserter at {coord} takes from the destination")
        if pickup not in objects.blocks and not (
            objects.conveyor(pickup) or objects.inserter(pickup) == direction
        ):
            problems.append(f"inserter at {coord} has no input")
        if drop not in objects.blocks and not (
            objects.conveyor(drop) or objects.inserter(drop) == direction
        ):
            problems.append(f"inserter at {coord} drops nowhere")
        if objects.conveyor(pickup) and objects.conveyor(drop):
            problems.append(f"inserter at {coord} only moves items between conveyors")
    return problems


def _block_problems(inst: ProblemInstance, placements: Placements) -> List[str]:
    problems = []
    reserved = {source.coord for source in inst.sources} | {inst.destination}
    seen: Dict[GridCoord, GridCoord] = {}
    for anchor in sorted(placements):
        tiles = block_tiles(anchor)
        if not all(tile.inside(inst.width, inst.height) for tile in tiles):
            problems.append(f"assembler at {anchor} does not fit in the grid")
        if reserved.intersection(tiles):
            problems.append(f"assembler at {anchor} covers a reserved tile")
        for tile in tiles:
            if tile in seen:
                problems.append(f"assemblers at {seen[tile]} and {anchor} overlap")
                break
        for tile in tiles:
            seen.setdefault(tile, anchor)
    return problems


def _shape_problems(inst: ProblemInstance, **grids: GridLike) -> List[str]:
    problems = []
    for name, grid in grids.items():
        if len(grid) != inst.height or any(len(row) != inst.width for row in grid):
            problems.append(f"{name} grid is not {inst.width}x{inst.height}")
    return problems


def check_route_grids(
    conveyors: GridLike,
    inserters: GridLike,
    routes: GridLike,
    carrying: GridLike,
    inst: ProblemInstance,
    placements: Placements,
) -> List[str]:
    """Lists every broken route or carrying rule, empty when the grids are legal"""

    problems = _shape_problems(
        inst, conveyors=conveyors, inserters=inserters, routes=routes, carrying=carrying
    )
    if problems:
        return problems
    problems += _block_problems(inst, placements)

    objects = ObjectGrid(conveyors, inserters, inst, placements)
    route = lambda c: grid_value(routes, c)  # noqa: E731
    carry = lambda c: grid_value(carrying, c)  # noqa: E731

    for coord in inst.tiles():
        conveyor = grid_value(conveyors, coord)
        inserter = grid_value(inserters, coord)
        if not 0 <= conveyor <= 4 or not 0 <= inserter <= 4:
            problems.append(f"direction out of range at {coord}")
            continue
        problems += object_problems(objects, coord)
        if not 0 <= route(coord) <= inst.max_route:
            problems.append(f"route value at {coord} exceeds w+h")
        if not 0 <= carry(coord) <= inst.num_items:
            problems.append(f"unknown item carried at {coord}")

        if coord in objects.blocks:
            if route(coord):
                problems.append(f"route value on assembler block at {coord}")
            if carry(coord) != objects.block_product(coord):
                problems.append(f"carrying mismatch at {coord}")
            continue

        occupied = bool(conveyor or inserter)
        if (route(coord) > 0) != occupied:
            problems.append(f"route value at {coord} does not match its object")
        if (carry(coord) > 0) != occupied:
            problems.append(f"carrying at {coord} does not match its object")

        source = objects.sources.get(coord)
        if source is not None:
            if route(coord) != 1:
                problems.append(f"source tile {coord} must start its route at 1")
            if carry(coord) != source.item:
                problems.append(f"source tile {coord} must carry item {source.item}")
        if coord == inst.destination and conveyor:
            if carry(coord) != inst.out_item:
                problems.append(f"destination {coord} must carry item {inst.out_item}")

        if conveyor and source is None:
            feeders = objects.feeders(coord)
            if feeders:
                if any(route(u) >= route(coord) for u in feeders):
                    problems.append(
                        f"no route start / non-increasing route value at {coord}"
                    )
                elif route(coord) != max(route(u) for u in feeders) + 1:
                    problems.append(
                        f"route value at {coord} is not one more than "
                        "its longest feeder"
                    )
                items = {carry(u) for u in feeders}
                if len(items) > 1:
                    problems.append(f"mixed items on conveyor at {coord}")
                elif carry(coord) not in items:
                    problems.append(f"carrying mismatch at {coord}")

        if inserter:
            direction = Direction(inserter)
            pickup = coord.step(direction.opposite)
            drop = coord.step(direction)
            if not pickup.inside(inst.width, inst.height) or not drop.inside(
                inst.width, inst.height
            ):
                continue
            if pickup in objects.blocks:
                if route(coord) != 1:
                    problems.append(f"inserter at {coord} must start its route at 1")
                if carry(coord) != objects.block_product(pickup):
                    problems.append(f"carrying mismatch at {coord}")
            elif objects.direction(pickup):
                if route(pickup) >= route(coord):
                    problems.append(
                        f"no route start / non-increasing route value at {coord}"
                    )
                elif route(coord) != route(pickup) + 1:
                    problems.append(
                        f"route value at {coord} is not one more than its input"
                    )
                if carry(coord) != carry(pickup):
                    problems.append(f"carrying mismatch at {coord}")
            if drop in objects.blocks:
                recipe = inst.recipe_for(objects.block_product(drop))
                if recipe is None or recipe.quantity(carry(coord)) == 0:
                    problems.append(
                        f"inserter at {coord} feeds item {carry(coord)} to an "
                        f"assembler that does not use it"
                    )

    if problems:
        _LOGGER.debug("Route grids break %s rules", len(problems))
    return problems


@dataclass(frozen=True)
class RouteLabels:
    routes: Grid
    carrying: Grid
    problems: Tuple[str, ...] = field(default=())


def derive_route_grids(
    conveyors: GridLike,
    inserters: GridLike,
    inst: ProblemInstance,
    placements: Placements,
) -> RouteLabels:
    """Labels routes by longest path and propagates carried items"""

    problems = _shape_problems(inst, conveyors=conveyors, inserters=inserters)
    if problems:
        blank = zero_grid(inst.width, inst.height)
        return RouteLabels(blank, blank, tuple(problems))

    objects = ObjectGrid(conveyors, inserters, inst, placements)
    nodes = [
        c for c in inst.tiles() if c not in objects.blocks and objects.direction(c)
    ]
    preds: Dict[GridCoord, List[GridCoord]] = {}
    for coord in nodes:
        if objects.conveyor(coord):
            preds[coord] = objects.feeders(coord)
            continue
        direction = Direction(objects.inserter(coord))
        pickup = coord.step(direction.opposite)
        if objects.conveyor(pickup) or objects.inserter(pickup) == direction:
            preds[coord] = [pickup]
        else:
            preds[coord] = []

    succs: Dict[GridCoord, List[GridCoord]] = {c: [] for c in nodes}
    waiting = {c: len(preds[c]) for c in nodes}
    for coord in nodes:
        for pred in preds[coord]:
            succs[pred].append(coord)

    routes: Dict[GridCoord, int] = {}
    carried: Dict[GridCoord, int] = {}
    ready = deque(c for c in nodes if waiting[c] == 0)
    while ready:
        coord = ready.popleft()
        source = objects.sources.get(coord)
        pickup = None
        if objects.inserter(coord):
            pickup = coord.step(Direction(objects.inserter(coord)).opposite)

        if source is not None:
            routes[coord], carried[coord] = 1, source.item
        elif pickup is not None and pickup in objects.blocks:
            routes[coord], carried[coord] = 1, objects.block_product(pickup)
        elif preds[coord]:
            routes[coord] = max(routes[p] for p in preds[coord]) + 1
            carried[coord] = carried[preds[coord][0]]
        else:
            routes[coord], carried[coord] = 1, 0

        for succ in succs[coord]:
            waiting[succ] -= 1
            if waiting[succ] == 0:
                ready.append(succ)

    stuck = [c for c in nodes if c not in routes]
    if stuck:
        problems.append("cycle detected at " + " ".join(map(str, stuck)))

    def carry_at(coord: GridCoord) -> int:
        if coord in objects.blocks:
            return objects.block_product(coord)
        return carried.get(coord, 0)

    return RouteLabels(
        routes=make_grid(inst.width, inst.height, lambda c: routes.get(c, 0)),
        carrying=make_grid(inst.width, inst.height, carry_at),
        problems=tuple(problems),
    )


# Constraint model


@dataclass
class Stage3Model:
    inst: ProblemInstance
    stage1: Stage1Solution
    anchors: Tuple[GridCoord, ...]
    model: Model
    objective: Objective
    blocks: Dict[GridCoord, GridCoord]
    conveyors: Dict[GridCoord, Var] = field(default_factory=dict)
    inserters: Dict[GridCoord, Var] = field(default_factory=dict)
    routes: Dict[GridCoord, Var] = field(default_factory=dict)
    carrying: Dict[GridCoord, Var] = field(default_factory=dict)
    assign: List[Dict[GridCoord, Var]] = field(default_factory=list)


def _same_assembler(stage1: Stage1Solution, a: int, b: int) -> bool:
    return (
        stage1.assembler_recipes[a] == stage1.assembler_recipes[b]
        and stage1.assembler_rates[a] == stage1.assembler_rates[b]
        and stage1.inserters_in[a] == stage1.inserters_in[b]
        and stage1.inserters_out[a] == stage1.inserters_out[b]
    )


class _Stage3Builder:
    def __init__(
        self, inst: ProblemInstance, stage1: Stage1Solution, packing: PackingLayout
    ) -> None:
        self.inst = inst
        self.stage1 = stage1
        self.model = Model("stage3")
        self.anchors = tuple(packing.anchor_tiles())
        self.blocks = {t: p for p in self.anchors for t in block_tiles(p)}
        self.free = [c for c in inst.tiles() if c not in self.blocks]
        self.sources = {source.coord: source for source in inst.sources}

        self.conv: Dict[GridCoord, Var] = {}
        self.ins: Dict[GridCoord, Var] = {}
        self.route: Dict[GridCoord, Var] = {}
        self.carry: Dict[GridCoord, Var] = {}
        self.conv_dir: Dict[GridCoord, Dict[Direction, Var]] = {}
        self.ins_dir: Dict[GridCoord, Dict[Direction, Var]] = {}
        self.is_conv: Dict[GridCoord, Var] = {}
        self.is_ins: Dict[GridCoord, Var] = {}
        self.assign: List[Dict[GridCoord, Var]] = []
        self.block_item: Dict[GridCoord, Var] = {}
        self._feeds: Dict[Tuple[GridCoord, GridCoord], Var] = {}
        self._carries: Dict[Tuple[GridCoord, int], Var] = {}

    def is_free(self, coord: GridCoord) -> bool:
        return coord.inside(self.inst.width, self.inst.height) and (
            coord not in self.blocks
        )

    def post(self, constraint) -> None:
        self.model.post(constraint)

    def fixed(self, var: Var, value: int) -> None:
        self.post(linear([(1, var)], "==", value))

    def feed(self, upstream: GridCoord, coord: GridCoord) -> Var:
        """True when the object on `upstream` points into `coord`"""
        key = (upstream, coord)
        if key not in self._feeds:
            direction = next(
                d for d in Direction if upstream.step(d) == coord
            )
            var = self.model.add_bool(f"feeds{upstream}{coord}", decision=False)
            self.post(
                linear(
                    [
                        (1, var),
                        (-1, self.conv_dir[upstream][direction]),
                        (-1, self.ins_dir[upstream][direction]),
                    ],
                    "==",
                    0,
                )
            )
            self._feeds[key] = var
        return self._feeds[key]

    def carries(self, coord: GridCoord, item: int) -> Var:
        key = (coord, item)
        if key not in self._carries:
            var = self.model.add_bool(f"carries{coord}[{item}]", decision=False)
            self.post(ReifiedEq(var, self.carry[coord], item))
            self._carries[key] = var
        return self._carries[key]

    def build(self) -> None:
        self.assignments()
        self.tiles()
        self.reserved()
        for coord in self.free:
            self.conveyor_rules(coord)
            self.inserter_rules(coord)
        self.assembler_counts()

    def assignments(self) -> None:
        stage1, model = self.stage1, self.model
        for a in stage1.active():
            row = {p: model.add_bool(f"assign[{a}]{p}") for p in self.anchors}
            self.post(total(row.values(), "==", 1))
            self.assign.append(row)
        for p in self.anchors:
            self.post(total([row[p] for row in self.assign], "==", 1))

        # interchangeable assemblers take anchors in row-major order
        for a in range(len(self.assign) - 1):
            if _same_assembler(stage1, a, a + 1):
                terms = [(k, self.assign[a][p]) for k, p in enumerate(self.anchors)]
                nxt = self.assign[a + 1]
                terms += [(-k, nxt[p]) for k, p in enumerate(self.anchors)]
                self.post(linear(terms, "<=", -1))

        for p in self.anchors:
            item = model.add_var(0, self.inst.num_items, f"block_item{p}", False)
            self.post(
                linear(
                    [(1, item)]
                    + [
                        (-stage1.assembler_recipes[a], row[p])
                        for a, row in enumerate(self.assign)
                    ],
                    "==",
                    0,
                )
            )
            self.block_item[p] = item

    def tiles(self) -> None:
        model, inst = self.model, self.inst
        for coord in self.free:
            self.conv[coord] = model.add_var(0, 4, f"conveyor{coord}")
            self.ins[coord] = model.add_var(0, 4, f"inserter{coord}")
        for coord in self.free:
            route = model.add_var(0, inst.max_route, f"route{coord}", decision=False)
            carry = model.add_var(0, inst.num_items, f"carry{coord}", decision=False)
            is_conv = model.add_bool(f"is_conveyor{coord}", decision=False)
            is_ins = model.add_bool(f"is_inserter{coord}", decision=False)
            occupied = model.add_bool(f"occupied{coord}", decision=False)

            self.conv_dir[coord] = {}
            self.ins_dir[coord] = {}
            for direction in Direction:
                c_dir = model.add_bool(f"conveyor{coord}{direction.letter}", False)
                i_dir = model.add_bool(f"inserter{coord}{direction.letter}", False)
                self.post(ReifiedEq(c_dir, self.conv[coord], direction))
                self.post(ReifiedEq(i_dir, self.ins[coord], direction))
                self.conv_dir[coord][direction] = c_dir
                self.ins_dir[coord][direction] = i_dir

            self.post(ReifiedGt(is_conv, self.conv[coord], 0))
            self.post(ReifiedGt(is_ins, self.ins[coord], 0))
            self.post(linear([(1, occupied), (-1, is_conv), (-1, is_ins)], "==", 0))
            self.post(ReifiedGt(occupied, route, 0))
            self.post(linear([(1, carry), (-inst.num_items, occupied)], "<=", 0))
            self.post(linear([(1, carry), (-1, occupied)], ">=", 0))

            self.route[coord] = route
            self.carry[coord] = carry
            self.is_conv[coord] = is_conv
            self.is_ins[coord] = is_ins

    def reserved(self) -> None:
        inst = self.inst
        for coord in list(self.sources) + [inst.destination]:
            if coord in self.blocks:
                raise InconsistentInputsError(f"packing covers reserved tile {coord}")
        for coord, source in self.sources.items():
            self.fixed(self.is_conv[coord], 1)
            self.fixed(self.route[coord], 1)
            self.fixed(self.carry[coord], source.item)

        dest = inst.destination
        products = [self.stage1.assembler_recipes[a] for a in self.stage1.active()]
        if delivers_output(inst, products):
            self.fixed(self.is_conv[dest], 1)
            self.fixed(self.carry[dest], inst.out_item)
        else:
            self.fixed(self.is_conv[dest], 0)
        for coord in list(self.sources) + [dest]:
            self.fixed(self.is_ins[coord], 0)

        # nothing picks up from the destination
        for direction in Direction:
            beside = dest.step(direction)
            if self.is_free(beside):
                self.fixed(self.ins_dir[beside][direction], 0)

    def conveyor_rules(self, coord: GridCoord) -> None:
        is_conv = self.is_conv[coord]
        feeders = []
        for direction in Direction:
            behind = coord.step(direction.opposite)
            if self.is_free(behind):
                feeders.append((behind, self.feed(behind, coord)))

        if coord in self.sources:
            for _, fed in feeders:
                self.fixed(fed, 0)
        elif not feeders:
            self.fixed(is_conv, 0)
        else:
            self.post(implication([is_conv], [fed for _, fed in feeders]))
            longest = []
            for behind, fed in feeders:
                gap = [(1, self.route[coord]), (-1, self.route[behind])]
                self.post(linear(gap, ">=", 1, enforce=[fed, is_conv]))
                self.post(
                    linear(
                        [(1, self.carry[coord]), (-1, self.carry[behind])],
                        "==",
                        0,
                        enforce=[fed, is_conv],
                    )
                )
                tight = self.model.add_bool(f"longest{behind}{coord}", decision=False)
                self.post(implication([tight], [fed]))
                self.post(implication([tight], [is_conv]))
                self.post(linear(gap, "==", 1, enforce=[tight]))
                longest.append(tight)
            self.post(implication([is_conv], longest))

        for direction in Direction:
            facing = self.conv_dir[coord][direction]
            ahead = coord.step(direction)
            if coord == self.inst.destination:
                behind = coord.step(direction.opposite)
                if self.is_free(behind):
                    self.post(implication([facing], [self.feed(behind, coord)]))
                else:
                    self.fixed(facing, 0)
                if self.is_free(ahead):
                    self.post(implication([facing], [~self.is_conv[ahead]]))
            elif not self.is_free(ahead):
                self.fixed(facing, 0)
            else:
                self.post(
                    implication(
                        [facing], [self.is_conv[ahead], self.ins_dir[ahead][direction]]
                    )
                )

    def inserter_rules(self, coord: GridCoord) -> None:
        inst = self.inst
        for direction in Direction:
            facing = self.ins_dir[coord][direction]
            pickup = coord.step(direction.opposite)
            drop = coord.step(direction)
            if not pickup.inside(inst.width, inst.height) or not drop.inside(
                inst.width, inst.height
            ):
                self.fixed(facing, 0)
                continue

            if pickup in self.blocks:
                self.post(linear([(1, self.route[coord])], "==", 1, enforce=[facing]))
                self.post(
                    linear(
                        [
                            (1, self.carry[coord]),
                            (-1, self.block_item[self.blocks[pickup]]),
                        ],
                        "==",
                        0,
                        enforce=[facing],
                    )
                )
            else:
                self.post(
                    implication(
                        [facing],
                        [self.is_conv[pickup], self.ins_dir[pickup][direction]],
                    )
                )
                self.post(
                    linear(
                        [(1, self.route[coord]), (-1, self.route[pickup])],
                        "==",
                        1,
                        enforce=[facing],
                    )
                )
                self.post(
                    linear(
                        [(1, self.carry[coord]), (-1, self.carry[pickup])],
                        "==",
                        0,
                        enforce=[facing],
                    )
                )

            if drop not in self.blocks:
                self.post(
                    implication(
                        [facing], [self.is_conv[drop], self.ins_dir[drop][direction]]
                    )
                )
                if pickup not in self.blocks:
                    self.post(
                        implication(
                            [facing, self.is_conv[pickup]], [~self.is_conv[drop]]
                        )
                    )

    def assembler_counts(self) -> None:
        stage1 = self.stage1
        for p in self.anchors:
            outgoing = []
            incoming = []
            for tile, toward in side_tiles(p):
                if not self.is_free(tile):
                    continue
                outgoing.append(self.ins_dir[tile][toward.opposite])
                incoming.append((tile, self.ins_dir[tile][toward]))

            self.post(
                linear(
                    [(1, var) for var in outgoing]
                    + [
                        (-stage1.inserters_out[a], row[p])
                        for a, row in enumerate(self.assign)
                    ],
                    "==",
                    0,
                )
            )
            for item in self.inst.items:
                members = []
                for tile, facing in incoming:
                    carries = self.carries(tile, item)
                    both = self.model.add_bool(f"delivers{tile}[{item}]", False)
                    self.post(implication([both], [facing]))
                    self.post(implication([both], [carries]))
                    self.post(implication([facing, carries], [both]))
                    members.append(both)
                self.post(
                    linear(
                        [(1, var) for var in members]
                        + [
                            (-stage1.inserters_in_for(a, item), row[p])
                            for a, row in enumerate(self.assign)
                        ],
                        "==",
                        0,
                    )
                )


def build_stage3_model(
    inst: ProblemInstance,
    stage1: Stage1Solution,
    packing: PackingLayout,
    conveyor_penalty: int = CONVEYOR_PENALTY,
    inserter_penalty: int = INSERTER_PENALTY,
) -> Stage3Model:
    """Encodes assignment, inserter counts, route and carrying rules"""

    if packing.height != inst.height or packing.width != inst.width:
        raise InconsistentInputsError("packing and instance differ in size")
    if len(packing.anchor_tiles()) != stage1.num_assemblers:
        raise InconsistentInputsError(
            f"packing has {len(packing.anchor_tiles())} anchors for "
            f"{stage1.num_assemblers} assemblers"
        )

    builder = _Stage3Builder(inst, stage1, packing)
    builder.build()

    terms = []
    for coord in builder.free:
        terms.append((conveyor_penalty, builder.is_conv[coord]))
        terms.append((inserter_penalty, builder.is_ins[coord]))

    _LOGGER.debug(
        "Stage 3 model: %sx%s, %s anchors, %s variables, %s constraints",
        inst.width,
        inst.height,
        len(builder.anchors),
        len(builder.model.variables),
        len(builder.model.constraints),
    )
    return Stage3Model(
        inst=inst,
        stage1=stage1,
        anchors=builder.anchors,
        model=builder.model,
        objective=Objective.minimize(terms),
        blocks=builder.blocks,
        conveyors=builder.conv,
        inserters=builder.ins,
        routes=builder.route,
        carrying=builder.carry,
        assign=builder.assign,
    )


def solve_stage3(
    built: Stage3Model,
    time_limit: float = 0.0,
    node_limit: int = 0,
    strategy: str = "automatic",
) -> Optional[LayoutSolution]:
    """Cheapest routed layout for the packing, None when none exists"""

    outcome = built.model.solve(
        SearchConfig(
            objective=built.objective,
            time_limit=time_limit,
            node_limit=node_limit,
            strategy=strategy,
        )
    )
    if outcome.status is Status.UNSAT:
        _LOGGER.info("Stage 3 infeasible for anchors %s", list(map(str, built.anchors)))
        return None
    if outcome.status is Status.LIMIT_REACHED:
        _LOGGER.warning("Stage 3 stopped at its search limit")
        raise SearchLimitError("stage 3")

    values = outcome.assignment
    assignments = tuple(
        next(p for p, var in row.items() if values[var]) for row in built.assign
    )
    products = placements_of(built.stage1, assignments)

    def read(grid: Dict[GridCoord, Var]):
        return lambda c: values[grid[c]] if c in grid else 0

    def carried(coord: GridCoord) -> int:
        if coord in built.blocks:
            return products[built.blocks[coord]]
        return values[built.carrying[coord]]

    inst = built.inst
    layout = LayoutSolution(
        conveyors=make_grid(inst.width, inst.height, read(built.conveyors)),
        inserters=make_grid(inst.width, inst.height, read(built.inserters)),
        routes=make_grid(inst.width, inst.height, read(built.routes)),
        carrying=make_grid(inst.width, inst.height, carried),
        assignments=assignments,
        objective_value=outcome.objective,
    )
    _LOGGER.info("Stage 3 layout found, objective %s", layout.objective_value)
    return layout
