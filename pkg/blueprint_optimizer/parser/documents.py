"""
JSON documents for blueprints, stage results and flow reports.

Blueprint files list their objects; assemblers appear once, at their anchor.
Rates are written as exact fractions in text form ("25/2").
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Dict, List, Mapping

from ..domain import Direction, Grid, GridCoord, zero_grid
from ..exceptions import DocumentError, InstanceError
from ..stage1 import Stage1Solution
from ..stage2 import PackingLayout
from ..stage3 import LayoutSolution
from ..validator import Blueprint, CellKind, FlowReport
from .instance import instance_from_document, instance_to_document


def to_json(document: Mapping[str, Any]) -> str:
    """Canonical text: sorted keys, two space indent, trailing newline"""
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def _load(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as error:
        raise DocumentError(
            f"{what} is not JSON: {error.msg} "
            f"(line {error.lineno}, column {error.colno})"
        ) from error


def _coord_document(coord: GridCoord) -> Dict[str, int]:
    return {"x": coord.x, "y": coord.y}


def _coord(value: Any) -> GridCoord:
    try:
        return GridCoord(int(value["x"]), int(value["y"]))
    except (KeyError, TypeError, ValueError) as error:
        raise DocumentError(f"bad coordinate {value!r}") from error


def _grid_document(grid: Grid) -> List[List[int]]:
    return [list(row) for row in grid]


def _grid(rows: Any, name: str) -> Grid:
    if not isinstance(rows, list) or not all(isinstance(row, list) for row in rows):
        raise DocumentError(f"field '{name}' must be a list of rows")
    return tuple(tuple(int(value) for value in row) for row in rows)


# Blueprints


def blueprint_to_document(bp: Blueprint) -> Dict[str, Any]:
    objects: List[Dict[str, Any]] = []
    for anchor, recipe in bp.placements().items():
        objects.append(
            {"kind": "assembler", "x": anchor.x, "y": anchor.y, "recipe": recipe}
        )
    for coord in bp.coords():
        cell = bp.cell(coord)
        if cell.kind in (CellKind.CONVEYOR, CellKind.INSERTER):
            objects.append(
                {
                    "kind": cell.kind.value,
                    "x": coord.x,
                    "y": coord.y,
                    "direction": cell.direction.letter,
                }
            )
    document: Dict[str, Any] = {
        "width": bp.width,
        "height": bp.height,
        "predicted_rate": bp.predicted_rate,
        "objects": objects,
    }
    if bp.instance is not None:
        document["instance"] = instance_to_document(bp.instance)
    return document


def blueprint_from_document(document: Any) -> Blueprint:
    if not isinstance(document, Mapping):
        raise DocumentError("blueprint document must be a JSON object")
    for name in ("width", "height", "objects"):
        if name not in document:
            raise DocumentError(f"blueprint is missing required field '{name}'")

    width, height = int(document["width"]), int(document["height"])
    conveyors = [list(row) for row in zero_grid(width, height)]
    inserters = [list(row) for row in zero_grid(width, height)]
    placements: Dict[GridCoord, int] = {}
    for index, raw in enumerate(document["objects"]):
        coord = _coord(raw)
        kind = raw.get("kind")
        if kind == "assembler":
            placements[coord] = int(raw.get("recipe", 0))
            continue
        if kind not in ("conveyor", "inserter"):
            raise DocumentError(f"objects[{index}] has unknown kind {kind!r}")
        if not coord.inside(width, height):
            raise DocumentError(
                f"objects[{index}] at {coord} lies outside the blueprint"
            )
        try:
            direction = Direction.from_letter(str(raw.get("direction", "")))
        except ValueError as error:
            raise DocumentError(f"objects[{index}]: {error}") from error
        target = conveyors if kind == "conveyor" else inserters
        target[coord.y - 1][coord.x - 1] = int(direction)

    instance = None
    if document.get("instance") is not None:
        try:
            instance = instance_from_document(document["instance"])
        except InstanceError as error:
            raise DocumentError(f"embedded instance: {error}") from error

    return Blueprint.from_grids(
        width,
        height,
        tuple(map(tuple, conveyors)),
        tuple(map(tuple, inserters)),
        placements,
        predicted_rate=int(document.get("predicted_rate", 0)),
        instance=instance,
    )


def parse_blueprint(text: str) -> Blueprint:
    return blueprint_from_document(_load(text, "blueprint file"))


def dump_blueprint(bp: Blueprint) -> str:
    return to_json(blueprint_to_document(bp))


# Stage results


def stage1_to_document(sol: Stage1Solution) -> Dict[str, Any]:
    return {
        "num_assemblers": sol.num_assemblers,
        "assembler_recipes": list(sol.assembler_recipes),
        "assembler_rates": list(sol.assembler_rates),
        "inserters_in": [list(row) for row in sol.inserters_in],
        "inserters_out": list(sol.inserters_out),
        "consuming": [list(row) for row in sol.consuming],
        "objective_value": sol.objective_value,
    }


def stage1_from_document(document: Mapping[str, Any]) -> Stage1Solution:
    try:
        return Stage1Solution(
            num_assemblers=int(document["num_assemblers"]),
            assembler_recipes=tuple(document["assembler_recipes"]),
            assembler_rates=tuple(document["assembler_rates"]),
            inserters_in=tuple(tuple(row) for row in document["inserters_in"]),
            inserters_out=tuple(document["inserters_out"]),
            consuming=tuple(tuple(row) for row in document["consuming"]),
            objective_value=int(document["objective_value"]),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise DocumentError(f"bad stage 1 document: {error}") from error


def packing_to_document(layout: PackingLayout) -> Dict[str, Any]:
    return {
        "assembler_layout": _grid_document(layout.assembler_layout),
        "inserter_layout": _grid_document(layout.inserter_layout),
        "anchors": [_coord_document(anchor) for anchor in layout.anchors],
        "positions": [
            [_coord_document(c) for c in tiles] for tiles in layout.positions
        ],
    }


def packing_from_document(document: Mapping[str, Any]) -> PackingLayout:
    try:
        return PackingLayout(
            assembler_layout=_grid(document["assembler_layout"], "assembler_layout"),
            inserter_layout=_grid(document["inserter_layout"], "inserter_layout"),
            anchors=tuple(_coord(c) for c in document["anchors"]),
            positions=tuple(
                tuple(_coord(c) for c in tiles) for tiles in document["positions"]
            ),
        )
    except KeyError as error:
        raise DocumentError(f"packing document is missing {error}") from error


def layout_to_document(layout: LayoutSolution) -> Dict[str, Any]:
    return {
        "conveyors": _grid_document(layout.conveyors),
        "inserters": _grid_document(layout.inserters),
        "routes": _grid_document(layout.routes),
        "carrying": _grid_document(layout.carrying),
        "assignments": [_coord_document(anchor) for anchor in layout.assignments],
        "objective_value": layout.objective_value,
    }


def layout_from_document(document: Mapping[str, Any]) -> LayoutSolution:
    try:
        return LayoutSolution(
            conveyors=_grid(document["conveyors"], "conveyors"),
            inserters=_grid(document["inserters"], "inserters"),
            routes=_grid(document["routes"], "routes"),
            carrying=_grid(document["carrying"], "carrying"),
            assignments=tuple(_coord(c) for c in document["assignments"]),
            objective_value=int(document["objective_value"]),
        )
    except KeyError as error:
        raise DocumentError(f"layout document is missing {error}") from error


# Flow reports


def _rates(rates: Mapping[GridCoord, Fraction]) -> List[Dict[str, Any]]:
    return [
        {"x": coord.x, "y": coord.y, "rate": str(rate)}
        for coord, rate in sorted(rates.items())
    ]


def flow_report_to_document(report: FlowReport) -> Dict[str, Any]:
    return {
        "delivered_rate": str(report.delivered_rate),
        "tiles": _rates(report.tile_rates),
        "assemblers": [
            {
                "x": anchor.x,
                "y": anchor.y,
                "rate": str(rate),
                "utilization": str(report.utilization[anchor]),
            }
            for anchor, rate in sorted(report.assembler_rates.items())
        ],
        "starved": [_coord_document(c) for c in report.starved],
        "rounds": report.rounds,
    }
