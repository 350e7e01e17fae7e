"""
Blueprint strings: version byte "0" followed by base64 of a zlib compressed
JSON payload, the format the game uses to share blueprints.

Inserters are written facing their pickup tile, the way the game orients
them; conveyors face the way they move items.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import zlib
from typing import Any, Dict, List, Mapping, Optional

from ..constants import (
    ASSEMBLER_ENTITY,
    ASSEMBLER_SIZE,
    BLUEPRINT_GAME_VERSION,
    BLUEPRINT_VERSION_PREFIX,
    CONVEYOR_ENTITY,
    GAME_DIRECTIONS,
    INSERTER_ENTITY,
    default_item_name,
)
from ..domain import Direction, GridCoord, zero_grid
from ..exceptions import BlueprintStringError, UnmappedItemError, UnsupportedEntityError
from ..validator import Blueprint, CellKind

_LOGGER = logging.getLogger(__name__)

_FROM_GAME = {game: Direction(ours) for ours, game in GAME_DIRECTIONS.items()}
_SUPPORTED = (CONVEYOR_ENTITY, INSERTER_ENTITY, ASSEMBLER_ENTITY)
# block centre relative to the anchor tile centre
_BLOCK_OFFSET = (ASSEMBLER_SIZE - 1) / 2


class ItemNames:
    """Item id to recipe name table, `item-<id>` for ids it does not list"""

    def __init__(self, names: Optional[Mapping[int, str]] = None) -> None:
        self._names = dict(names) if names is not None else None
        self._ids = {name: item for item, name in (self._names or {}).items()}

    def name(self, item: int) -> str:
        if self._names is None:
            return default_item_name(item)
        if item not in self._names:
            raise UnmappedItemError(item)
        return self._names[item]

    def item(self, name: str) -> int:
        if self._names is not None:
            if name not in self._ids:
                raise BlueprintStringError(f"recipe {name!r} is not in the item table")
            return self._ids[name]
        prefix, _, number = name.rpartition("-")
        if prefix != "item" or not number.isdigit():
            raise BlueprintStringError(f"recipe {name!r} is not an item-<id> name")
        return int(number)


def _center(coord: GridCoord, offset: float = 0.0) -> Dict[str, float]:
    return {"x": coord.x - 0.5 + offset, "y": coord.y - 0.5 + offset}


def _tile(position: Mapping[str, Any], offset: float = 0.0) -> GridCoord:
    try:
        return GridCoord(
            round(float(position["x"]) + 0.5 - offset),
            round(float(position["y"]) + 0.5 - offset),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise BlueprintStringError(f"bad entity position {position!r}") from error


def blueprint_payload(
    bp: Blueprint, names: Optional[ItemNames] = None
) -> Dict[str, Any]:
    """The JSON object a blueprint string carries"""

    names = names or ItemNames()
    entities: List[Dict[str, Any]] = []

    def add(entity: Dict[str, Any]) -> None:
        entity["entity_number"] = len(entities) + 1
        entities.append(entity)

    for anchor, recipe in bp.placements().items():
        add(
            {
                "name": ASSEMBLER_ENTITY,
                "position": _center(anchor, _BLOCK_OFFSET),
                "recipe": names.name(recipe),
            }
        )
    for coord in bp.coords():
        cell = bp.cell(coord)
        if cell.kind is CellKind.CONVEYOR:
            add(
                {
                    "name": CONVEYOR_ENTITY,
                    "position": _center(coord),
                    "direction": GAME_DIRECTIONS[cell.direction],
                }
            )
        elif cell.kind is CellKind.INSERTER:
            add(
                {
                    "name": INSERTER_ENTITY,
                    "position": _center(coord),
                    "direction": GAME_DIRECTIONS[cell.direction.opposite],
                }
            )

    return {
        "blueprint": {
            "item": "blueprint",
            "label": "blueprint-optimizer",
            "description": str(bp.predicted_rate),
            "snap-to-grid": {"x": bp.width, "y": bp.height},
            "entities": entities,
            "version": BLUEPRINT_GAME_VERSION,
        }
    }


def export_blueprint_string(bp: Blueprint, names: Optional[ItemNames] = None) -> str:
    text = json.dumps(blueprint_payload(bp, names), separators=(",", ":"))
    compressed = zlib.compress(text.encode("utf-8"), 9)
    encoded = BLUEPRINT_VERSION_PREFIX + base64.b64encode(compressed).decode("ascii")
    _LOGGER.debug(
        "Encoded %sx%s blueprint into %s characters", bp.width, bp.height, len(encoded)
    )
    return encoded


def decode_payload(text: str) -> Dict[str, Any]:
    """Undo the string framing, without interpreting the payload"""

    text = text.strip()
    if not text:
        raise BlueprintStringError("empty blueprint string")
    if text[0] != BLUEPRINT_VERSION_PREFIX:
        raise BlueprintStringError(f"unsupported version byte {text[0]!r}")
    try:
        compressed = base64.b64decode(text[1:], validate=True)
    except (binascii.Error, ValueError) as error:
        raise BlueprintStringError("blueprint string is not valid base64") from error
    try:
        payload = zlib.decompress(compressed)
    except zlib.error as error:
        raise BlueprintStringError(
            "blueprint payload is not a deflate stream"
        ) from error
    try:
        document = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as error:
        raise BlueprintStringError("blueprint payload is not JSON") from error
    if not isinstance(document, dict) or not isinstance(
        document.get("blueprint"), dict
    ):
        raise BlueprintStringError("payload holds no blueprint object")
    return document


def _direction(entity: Mapping[str, Any]) -> Direction:
    game = entity.get("direction", 0)
    if game not in _FROM_GAME:
        raise BlueprintStringError(f"direction {game!r} is not one of N, E, S, W")
    return _FROM_GAME[game]


def import_blueprint_string(text: str, names: Optional[ItemNames] = None) -> Blueprint:
    names = names or ItemNames()
    blueprint = decode_payload(text)["blueprint"]
    entities = blueprint.get("entities", [])

    unknown = [e.get("name", "?") for e in entities if e.get("name") not in _SUPPORTED]
    if unknown:
        raise UnsupportedEntityError(unknown)

    size = blueprint.get("snap-to-grid")
    if not isinstance(size, Mapping) or "x" not in size or "y" not in size:
        raise BlueprintStringError("blueprint has no snap-to-grid size")
    width, height = int(size["x"]), int(size["y"])

    conveyors = [list(row) for row in zero_grid(width, height)]
    inserters = [list(row) for row in zero_grid(width, height)]
    placements: Dict[GridCoord, int] = {}
    for entity in entities:
        name = entity["name"]
        if name == ASSEMBLER_ENTITY:
            anchor = _tile(entity.get("position", {}), _BLOCK_OFFSET)
            placements[anchor] = names.item(str(entity.get("recipe", "")))
            continue
        coord = _tile(entity.get("position", {}))
        if not coord.inside(width, height):
            raise BlueprintStringError(f"{name} at {coord} lies outside the blueprint")
        if name == CONVEYOR_ENTITY:
            conveyors[coord.y - 1][coord.x - 1] = int(_direction(entity))
        else:
            inserters[coord.y - 1][coord.x - 1] = int(_direction(entity).opposite)

    try:
        predicted = int(blueprint.get("description", "0"))
    except ValueError:
        predicted = 0
    return Blueprint.from_grids(
        width,
        height,
        tuple(map(tuple, conveyors)),
        tuple(map(tuple, inserters)),
        placements,
        predicted_rate=predicted,
    )
