""" Instance documents: JSON text in, ProblemInstance out and back. """

from __future__ import annotations

import json
from typing import Any, Dict, List, Mapping

from ..constants import CONVEYOR_CAPACITY, INSERTER_RATE
from ..domain import GridCoord, ProblemInstance, Recipe, Source
from ..exceptions import InstanceError, InstanceSyntaxError

_REQUIRED = ("width", "height", "num_items", "out_item", "sources", "destination")


def _field(document: Mapping[str, Any], name: str, where: str = "instance") -> Any:
    if name not in document:
        raise InstanceError(f"{where} is missing required field '{name}'")
    return document[name]


def _integer(value: Any, name: str) -> int:
    # bool is an int subclass, reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceError(f"field '{name}' must be an integer, got {value!r}")
    return value


def _coord(value: Any, name: str) -> GridCoord:
    if not isinstance(value, Mapping):
        raise InstanceError(f"field '{name}' must be an object with x and y")
    return GridCoord(
        _integer(_field(value, "x", name), f"{name}.x"),
        _integer(_field(value, "y", name), f"{name}.y"),
    )


def _list(value: Any, name: str) -> List[Any]:
    if not isinstance(value, list):
        raise InstanceError(f"field '{name}' must be a list")
    return value


def _entry(value: Any, where: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise InstanceError(f"{where} must be an object")
    return value


def _check_item(item: int, num_items: int) -> int:
    if not 1 <= item <= num_items:
        raise InstanceError(f"unknown item id {item} (items are 1..{num_items})")
    return item


def instance_from_document(document: Any) -> ProblemInstance:
    """Builds an instance from an already decoded JSON object"""

    if not isinstance(document, Mapping):
        raise InstanceError("instance document must be a JSON object")

    for name in _REQUIRED:
        _field(document, name)
    # recipes are required too, checked separately so the message names them
    raw_recipes = _field(document, "recipes")

    num_items = _integer(document["num_items"], "num_items")

    sources: List[Source] = []
    for index, raw in enumerate(_list(document["sources"], "sources")):
        where = f"sources[{index}]"
        raw = _entry(raw, where)
        sources.append(
            Source(
                coord=_coord(raw, where),
                item=_check_item(
                    _integer(_field(raw, "item", where), f"{where}.item"), num_items
                ),
                rate=_integer(_field(raw, "rate", where), f"{where}.rate"),
            )
        )

    recipes: List[Recipe] = []
    products = set()
    for index, raw in enumerate(_list(raw_recipes, "recipes")):
        where = f"recipes[{index}]"
        raw = _entry(raw, where)
        product = _check_item(
            _integer(_field(raw, "product", where), f"{where}.product"), num_items
        )
        if product in products:
            raise InstanceError(f"duplicate recipe for item {product}")
        products.add(product)

        raw_ingredients = _field(raw, "ingredients", where)
        if not isinstance(raw_ingredients, Mapping):
            raise InstanceError(f"field '{where}.ingredients' must be an object")
        ingredients: Dict[int, int] = {}
        for key, qty in raw_ingredients.items():
            try:
                item = int(key)
            except ValueError as error:
                raise InstanceError(
                    f"ingredient key {key!r} in {where} is not an item id"
                ) from error
            ingredients[_check_item(item, num_items)] = _integer(
                qty, f"{where}.ingredients.{key}"
            )

        recipes.append(
            Recipe.build(
                product=product,
                ingredients=ingredients,
                qty_produced=_integer(
                    raw.get("qty_produced", 1), f"{where}.qty_produced"
                ),
                rate=_integer(_field(raw, "rate", where), f"{where}.rate"),
            )
        )

    return ProblemInstance(
        width=_integer(document["width"], "width"),
        height=_integer(document["height"], "height"),
        num_items=num_items,
        out_item=_check_item(_integer(document["out_item"], "out_item"), num_items),
        sources=tuple(sources),
        destination=_coord(document["destination"], "destination"),
        recipes=tuple(recipes),
        inserter_rate=_integer(
            document.get("inserter_rate", INSERTER_RATE), "inserter_rate"
        ),
        conveyor_capacity=_integer(
            document.get("conveyor_capacity", CONVEYOR_CAPACITY), "conveyor_capacity"
        ),
    )


def parse_instance(text: str) -> ProblemInstance:
    """Parses an instance document"""

    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise InstanceSyntaxError(error.msg, error.lineno, error.colno) from error
    return instance_from_document(document)


def instance_to_document(inst: ProblemInstance) -> Dict[str, Any]:
    return {
        "width": inst.width,
        "height": inst.height,
        "num_items": inst.num_items,
        "out_item": inst.out_item,
        "inserter_rate": inst.inserter_rate,
        "conveyor_capacity": inst.conveyor_capacity,
        "sources": [
            {"x": s.coord.x, "y": s.coord.y, "item": s.item, "rate": s.rate}
            for s in inst.sources
        ],
        "destination": {"x": inst.destination.x, "y": inst.destination.y},
        "recipes": [
            {
                "product": r.product,
                "qty_produced": r.qty_produced,
                "rate": r.rate,
                "ingredients": {str(item): qty for item, qty in r.ingredients},
            }
            for r in inst.recipes
        ],
    }


def dump_instance(inst: ProblemInstance) -> str:
    return json.dumps(instance_to_document(inst), indent=2) + "\n"
