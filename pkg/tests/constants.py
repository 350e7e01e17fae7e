"""Shared instances and hand-built grids used across the test modules."""

from typing import Tuple

# Direction rows use N/S/E/W, anything else is an empty tile.
_CODES = {"N": 1, "S": 2, "E": 3, "W": 4}


def direction_grid(*rows: str) -> Tuple[Tuple[int, ...], ...]:
    return tuple(tuple(_CODES.get(ch, 0) for ch in row) for row in rows)


def number_grid(*rows: str) -> Tuple[Tuple[int, ...], ...]:
    """Digits per tile, '.' is 0"""
    return tuple(tuple(0 if ch == "." else int(ch) for ch in row) for row in rows)


# Two item-1 sources merging into one destination on a 3x3 grid
TWO_SOURCE_ROUTING = {
    "width": 3,
    "height": 3,
    "num_items": 1,
    "out_item": 1,
    "sources": [
        {"x": 2, "y": 1, "item": 1, "rate": 50},
        {"x": 1, "y": 3, "item": 1, "rate": 50},
    ],
    "destination": {"x": 3, "y": 2},
    "recipes": [],
}
TWO_SOURCE_CONVEYORS = direction_grid(".S.", "EEE", "N..")
TWO_SOURCE_INSERTERS = direction_grid("...", "...", "...")
TWO_SOURCE_ROUTES = number_grid(".1.", "234", "1..")
TWO_SOURCE_CARRYING = number_grid(".1.", "111", "1..")
TWO_SOURCE_OBJECTIVE = 10

STRIP_1X3 = {
    "width": 3,
    "height": 1,
    "num_items": 1,
    "out_item": 1,
    "sources": [{"x": 1, "y": 1, "item": 1, "rate": 50}],
    "destination": {"x": 3, "y": 1},
    "recipes": [],
}

STRIP_1X2 = {
    "width": 2,
    "height": 1,
    "num_items": 1,
    "out_item": 1,
    "sources": [{"x": 1, "y": 1, "item": 1, "rate": 50}],
    "destination": {"x": 2, "y": 1},
    "recipes": [],
}

# The source carries item 2 but only item 1 is wanted at the destination
MISMATCHED_STRIP = {
    "width": 2,
    "height": 1,
    "num_items": 2,
    "out_item": 1,
    "sources": [{"x": 1, "y": 1, "item": 2, "rate": 50}],
    "destination": {"x": 2, "y": 1},
    "recipes": [{"product": 1, "ingredients": {"2": 1}, "rate": 50}],
}

# Two assemblers on 6x6: item 1 -> item 2, then items 1 and 2 -> item 3
TWO_ASSEMBLER_CHAIN = {
    "width": 6,
    "height": 6,
    "num_items": 3,
    "out_item": 3,
    "sources": [{"x": 1, "y": 6, "item": 1, "rate": 200}],
    "destination": {"x": 6, "y": 6},
    "recipes": [
        {"product": 2, "ingredients": {"1": 1}, "rate": 50},
        {"product": 3, "ingredients": {"1": 1, "2": 1}, "rate": 50},
    ],
}
CHAIN_PLACEMENTS = {(1, 1): 2, (4, 1): 3}
CHAIN_CONVEYORS = direction_grid(
    "......",
    "......",
    "......",
    "......",
    "..ENNS",
    "EEEENS",
)
CHAIN_INSERTERS = direction_grid(
    "......",
    "......",
    "......",
    "N.SNNS",
    "N.....",
    "......",
)
CHAIN_ROUTES = number_grid(
    "......",
    "......",
    "......",
    "3.1471",
    "2.2362",
    "123453",
)
CHAIN_CARRYING = number_grid(
    "222333",
    "222333",
    "222333",
    "1.2213",
    "1.2213",
    "111113",
)
CHAIN_OBJECTIVE = 26


def ratio_instance(ingredients, qty_produced, rate):
    """3x5 single assembler instance, source bottom-left, destination bottom-right"""
    return {
        "width": 3,
        "height": 5,
        "num_items": 2,
        "out_item": 2,
        "inserter_rate": 50,
        "sources": [{"x": 1, "y": 5, "item": 1, "rate": 400}],
        "destination": {"x": 3, "y": 5},
        "recipes": [
            {
                "product": 2,
                "ingredients": ingredients,
                "qty_produced": qty_produced,
                "rate": rate,
            }
        ],
    }


RATIO_ONE_TO_ONE = ratio_instance({"1": 1}, 1, 50)
RATIO_TWO_TO_ONE = ratio_instance({"1": 2}, 1, 50)
RATIO_ONE_TO_TWO = ratio_instance({"1": 1}, 2, 100)

# Room for two assemblers, yet only one can be wired up
ONE_OF_TWO = {
    "width": 5,
    "height": 6,
    "num_items": 2,
    "out_item": 2,
    "sources": [{"x": 1, "y": 1, "item": 1, "rate": 200}],
    "destination": {"x": 5, "y": 1},
    "recipes": [{"product": 2, "ingredients": {"1": 2}, "rate": 50}],
}

# Item 2 runs along the bottom row past two assemblers that both need it
SHARED_INPUT = {
    "width": 6,
    "height": 7,
    "num_items": 2,
    "out_item": 1,
    "sources": [{"x": 1, "y": 7, "item": 2, "rate": 50}],
    "destination": {"x": 6, "y": 1},
    "recipes": [{"product": 1, "ingredients": {"2": 1}, "rate": 50}],
}
SHARED_INPUT_PLACEMENTS = {(1, 3): 1, (4, 3): 1}
SHARED_INPUT_CONVEYORS = direction_grid(
    "..EEEE",
    "......",
    "......",
    "......",
    "......",
    "......",
    "EEEN..",
)
SHARED_INPUT_INSERTERS = direction_grid(
    "......",
    "..N..N",
    "......",
    "......",
    "......",
    "N..N..",
    "......",
)
SHARED_INPUT_PREDICTED = 100

# Two ingredients from opposite corners, in the style of the larger case studies
EIGHT_BY_EIGHT = {
    "width": 8,
    "height": 8,
    "num_items": 3,
    "out_item": 3,
    "sources": [
        {"x": 1, "y": 8, "item": 1, "rate": 100},
        {"x": 8, "y": 8, "item": 2, "rate": 100},
    ],
    "destination": {"x": 8, "y": 1},
    "recipes": [{"product": 3, "ingredients": {"1": 1, "2": 1}, "rate": 50}],
}


def five_by_eight(item_2_x, item_2_rate=100):
    """
    Two recipes sharing item 2 on a 5x8 grid.

    Item 1 enters bottom-left and item 2 at (item_2_x, 8). The bottom
    assembler turns 2 item 1 and 1 item 2 into item 3, the top one turns
    items 2 and 3 into item 4.
    """
    return {
        "width": 5,
        "height": 8,
        "num_items": 4,
        "out_item": 4,
        "sources": [
            {"x": 1, "y": 8, "item": 1, "rate": 100},
            {"x": item_2_x, "y": 8, "item": 2, "rate": item_2_rate},
        ],
        "destination": {"x": 5, "y": 8},
        "recipes": [
            {"product": 3, "ingredients": {"1": 2, "2": 1}, "rate": 50},
            {"product": 4, "ingredients": {"2": 1, "3": 1}, "rate": 50},
        ],
    }


FIVE_BY_EIGHT_PLACEMENTS = {(1, 4): 3, (3, 1): 4}
FIVE_BY_EIGHT_PREDICTED = 50
_FIVE_BY_EIGHT_TOP_CONVEYORS = ("E....", "NW...", ".....", ".....")
_FIVE_BY_EIGHT_TOP_INSERTERS = (".E...", ".....", ".N...", "...NS")

# Item 2 one tile right of item 1: only one item 1 inserter fits
ADJACENT_SOURCES_CONVEYORS = direction_grid(
    *_FIVE_BY_EIGHT_TOP_CONVEYORS, "...NS", "...NS", "...NS", "NEENS"
)
ADJACENT_SOURCES_INSERTERS = direction_grid(
    *_FIVE_BY_EIGHT_TOP_INSERTERS, ".....", ".....", "NN...", "....."
)

# Item 2 two tiles right: the bottom assembler gets its 2:1 inputs
SPREAD_SOURCES_CONVEYORS = direction_grid(
    *_FIVE_BY_EIGHT_TOP_CONVEYORS, "...NS", "...NS", "...NS", "ENENS"
)
SPREAD_SOURCES_INSERTERS = direction_grid(
    *_FIVE_BY_EIGHT_TOP_INSERTERS, ".....", ".....", "NNN..", "....."
)

# Stage 1 answer for both variants: bottom assembler 2:1 in, top one 1:1 in
FIVE_BY_EIGHT_STAGE1 = {
    "num_assemblers": 2,
    "assembler_recipes": (3, 4),
    "assembler_rates": (50, 50),
    "inserters_in": ((2, 1, 0, 0), (0, 1, 1, 0)),
    "inserters_out": (1, 1),
    "consuming": ((100, 50, 0, 0), (0, 50, 50, 0)),
    "objective_value": 0,
}
