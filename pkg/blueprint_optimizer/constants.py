""" Constants for the blueprint optimizer. """

# Game throughput, items per minute
INSERTER_RATE = 50
CONVEYOR_CAPACITY = 450

# Footprints
ASSEMBLER_SIZE = 3
INSERTERS_PER_SIDE = 3
MAX_INSERTERS_PER_ASSEMBLER = 4 * INSERTERS_PER_SIDE

# Objective weights
ASSEMBLER_PENALTY = 9
CONVEYOR_PENALTY = 2
INSERTER_PENALTY = 1

# Orchestration
MAX_STAGE1_ATTEMPTS = 64
MAX_STAGE2_ATTEMPTS_PER_STAGE1 = 256

# Packing axis codes
AXIS_NONE = 0
AXIS_HORIZONTAL = 1
AXIS_VERTICAL = 2

# Blueprint string framing
BLUEPRINT_VERSION_PREFIX = "0"
# 1.1.0.0 packed as four 16 bit fields
BLUEPRINT_GAME_VERSION = (1 << 48) | (1 << 32)

CONVEYOR_ENTITY = "transport-belt"
INSERTER_ENTITY = "inserter"
ASSEMBLER_ENTITY = "assembling-machine-1"

# Game directions for 1.1 blueprints, keyed by our direction codes N, S, E, W
GAME_DIRECTIONS = {
    1: 0,
    2: 4,
    3: 2,
    4: 6,
}


def default_item_name(item: int) -> str:
    return f"item-{item}"


# ASCII rendering
EMPTY_GLYPH = "."
CONVEYOR_GLYPHS = {1: "N", 2: "S", 3: "E", 4: "W"}
INSERTER_GLYPHS = {1: "^", 2: "v", 3: ">", 4: "<"}
ASSEMBLER_CORNER_GLYPH = "+"
ASSEMBLER_HORIZONTAL_GLYPH = "-"
ASSEMBLER_VERTICAL_GLYPH = "|"
RECIPE_GLYPHS = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"

# Layout oracle size guard
ORACLE_MAX_TILES = 12
ORACLE_MAX_ITEMS = 2

# Extra rounds the flow fixed point may take beyond one per object
SIMULATION_SLACK_ROUNDS = 8
