import pytest

from blueprint_optimizer.domain import (
    Direction,
    GridCoord,
    block_tiles,
    candidate_anchors,
    derive_bounds,
    side_tiles,
    validate_instance,
)
from blueprint_optimizer.exceptions import InstanceError
from blueprint_optimizer.parser.instance import instance_from_document
from tests.constants import ONE_OF_TWO, STRIP_1X3, TWO_ASSEMBLER_CHAIN


def _document(**changes):
    document = dict(TWO_ASSEMBLER_CHAIN)
    document.update(changes)
    return document


class TestDirection:
    def test_opposites_pair_up(self):
        for direction in Direction:
            assert direction.opposite.opposite is direction
            assert direction.dx == -direction.opposite.dx
            assert direction.dy == -direction.opposite.dy

    def test_south_grows_y(self):
        assert GridCoord(2, 2).step(Direction.SOUTH) == GridCoord(2, 3)
        assert GridCoord(2, 2).step(Direction.WEST) == GridCoord(1, 2)

    def test_letters(self):
        assert Direction.from_letter("e") is Direction.EAST
        with pytest.raises(ValueError):
            Direction.from_letter("X")


class TestValidateInstance:
    def test_case_study_is_valid(self):
        assert validate_instance(instance_from_document(TWO_ASSEMBLER_CHAIN)) == []

    def test_source_on_destination(self):
        inst = instance_from_document(_document(destination={"x": 1, "y": 6}))
        assert "source overlaps destination" in validate_instance(inst)

    def test_unproducible_output(self):
        inst = instance_from_document(
            _document(recipes=[{"product": 3, "ingredients": {"2": 1}, "rate": 50}])
        )
        assert "out_item unproducible" in validate_instance(inst)

    def test_recipe_cycle(self):
        inst = instance_from_document(
            _document(
                recipes=[
                    {"product": 2, "ingredients": {"3": 1}, "rate": 50},
                    {"product": 3, "ingredients": {"2": 1}, "rate": 50},
                ]
            )
        )
        assert any("recipe cycle" in v for v in validate_instance(inst))

    def test_source_outside_grid(self):
        inst = instance_from_document(
            _document(sources=[{"x": 7, "y": 6, "item": 1, "rate": 10}])
        )
        assert "source (7,6) outside the grid" in validate_instance(inst)

    def test_reports_every_problem(self):
        inst = instance_from_document(
            _document(width=0, destination={"x": 1, "y": 6}, inserter_rate=0)
        )
        violations = validate_instance(inst)
        assert len(violations) >= 3


class TestInstanceHelpers:
    def test_supply_aggregates_sources(self):
        inst = instance_from_document(
            _document(
                sources=[
                    {"x": 1, "y": 6, "item": 1, "rate": 30},
                    {"x": 2, "y": 6, "item": 1, "rate": 20},
                ]
            )
        )
        assert inst.supply(1) == 50
        assert inst.supply(2) == 0

    def test_reserved_marks_sources_and_destination(self):
        inst = instance_from_document(STRIP_1X3)
        assert inst.reserved == ((1, 0, 1),)

    def test_max_route(self):
        assert instance_from_document(TWO_ASSEMBLER_CHAIN).max_route == 12


class TestBounds:
    def test_case_study_bounds(self):
        bounds = derive_bounds(instance_from_document(TWO_ASSEMBLER_CHAIN))
        assert bounds.max_assemblers == 4
        assert bounds.max_rate == 50
        assert bounds.max_consumption == 50
        assert bounds.max_inserters_in == 1
        assert bounds.max_inserters_out == 1

    def test_inserters_cover_the_consumption(self):
        inst = instance_from_document(
            _document(
                recipes=[
                    {
                        "product": 2,
                        "ingredients": {"1": 12},
                        "qty_produced": 5,
                        "rate": 50,
                    },
                    {"product": 3, "ingredients": {"1": 1, "2": 1}, "rate": 50},
                ]
            )
        )
        bounds = derive_bounds(inst)
        assert bounds.max_consumption == 120
        assert bounds.max_inserters_in == 3

    def test_narrow_grid_holds_one_column(self):
        assert derive_bounds(instance_from_document(ONE_OF_TWO)).max_assemblers == 2

    def test_empty_recipe_book(self):
        with pytest.raises(InstanceError):
            derive_bounds(instance_from_document(STRIP_1X3))


class TestGeometry:
    def test_block_is_three_by_three(self):
        tiles = block_tiles(GridCoord(2, 3))
        assert len(tiles) == 9
        assert tiles[0] == GridCoord(2, 3)
        assert tiles[-1] == GridCoord(4, 5)

    def test_side_tiles_point_into_block(self):
        anchor = GridCoord(2, 2)
        block = set(block_tiles(anchor))
        sides = side_tiles(anchor)
        assert len(sides) == 12
        for tile, toward in sides:
            assert tile not in block
            assert tile.step(toward) in block

    def test_candidate_anchors_avoid_reserved(self):
        inst = instance_from_document(ONE_OF_TWO)
        anchors = candidate_anchors(inst.width, inst.height, inst.reserved)
        assert GridCoord(1, 1) not in anchors
        assert GridCoord(3, 1) not in anchors
        assert GridCoord(2, 1) in anchors
        assert anchors == sorted(anchors, key=lambda c: (c.y, c.x))
