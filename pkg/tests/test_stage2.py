import pytest

from blueprint_optimizer.constants import AXIS_HORIZONTAL, AXIS_VERTICAL
from blueprint_optimizer.domain import (
    GridCoord,
    block_tiles,
    candidate_anchors,
    grid_value,
    side_tiles,
)
from blueprint_optimizer.exceptions import InconsistentInputsError, LedgerError
from blueprint_optimizer.parser.instance import instance_from_document
from blueprint_optimizer.stage2 import (
    Stage2Ledger,
    build_stage2_model,
    record_packing,
    solve_stage2,
)
from tests.constants import EIGHT_BY_EIGHT, RATIO_ONE_TO_ONE, TWO_ASSEMBLER_CHAIN


def _packings(inst, totals):
    """Every packing Stage 2 hands out, in order"""
    ledger = Stage2Ledger()
    found = []
    while True:
        built = build_stage2_model(
            inst.width, inst.height, inst.reserved, len(totals), totals, ledger
        )
        layout = solve_stage2(built)
        if layout is None:
            return found
        found.append(layout)
        ledger = record_packing(ledger, layout)


def _free_sides(inst, anchor):
    return [
        tile
        for tile, _ in side_tiles(anchor)
        if tile.inside(inst.width, inst.height) and not grid_value(inst.reserved, tile)
    ]


class TestSolveStage2:
    def test_each_packing_handed_out_once(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        layouts = _packings(inst, [2])
        assert len(layouts) == 2
        assert {layout.anchors for layout in layouts} == {
            (GridCoord(1, 2),),
            (GridCoord(1, 1),),
        }

    def test_inserter_slots(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        layout = _packings(inst, [2])[0]
        slots = layout.positions[0]
        assert len(slots) == 2
        assert set(slots) <= set(_free_sides(inst, GridCoord(1, 2)))
        for tile in slots:
            assert grid_value(layout.inserter_layout, tile) == AXIS_VERTICAL
        assert sum(cell > 0 for row in layout.inserter_layout for cell in row) == 2

    def test_horizontal_slots(self):
        inst = instance_from_document(TWO_ASSEMBLER_CHAIN)
        layout = _packings(inst, [12])[0]
        anchor = layout.anchors[0]
        for tile in layout.positions[0]:
            beside = tile.y in range(anchor.y, anchor.y + 3)
            expected = AXIS_HORIZONTAL if beside else AXIS_VERTICAL
            assert grid_value(layout.inserter_layout, tile) == expected

    def test_assembler_layout_marks_anchors_only(self):
        inst = instance_from_document(TWO_ASSEMBLER_CHAIN)
        layout = _packings(inst, [3])[0]
        assert layout.anchor_tiles() == list(layout.anchors)
        assert sum(layout.flatten()) == 1

    def test_no_room(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        assert _packings(inst, [5]) == []

    def test_single_assembler_matches_enumeration(self):
        inst = instance_from_document(TWO_ASSEMBLER_CHAIN)
        for need in (2, 6, 12):
            expected = {
                anchor
                for anchor in candidate_anchors(inst.width, inst.height, inst.reserved)
                if len(_free_sides(inst, anchor)) >= need
            }
            found = [layout.anchors[0] for layout in _packings(inst, [need])]
            assert len(found) == len(set(found))
            assert set(found) == expected

    @pytest.mark.slow
    def test_two_assemblers_never_overlap(self):
        inst = instance_from_document(EIGHT_BY_EIGHT)
        layouts = _packings(inst, [3, 4])
        assert layouts
        assert len({layout.flatten() for layout in layouts}) == len(layouts)
        for layout in layouts:
            first, second = layout.anchors
            assert not set(block_tiles(first)) & set(block_tiles(second))
            assert [len(p) for p in layout.positions] == [3, 4]
            claimed = [tile for tiles in layout.positions for tile in tiles]
            assert len(claimed) == len(set(claimed))


class TestStage2Inputs:
    def test_totals_must_match_count(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        with pytest.raises(InconsistentInputsError):
            build_stage2_model(inst.width, inst.height, inst.reserved, 2, [2])

    def test_ledger_of_another_grid(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        ledger = Stage2Ledger(((0, 0, 0),))
        with pytest.raises(InconsistentInputsError):
            build_stage2_model(inst.width, inst.height, inst.reserved, 1, [2], ledger)

    def test_duplicate_record(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        layout = _packings(inst, [2])[0]
        ledger = record_packing(Stage2Ledger(), layout)
        with pytest.raises(LedgerError):
            record_packing(ledger, layout)
