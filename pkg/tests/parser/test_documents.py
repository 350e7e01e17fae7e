from fractions import Fraction

import pytest

from blueprint_optimizer.domain import GridCoord
from blueprint_optimizer.exceptions import DocumentError
from blueprint_optimizer.parser.documents import (
    blueprint_from_document,
    blueprint_to_document,
    dump_blueprint,
    flow_report_to_document,
    layout_from_document,
    layout_to_document,
    packing_from_document,
    packing_to_document,
    parse_blueprint,
    stage1_from_document,
    stage1_to_document,
    to_json,
)
from blueprint_optimizer.parser.instance import instance_from_document
from blueprint_optimizer.stage1 import Stage1Solution
from blueprint_optimizer.stage2 import PackingLayout
from blueprint_optimizer.stage3 import LayoutSolution
from blueprint_optimizer.validator import Blueprint, FlowReport, simulate_flow
from tests.constants import (
    CHAIN_CARRYING,
    CHAIN_CONVEYORS,
    CHAIN_INSERTERS,
    CHAIN_PLACEMENTS,
    CHAIN_ROUTES,
    TWO_ASSEMBLER_CHAIN,
)


def _chain():
    inst = instance_from_document(TWO_ASSEMBLER_CHAIN)
    placements = {GridCoord(x, y): p for (x, y), p in CHAIN_PLACEMENTS.items()}
    return Blueprint.from_grids(
        6, 6, CHAIN_CONVEYORS, CHAIN_INSERTERS, placements, 50, inst
    )


class TestBlueprintDocuments:
    def test_objects(self):
        document = blueprint_to_document(_chain())
        kinds = [o["kind"] for o in document["objects"]]
        assert kinds.count("assembler") == 2
        assert kinds.count("conveyor") == 10
        assert kinds.count("inserter") == 6
        first = document["objects"][0]
        assert first == {"kind": "assembler", "x": 1, "y": 1, "recipe": 2}
        assert document["instance"]["width"] == 6

    def test_file_keeps_the_instance(self):
        bp = parse_blueprint(dump_blueprint(_chain()))
        assert bp == _chain()
        assert bp.instance == _chain().instance

    def test_canonical_text(self):
        assert to_json({"b": 1, "a": [1]}) == '{\n  "a": [\n    1\n  ],\n  "b": 1\n}\n'

    def test_not_json(self):
        with pytest.raises(DocumentError, match="blueprint file is not JSON"):
            parse_blueprint("{")

    def test_missing_field(self):
        with pytest.raises(DocumentError, match="missing required field 'objects'"):
            blueprint_from_document({"width": 2, "height": 2})

    def test_unknown_kind(self):
        document = {
            "width": 2,
            "height": 2,
            "objects": [{"kind": "splitter", "x": 1, "y": 1}],
        }
        with pytest.raises(DocumentError, match="unknown kind 'splitter'"):
            blueprint_from_document(document)

    def test_outside(self):
        document = {
            "width": 2,
            "height": 2,
            "objects": [{"kind": "conveyor", "x": 3, "y": 1, "direction": "E"}],
        }
        with pytest.raises(DocumentError, match="lies outside the blueprint"):
            blueprint_from_document(document)

    def test_bad_direction(self):
        document = {
            "width": 2,
            "height": 2,
            "objects": [{"kind": "inserter", "x": 1, "y": 1, "direction": "Q"}],
        }
        with pytest.raises(DocumentError):
            blueprint_from_document(document)

    def test_bad_embedded_instance(self):
        document = blueprint_to_document(_chain())
        del document["instance"]["sources"]
        with pytest.raises(DocumentError, match="embedded instance"):
            blueprint_from_document(document)


class TestStageDocuments:
    def test_stage1(self):
        solution = Stage1Solution(
            num_assemblers=1,
            assembler_recipes=(2, 0),
            assembler_rates=(50, 0),
            inserters_in=((1, 0), (0, 0)),
            inserters_out=(1, 0),
            consuming=((50, 0), (0, 0)),
            objective_value=39,
        )
        assert stage1_from_document(stage1_to_document(solution)) == solution

    def test_stage1_missing_field(self):
        with pytest.raises(DocumentError, match="bad stage 1 document"):
            stage1_from_document({"num_assemblers": 1})

    def test_packing(self):
        layout = PackingLayout(
            assembler_layout=((1, 0, 0), (0, 0, 0)),
            inserter_layout=((0, 0, 0), (0, 0, 2)),
            anchors=(GridCoord(1, 1),),
            positions=((GridCoord(3, 2),),),
        )
        document = packing_to_document(layout)
        assert document["anchors"] == [{"x": 1, "y": 1}]
        assert packing_from_document(document) == layout

    def test_layout(self):
        layout = LayoutSolution(
            conveyors=CHAIN_CONVEYORS,
            inserters=CHAIN_INSERTERS,
            routes=CHAIN_ROUTES,
            carrying=CHAIN_CARRYING,
            assignments=(GridCoord(1, 1), GridCoord(4, 1)),
            objective_value=26,
        )
        assert layout_from_document(layout_to_document(layout)) == layout

    def test_layout_missing_grid(self):
        with pytest.raises(DocumentError, match="layout document is missing"):
            layout_from_document({"conveyors": [[0]]})


class TestFlowReportDocument:
    def test_rates_are_exact_text(self):
        report = FlowReport(
            delivered_rate=Fraction(25, 2),
            tile_rates={GridCoord(1, 1): Fraction(25, 2)},
            assembler_rates={GridCoord(2, 2): Fraction(25, 2)},
            utilization={GridCoord(2, 2): Fraction(1, 4)},
            starved=(GridCoord(3, 3),),
            rounds=4,
        )
        document = flow_report_to_document(report)
        assert document["delivered_rate"] == "25/2"
        assert document["tiles"] == [{"x": 1, "y": 1, "rate": "25/2"}]
        assert document["assemblers"][0]["utilization"] == "1/4"
        assert document["starved"] == [{"x": 3, "y": 3}]

    def test_chain(self):
        bp = _chain()
        document = flow_report_to_document(simulate_flow(bp, bp.instance))
        assert document["delivered_rate"] == "50"
        assert {"x": 1, "y": 6, "rate": "200"} in document["tiles"]
