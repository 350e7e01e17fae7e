import json

import freezegun
import pytest
from mockito import unstub, when

import blueprint_optimizer.orchestrator as orchestrator_module
from blueprint_optimizer.domain import Direction, GridCoord, zero_grid
from blueprint_optimizer.exceptions import (
    ConfigError,
    InconsistentInputsError,
    InstanceError,
    SearchLimitError,
)
from blueprint_optimizer.orchestrator import (
    RunConfig,
    RunOutcome,
    assemble_blueprint,
    optimize,
    optimize_async,
)
from blueprint_optimizer.parser.instance import instance_from_document
from blueprint_optimizer.stage1 import Stage1Solution
from blueprint_optimizer.stage3 import (
    LayoutSolution,
    derive_route_grids,
    placements_of,
    routing_inputs,
)
from blueprint_optimizer.validator import CellKind, simulate_flow, validate_structure
from tests.constants import (
    EIGHT_BY_EIGHT,
    FIVE_BY_EIGHT_PLACEMENTS,
    FIVE_BY_EIGHT_PREDICTED,
    FIVE_BY_EIGHT_STAGE1,
    ONE_OF_TWO,
    RATIO_ONE_TO_ONE,
    RATIO_ONE_TO_TWO,
    RATIO_TWO_TO_ONE,
    SPREAD_SOURCES_CONVEYORS,
    SPREAD_SOURCES_INSERTERS,
    TWO_ASSEMBLER_CHAIN,
    TWO_SOURCE_OBJECTIVE,
    TWO_SOURCE_ROUTING,
    five_by_eight,
)

N, S = Direction.NORTH, Direction.SOUTH


@pytest.fixture(autouse=True)
def clean_stubs():
    yield
    unstub()


def _inserter_cells(bp):
    return [
        (coord.x, coord.y, bp.cell(coord).direction)
        for coord in bp.coords()
        if bp.cell(coord).kind is CellKind.INSERTER
    ]


def _assert_sound(report, inst):
    assert report.outcome is RunOutcome.BLUEPRINT
    bp = report.blueprint
    assert validate_structure(bp, inst) == []
    assert simulate_flow(bp, inst).delivered_rate == bp.predicted_rate


class TestRatioCases:
    @pytest.mark.parametrize(
        "document, rate, inserters",
        [
            (RATIO_ONE_TO_ONE, 50, [(1, 4, N), (3, 4, S)]),
            (RATIO_TWO_TO_ONE, 50, [(1, 4, N), (2, 4, N), (3, 4, S)]),
            (RATIO_ONE_TO_TWO, 100, [(1, 4, N), (2, 4, S), (3, 4, S)]),
        ],
    )
    def test_single_assembler(self, document, rate, inserters):
        inst = instance_from_document(document)
        report = optimize(inst)
        _assert_sound(report, inst)
        bp = report.blueprint
        assert bp.predicted_rate == rate
        assert bp.placements() == {GridCoord(1, 1): 2}
        assert _inserter_cells(bp) == inserters
        assert report.stage1_attempts == 1

    def test_routing_only(self):
        inst = instance_from_document(TWO_SOURCE_ROUTING)
        report = optimize(inst)
        _assert_sound(report, inst)
        assert report.layout_objective == TWO_SOURCE_OBJECTIVE
        assert report.blueprint.predicted_rate == 100
        assert report.blueprint.count(CellKind.ASSEMBLER) == 0

    async def test_workers_pick_the_same_layout(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        alone = await optimize_async(inst, RunConfig(workers=1))
        batched = await optimize_async(inst, RunConfig(workers=2))
        assert batched.blueprint == alone.blueprint
        assert batched.stage2_attempts == alone.stage2_attempts

    @freezegun.freeze_time("2026-01-01")
    def test_report_is_reproducible(self):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        first = optimize(inst)
        second = optimize(inst)
        assert first.to_document() == second.to_document()
        assert first.blueprint == second.blueprint
        assert set(first.seconds.values()) == {0.0}


class TestBacktracking:
    def test_unroutable_packings_exhaust_stage1(self):
        when(orchestrator_module).solve_stage3(...).thenReturn(None)
        report = optimize(instance_from_document(RATIO_ONE_TO_ONE))

        assert report.outcome is RunOutcome.INFEASIBLE
        assert report.blueprint is None
        assert [a.num_assemblers for a in report.attempts] == [1, 0]
        assert {a.rejection for a in report.attempts} == {"no packing routes"}
        assert report.objective_decay == sorted(report.objective_decay, reverse=True)

    def test_packing_cap_reports_limit(self):
        when(orchestrator_module).solve_stage3(...).thenReturn(None)
        cfg = RunConfig(max_stage2_attempts_per_stage1=1)
        report = optimize(instance_from_document(RATIO_ONE_TO_ONE), cfg)

        assert report.outcome is RunOutcome.LIMIT_REACHED
        assert report.attempts[0].rejection == "packing attempts capped"
        assert report.stage2_attempts == [1, 1]

    def test_stage1_attempt_cap(self):
        when(orchestrator_module).solve_stage3(...).thenReturn(None)
        cfg = RunConfig(max_stage1_attempts=1)
        report = optimize(instance_from_document(RATIO_ONE_TO_ONE), cfg)

        assert report.outcome is RunOutcome.LIMIT_REACHED
        assert report.message == "stage 1 attempts capped"
        assert report.stage1_attempts == 1

    def test_search_limit(self):
        limit = SearchLimitError("stage 1")
        when(orchestrator_module).solve_stage1(...).thenRaise(limit)
        report = optimize(instance_from_document(RATIO_ONE_TO_ONE))

        assert report.outcome is RunOutcome.LIMIT_REACHED
        assert report.message == "stage 1 reached its search limit"
        assert report.attempts == []

    def test_stage3_limit_names_the_attempt(self):
        limit = SearchLimitError("stage 3")
        when(orchestrator_module).solve_stage3(...).thenRaise(limit)
        report = optimize(instance_from_document(RATIO_ONE_TO_ONE))

        assert report.outcome is RunOutcome.LIMIT_REACHED
        assert report.attempts[0].rejection == "stage 3 reached its search limit"


class TestRunInputs:
    def test_invalid_instance(self):
        document = dict(RATIO_ONE_TO_ONE)
        document["destination"] = {"x": 1, "y": 5}
        with pytest.raises(InstanceError):
            optimize(instance_from_document(document))

    @pytest.mark.parametrize(
        "changes",
        [
            {"workers": 0},
            {"max_stage1_attempts": 0},
            {"stage2_time_limit": -1.0},
            {"node_limit": -5},
            {"deterministic": False},
        ],
    )
    def test_bad_config(self, changes):
        with pytest.raises(ConfigError):
            RunConfig(**changes)

    def test_assemble_rejects_foreign_layout(self):
        inst = instance_from_document(TWO_ASSEMBLER_CHAIN)
        stage1, _ = routing_inputs(inst)
        blank = zero_grid(inst.width, inst.height)
        layout = LayoutSolution(blank, blank, blank, blank, (GridCoord(1, 1),), 0)
        with pytest.raises(InconsistentInputsError):
            assemble_blueprint(stage1, layout, inst)

    def test_assemble_two_recipes_on_one_conveyor(self):
        inst = instance_from_document(five_by_eight(3))
        stage1 = Stage1Solution(**FIVE_BY_EIGHT_STAGE1)
        anchors = tuple(GridCoord(x, y) for x, y in FIVE_BY_EIGHT_PLACEMENTS)
        labels = derive_route_grids(
            SPREAD_SOURCES_CONVEYORS,
            SPREAD_SOURCES_INSERTERS,
            inst,
            placements_of(stage1, anchors),
        )
        layout = LayoutSolution(
            SPREAD_SOURCES_CONVEYORS,
            SPREAD_SOURCES_INSERTERS,
            labels.routes,
            labels.carrying,
            anchors,
            0,
        )
        bp = assemble_blueprint(stage1, layout, inst)
        assert bp.predicted_rate == FIVE_BY_EIGHT_PREDICTED
        assert bp.placements() == {GridCoord(1, 4): 3, GridCoord(3, 1): 4}
        # 2 item 1 and 1 item 2 into the bottom assembler
        assert [c for c in _inserter_cells(bp) if c[1] == 7] == [
            (1, 7, N),
            (2, 7, N),
            (3, 7, N),
        ]
        assert [labels.carrying[6][x] for x in range(3)] == [1, 1, 2]
        assert validate_structure(bp, inst) == []
        assert simulate_flow(bp, inst).delivered_rate == bp.predicted_rate


class TestDumps:
    def test_every_stage_is_written(self, tmp_path):
        inst = instance_from_document(RATIO_ONE_TO_ONE)
        optimize(inst, RunConfig(dump_dir=tmp_path))
        names = {path.name for path in tmp_path.iterdir()}

        assert {
            "instance.json",
            "stage1_001.json",
            "stage2_001_001.json",
            "stage3_001_001.json",
            "blueprint.json",
            "report.json",
        } <= names
        report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert report["outcome"] == "blueprint"
        assert "seconds" not in report

    def test_dumps_are_identical_across_runs(self, tmp_path):
        inst = instance_from_document(RATIO_ONE_TO_TWO)
        optimize(inst, RunConfig(dump_dir=tmp_path / "a"))
        optimize(inst, RunConfig(dump_dir=tmp_path / "b"))
        first = sorted((tmp_path / "a").iterdir())
        second = sorted((tmp_path / "b").iterdir())
        assert [p.name for p in first] == [p.name for p in second]
        for left, right in zip(first, second):
            assert left.read_bytes() == right.read_bytes()


@pytest.mark.slow
class TestCaseStudies:
    def test_only_one_assembler_can_be_wired(self):
        inst = instance_from_document(ONE_OF_TWO)
        report = optimize(inst)
        _assert_sound(report, inst)
        assert report.blueprint.count(CellKind.ASSEMBLER) == 9
        assert report.stage1_attempts > 1
        assert any(a.num_assemblers == 2 and a.rejection for a in report.attempts)
        assert report.objective_decay == sorted(report.objective_decay, reverse=True)

    def test_eight_by_eight(self):
        inst = instance_from_document(EIGHT_BY_EIGHT)
        report = optimize(inst)
        assert report.outcome is RunOutcome.BLUEPRINT
        assert validate_structure(report.blueprint, inst) == []
