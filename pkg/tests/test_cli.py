import json

import pytest
from mockito import unstub, when

import blueprint_optimizer.orchestrator as orchestrator_module
from blueprint_optimizer.cli import (
    EXIT_INFEASIBLE,
    EXIT_INPUT_ERROR,
    EXIT_LIMIT_REACHED,
    EXIT_OK,
    main,
)
from blueprint_optimizer.domain import GridCoord
from blueprint_optimizer.parser.blueprint_string import import_blueprint_string
from blueprint_optimizer.parser.documents import dump_blueprint, parse_blueprint
from blueprint_optimizer.parser.instance import instance_from_document
from blueprint_optimizer.validator import Blueprint
from tests.constants import (
    CHAIN_CONVEYORS,
    CHAIN_INSERTERS,
    CHAIN_PLACEMENTS,
    RATIO_ONE_TO_ONE,
    TWO_ASSEMBLER_CHAIN,
)


@pytest.fixture(autouse=True)
def clean_stubs():
    yield
    unstub()


def _write_json(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def _chain(with_instance=True):
    inst = instance_from_document(TWO_ASSEMBLER_CHAIN) if with_instance else None
    placements = {GridCoord(x, y): p for (x, y), p in CHAIN_PLACEMENTS.items()}
    return Blueprint.from_grids(
        6, 6, CHAIN_CONVEYORS, CHAIN_INSERTERS, placements, 50, inst
    )


def _write_blueprint(path, bp):
    path.write_text(dump_blueprint(bp), encoding="utf-8")
    return str(path)


class TestSolve:
    def test_prints_the_blueprint(self, tmp_path, capsys):
        instance = _write_json(tmp_path / "instance.json", RATIO_ONE_TO_ONE)
        output = tmp_path / "blueprint.json"

        assert main(["solve", instance, "--output", str(output)]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[-1] == "predicted rate: 50/min"
        assert "+-+" in out
        assert parse_blueprint(output.read_text(encoding="utf-8")).predicted_rate == 50

    def test_infeasible(self, tmp_path, capsys):
        when(orchestrator_module).solve_stage3(...).thenReturn(None)
        instance = _write_json(tmp_path / "instance.json", RATIO_ONE_TO_ONE)

        assert main(["solve", instance]) == EXIT_INFEASIBLE
        assert capsys.readouterr().out == "infeasible\n"

    def test_limit_reached(self, tmp_path, capsys):
        when(orchestrator_module).solve_stage3(...).thenReturn(None)
        instance = _write_json(tmp_path / "instance.json", RATIO_ONE_TO_ONE)

        assert main(["solve", instance, "--max-attempts", "1"]) == EXIT_LIMIT_REACHED
        assert capsys.readouterr().out == "limit reached: stage 1 attempts capped\n"

    def test_malformed_instance(self, tmp_path):
        bad = tmp_path / "instance.json"
        bad.write_text('{"width": 3,', encoding="utf-8")
        assert main(["solve", str(bad)]) == EXIT_INPUT_ERROR

    def test_missing_file(self, tmp_path):
        assert main(["solve", str(tmp_path / "absent.json")]) == EXIT_INPUT_ERROR

    def test_bad_worker_count(self, tmp_path):
        instance = _write_json(tmp_path / "instance.json", RATIO_ONE_TO_ONE)
        assert main(["solve", instance, "--workers", "0"]) == EXIT_INPUT_ERROR


class TestValidate:
    def test_embedded_instance(self, tmp_path, capsys):
        path = _write_blueprint(tmp_path / "chain.json", _chain())
        assert main(["validate", path]) == EXIT_OK
        assert capsys.readouterr().out == "valid\n"

    def test_separate_instance(self, tmp_path, capsys):
        path = _write_blueprint(tmp_path / "chain.json", _chain(with_instance=False))
        instance = _write_json(tmp_path / "instance.json", TWO_ASSEMBLER_CHAIN)
        assert main(["validate", path, "--instance", instance]) == EXIT_OK
        assert capsys.readouterr().out == "valid\n"

    def test_needs_an_instance(self, tmp_path):
        path = _write_blueprint(tmp_path / "chain.json", _chain(with_instance=False))
        assert main(["validate", path]) == EXIT_INPUT_ERROR

    def test_reports_violations(self, tmp_path, capsys):
        rows = [list(row) for row in CHAIN_INSERTERS]
        rows[3][5] = 0
        bp = _chain()
        broken = Blueprint.from_grids(
            6,
            6,
            CHAIN_CONVEYORS,
            tuple(tuple(row) for row in rows),
            bp.placements(),
            50,
            bp.instance,
        )
        path = _write_blueprint(tmp_path / "broken.json", broken)

        assert main(["validate", path]) == EXIT_INFEASIBLE
        assert "assembler at (4,1) has no output inserter" in capsys.readouterr().out


class TestInspect:
    def test_simulate(self, tmp_path, capsys):
        path = _write_blueprint(tmp_path / "chain.json", _chain())
        instance = _write_json(tmp_path / "instance.json", TWO_ASSEMBLER_CHAIN)

        assert main(["simulate", path, instance]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["delivered_rate"] == "50"
        assert report["starved"] == []

    def test_render_with_legend(self, tmp_path, capsys):
        path = _write_blueprint(tmp_path / "chain.json", _chain())
        assert main(["render", path, "--legend"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "+-++-+"
        assert "E  conveyor east" in lines

    def test_export_then_import(self, tmp_path, capsys):
        path = _write_blueprint(tmp_path / "chain.json", _chain())
        assert main(["export", path]) == EXIT_OK
        string = capsys.readouterr().out.strip()
        assert import_blueprint_string(string) == _chain()

        output = tmp_path / "imported.json"
        assert main(["import", string, "--output", str(output)]) == EXIT_OK
        assert parse_blueprint(output.read_text(encoding="utf-8")) == _chain()

    def test_export_with_names(self, tmp_path, capsys):
        path = _write_blueprint(tmp_path / "chain.json", _chain())
        names = _write_json(
            tmp_path / "names.json",
            {"1": "iron-plate", "2": "iron-gear-wheel", "3": "pipe"},
        )
        assert main(["export", path, "--names", names]) == EXIT_OK
        assert capsys.readouterr().out.startswith("0")

    def test_unmapped_item_name(self, tmp_path):
        path = _write_blueprint(tmp_path / "chain.json", _chain())
        names = _write_json(tmp_path / "names.json", {"2": "iron-gear-wheel"})
        assert main(["export", path, "--names", names]) == EXIT_INPUT_ERROR

    def test_broken_string(self, capsys):
        assert main(["import", "1abc"]) == EXIT_INPUT_ERROR
