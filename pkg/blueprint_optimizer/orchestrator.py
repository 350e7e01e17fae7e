"""
Runs the three stages with backtracking.

Each Stage 1 solution is tried against Stage 2 packings until Stage 3 routes
one of them. A packing Stage 3 cannot route goes into the Stage 2 ledger; a
Stage 1 solution whose packings run out goes into the Stage 1 ledger and
Stage 1 is solved again.
"""

from __future__ import annotations

import asyncio
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from .constants import (
    ASSEMBLER_PENALTY,
    CONVEYOR_PENALTY,
    INSERTER_PENALTY,
    MAX_STAGE1_ATTEMPTS,
    MAX_STAGE2_ATTEMPTS_PER_STAGE1,
)
from .domain import ProblemInstance, derive_bounds, validate_instance
from .exceptions import (
    ConfigError,
    InconsistentInputsError,
    InstanceError,
    SearchLimitError,
    SolverError,
)
from .parser.documents import (
    blueprint_to_document,
    layout_to_document,
    packing_to_document,
    stage1_to_document,
    to_json,
)
from .parser.instance import dump_instance
from .stage1 import (
    Stage1Ledger,
    Stage1Solution,
    build_stage1_model,
    record_attempt,
    solve_stage1,
)
from .stage2 import (
    PackingLayout,
    Stage2Ledger,
    build_stage2_model,
    record_packing,
    solve_stage2,
)
from .stage3 import (
    LayoutSolution,
    build_stage3_model,
    check_route_grids,
    placements_of,
    routing_inputs,
    solve_stage3,
)
from .validator import Blueprint

_LOGGER = logging.getLogger(__name__)

STAGES = ("stage1", "stage2", "stage3")


class RunOutcome(Enum):
    BLUEPRINT = "blueprint"
    INFEASIBLE = "infeasible"
    LIMIT_REACHED = "limit_reached"


@dataclass(frozen=True)
class RunConfig:
    """Tunables of one optimization run; time limits of 0 mean unlimited"""

    max_stage1_attempts: int = MAX_STAGE1_ATTEMPTS
    max_stage2_attempts_per_stage1: int = MAX_STAGE2_ATTEMPTS_PER_STAGE1
    stage1_time_limit: float = 0.0
    stage2_time_limit: float = 0.0
    stage3_time_limit: float = 0.0
    node_limit: int = 0
    conveyor_penalty: int = CONVEYOR_PENALTY
    inserter_penalty: int = INSERTER_PENALTY
    assembler_penalty: int = ASSEMBLER_PENALTY
    workers: int = 1
    dump_dir: Optional[Path] = None
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.max_stage1_attempts < 1 or self.max_stage2_attempts_per_stage1 < 1:
            raise ConfigError("attempt limits must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        limits = (
            self.stage1_time_limit,
            self.stage2_time_limit,
            self.stage3_time_limit,
        )
        if min(limits) < 0:
            raise ConfigError("time limits must be non-negative")
        if self.node_limit < 0:
            raise ConfigError("node limit must be non-negative")
        if not self.deterministic:
            raise ConfigError("runs are always deterministic")

    @property
    def penalties(self) -> Tuple[int, int]:
        return self.conveyor_penalty, self.inserter_penalty


@dataclass
class AttemptRecord:
    """One Stage 1 solution and what became of it"""

    index: int
    num_assemblers: int
    recipes: Tuple[int, ...]
    objective_value: int
    packings_tried: int = 0
    rejection: Optional[str] = None

    def to_document(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "num_assemblers": self.num_assemblers,
            "recipes": list(self.recipes),
            "objective_value": self.objective_value,
            "packings_tried": self.packings_tried,
            "rejection": self.rejection,
        }


@dataclass
class RunReport:
    outcome: RunOutcome = RunOutcome.INFEASIBLE
    blueprint: Optional[Blueprint] = None
    attempts: List[AttemptRecord] = field(default_factory=list)
    seconds: Dict[str, float] = field(
        default_factory=lambda: dict.fromkeys(STAGES, 0.0)
    )
    stage1_objective: Optional[int] = None
    layout_objective: Optional[int] = None
    message: str = ""

    @property
    def stage1_attempts(self) -> int:
        return len(self.attempts)

    @property
    def stage2_attempts(self) -> List[int]:
        return [attempt.packings_tried for attempt in self.attempts]

    @property
    def objective_decay(self) -> List[int]:
        """Stage 1 objectives in the order the attempts were made"""
        return [attempt.objective_value for attempt in self.attempts]

    def to_document(self) -> Dict[str, Any]:
        # timings stay out so repeated runs dump identical files
        return {
            "outcome": self.outcome.value,
            "message": self.message,
            "stage1_objective": self.stage1_objective,
            "layout_objective": self.layout_objective,
            "attempts": [attempt.to_document() for attempt in self.attempts],
        }


def assemble_blueprint(
    stage1: Stage1Solution, layout: LayoutSolution, inst: ProblemInstance
) -> Blueprint:
    """Merges Stage 1 recipes with a routed layout"""

    if len(layout.assignments) != stage1.num_assemblers:
        raise InconsistentInputsError(
            f"layout places {len(layout.assignments)} assemblers, "
            f"stage 1 runs {stage1.num_assemblers}"
        )
    if len(layout.conveyors) != inst.height or any(
        len(row) != inst.width for row in layout.conveyors
    ):
        raise InconsistentInputsError("layout and instance differ in size")

    produced = sum(
        stage1.assembler_rates[a]
        for a in stage1.active()
        if stage1.assembler_recipes[a] == inst.out_item
    )
    passed = min(inst.supply(inst.out_item), inst.conveyor_capacity)
    return Blueprint.from_grids(
        inst.width,
        inst.height,
        layout.conveyors,
        layout.inserters,
        placements_of(stage1, layout.assignments),
        predicted_rate=produced + passed,
        instance=inst,
    )


class _Dump:
    """Writes run artefacts into a directory, or does nothing without one"""

    def __init__(self, directory: Optional[Path]) -> None:
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        if self.directory is None:
            return
        (self.directory / name).write_text(text, encoding="utf-8")

    def document(self, name: str, document: Dict[str, Any]) -> None:
        if self.directory is not None:
            self.write(name, to_json(document))


class _Run:
    def __init__(self, inst: ProblemInstance, cfg: RunConfig) -> None:
        self.inst = inst
        self.cfg = cfg
        self.report = RunReport()
        self.dump = _Dump(cfg.dump_dir)
        self.capped = False

    @contextmanager
    def timed(self, stage: str) -> Iterator[None]:
        started = time.monotonic()
        try:
            yield
        finally:
            self.report.seconds[stage] += time.monotonic() - started

    def finish(self, outcome: RunOutcome, message: str) -> RunReport:
        self.report.outcome = outcome
        self.report.message = message
        self.dump.document("report.json", self.report.to_document())
        log = _LOGGER.info if outcome is RunOutcome.BLUEPRINT else _LOGGER.warning
        log("Run finished: %s (%s)", outcome.value, message)
        return self.report

    def route(
        self, stage1: Stage1Solution, packing: PackingLayout
    ) -> Optional[LayoutSolution]:
        """Stage 3 for one packing; runs on a worker thread when batched"""
        conveyor_penalty, inserter_penalty = self.cfg.penalties
        built = build_stage3_model(
            self.inst, stage1, packing, conveyor_penalty, inserter_penalty
        )
        return solve_stage3(built, self.cfg.stage3_time_limit, self.cfg.node_limit)

    async def route_batch(
        self, stage1: Stage1Solution, packings: Sequence[PackingLayout]
    ) -> List[Optional[LayoutSolution]]:
        if len(packings) == 1:
            return [self.route(stage1, packings[0])]
        return list(
            await asyncio.gather(
                *(asyncio.to_thread(self.route, stage1, p) for p in packings)
            )
        )

    def accept(
        self, stage1: Stage1Solution, layout: LayoutSolution
    ) -> RunReport:
        blueprint = assemble_blueprint(stage1, layout, self.inst)
        problems = check_route_grids(
            layout.conveyors,
            layout.inserters,
            layout.routes,
            layout.carrying,
            self.inst,
            blueprint.placements(),
        )
        if problems:
            raise SolverError(f"stage 3 returned an illegal layout: {problems[0]}")
        self.report.blueprint = blueprint
        self.report.stage1_objective = stage1.objective_value
        self.report.layout_objective = layout.objective_value
        self.dump.document("blueprint.json", blueprint_to_document(blueprint))
        return self.finish(RunOutcome.BLUEPRINT, "blueprint found")

    async def packings(
        self, stage1: Stage1Solution, record: AttemptRecord
    ) -> Optional[LayoutSolution]:
        """Walks Stage 2 packings in batches of `workers` until one routes"""

        inst, cfg = self.inst, self.cfg
        totals = stage1.inserter_totals()[: stage1.num_assemblers]
        ledger = Stage2Ledger()
        while record.packings_tried < cfg.max_stage2_attempts_per_stage1:
            batch: List[PackingLayout] = []
            left = cfg.max_stage2_attempts_per_stage1 - record.packings_tried
            room = min(cfg.workers, left)
            exhausted = False
            while len(batch) < room:
                with self.timed("stage2"):
                    built = build_stage2_model(
                        inst.width,
                        inst.height,
                        inst.reserved,
                        stage1.num_assemblers,
                        totals,
                        ledger,
                    )
                    packing = solve_stage2(built, cfg.stage2_time_limit, cfg.node_limit)
                if packing is None:
                    exhausted = True
                    break
                ledger = record_packing(ledger, packing)
                batch.append(packing)
                self.dump.document(
                    f"stage2_{record.index:03d}_"
                    f"{record.packings_tried + len(batch):03d}.json",
                    packing_to_document(packing),
                )

            with self.timed("stage3"):
                layouts = await self.route_batch(stage1, batch)
            for packing, layout in zip(batch, layouts):
                record.packings_tried += 1
                name = f"stage3_{record.index:03d}_{record.packings_tried:03d}.json"
                if layout is not None:
                    self.dump.document(name, layout_to_document(layout))
                    return layout
                self.dump.document(name, {"status": "unsat"})
                _LOGGER.info(
                    "Packing %s of attempt %s cannot be routed",
                    record.packings_tried,
                    record.index,
                )
            if exhausted:
                if record.packings_tried == 0:
                    record.rejection = "no packing fits"
                else:
                    record.rejection = "no packing routes"
                return None

        record.rejection = "packing attempts capped"
        self.capped = True
        return None

    async def run(self) -> RunReport:
        inst, cfg = self.inst, self.cfg
        self.dump.write("instance.json", dump_instance(inst))

        if not inst.recipes:
            return await self.run_routing_only()

        bounds = derive_bounds(inst)
        ledger = Stage1Ledger()
        for index in range(1, cfg.max_stage1_attempts + 1):
            try:
                with self.timed("stage1"):
                    built = build_stage1_model(
                        inst, bounds, ledger, cfg.assembler_penalty
                    )
                    stage1 = solve_stage1(built, cfg.stage1_time_limit, cfg.node_limit)
            except SearchLimitError as error:
                return self.finish(RunOutcome.LIMIT_REACHED, str(error))
            if stage1 is None:
                if self.capped:
                    return self.finish(
                        RunOutcome.LIMIT_REACHED,
                        "stage 1 exhausted after capped packing searches",
                    )
                return self.finish(RunOutcome.INFEASIBLE, "stage 1 exhausted")

            record = AttemptRecord(
                index=index,
                num_assemblers=stage1.num_assemblers,
                recipes=stage1.assembler_recipes[: stage1.num_assemblers],
                objective_value=stage1.objective_value,
            )
            self.report.attempts.append(record)
            self.dump.document(f"stage1_{index:03d}.json", stage1_to_document(stage1))

            try:
                layout = await self.packings(stage1, record)
            except SearchLimitError as error:
                record.rejection = str(error)
                return self.finish(RunOutcome.LIMIT_REACHED, str(error))
            if layout is not None:
                return self.accept(stage1, layout)
            _LOGGER.info(
                "Stage 1 attempt %s with %s assemblers rejected: %s",
                index,
                stage1.num_assemblers,
                record.rejection,
            )
            ledger = record_attempt(ledger, stage1)

        return self.finish(RunOutcome.LIMIT_REACHED, "stage 1 attempts capped")

    async def run_routing_only(self) -> RunReport:
        stage1, packing = routing_inputs(self.inst)
        record = AttemptRecord(index=1, num_assemblers=0, recipes=(), objective_value=0)
        self.report.attempts.append(record)
        try:
            with self.timed("stage3"):
                layouts = await self.route_batch(stage1, [packing])
        except SearchLimitError as error:
            return self.finish(RunOutcome.LIMIT_REACHED, str(error))
        record.packings_tried = 1
        if layouts[0] is None:
            record.rejection = "no packing routes"
            return self.finish(RunOutcome.INFEASIBLE, "no route layout exists")
        self.dump.document("stage3_001_001.json", layout_to_document(layouts[0]))
        return self.accept(stage1, layouts[0])


def _checked(inst: ProblemInstance) -> None:
    violations = validate_instance(inst)
    if violations:
        raise InstanceError("; ".join(violations))


async def optimize_async(
    inst: ProblemInstance, cfg: Optional[RunConfig] = None
) -> RunReport:
    """Like `optimize`; with `workers` > 1 packings are routed on threads"""

    _checked(inst)
    cfg = cfg or RunConfig()
    _LOGGER.info(
        "Optimizing %sx%s blueprint for item %s", inst.width, inst.height, inst.out_item
    )
    return await _Run(inst, cfg).run()


def optimize(inst: ProblemInstance, cfg: Optional[RunConfig] = None) -> RunReport:
    """Finds a blueprint, reports exhaustion, or stops at the configured caps"""

    return asyncio.run(optimize_async(inst, cfg))
