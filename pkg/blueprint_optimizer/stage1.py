"""
Stage 1: recipes, rates and inserter counts.

Chooses how many assemblers run, which recipe each one executes, how fast it
runs and how many inserters move its ingredients and product. Nothing here
knows about tile positions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .constants import ASSEMBLER_PENALTY, MAX_INSERTERS_PER_ASSEMBLER
from .domain import ModelBounds, ProblemInstance
from .exceptions import InconsistentInputsError, LedgerError, SearchLimitError
from .fdsolver import (
    Assignment,
    Model,
    Objective,
    ReifiedEq,
    ReifiedGt,
    SearchConfig,
    Status,
    Var,
    implication,
    lex_less,
    linear,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage1Solution:
    """
    Per assembler decisions, indexed 0..max_assemblers-1.

    Recipe 0 marks an inactive assembler. `inserters_in` and `consuming` are
    indexed [assembler][item - 1].
    """

    num_assemblers: int
    assembler_recipes: Tuple[int, ...]
    assembler_rates: Tuple[int, ...]
    inserters_in: Tuple[Tuple[int, ...], ...]
    inserters_out: Tuple[int, ...]
    consuming: Tuple[Tuple[int, ...], ...]
    objective_value: int

    @property
    def max_assemblers(self) -> int:
        return len(self.assembler_recipes)

    def active(self) -> range:
        """Indices of the active assemblers, always a prefix"""
        return range(self.num_assemblers)

    def inserter_totals(self) -> Tuple[int, ...]:
        return tuple(
            sum(ins) + out for ins, out in zip(self.inserters_in, self.inserters_out)
        )

    def inserters_in_for(self, assembler: int, item: int) -> int:
        return self.inserters_in[assembler][item - 1]

    def production(self, item: int) -> int:
        """Items per minute of `item` made by the active assemblers"""
        return sum(
            rate
            for recipe, rate in zip(self.assembler_recipes, self.assembler_rates)
            if recipe == item
        )


@dataclass(frozen=True)
class Stage1Attempt:
    recipes: Tuple[int, ...]
    inserter_totals: Tuple[int, ...]

    @property
    def vector(self) -> Tuple[int, ...]:
        return self.recipes + self.inserter_totals


@dataclass(frozen=True)
class Stage1Ledger:
    """Stage 1 solutions already handed to the later stages"""

    attempts: Tuple[Stage1Attempt, ...] = ()

    def __len__(self) -> int:
        return len(self.attempts)

    def __contains__(self, attempt: object) -> bool:
        return attempt in self.attempts


def attempt_of(sol: Stage1Solution) -> Stage1Attempt:
    return Stage1Attempt(sol.assembler_recipes, sol.inserter_totals())


def record_attempt(ledger: Stage1Ledger, sol: Stage1Solution) -> Stage1Ledger:
    """Returns a ledger that also excludes `sol`"""

    attempt = attempt_of(sol)
    if attempt in ledger:
        raise LedgerError(f"stage 1 attempt {attempt.vector} is already recorded")
    return Stage1Ledger(ledger.attempts + (attempt,))


@dataclass
class Stage1Model:
    inst: ProblemInstance
    bounds: ModelBounds
    model: Model
    objective: Objective
    num_assemblers: Var
    recipes: List[Var] = field(default_factory=list)
    rates: List[Var] = field(default_factory=list)
    active: List[Var] = field(default_factory=list)
    inserters_in: List[List[Var]] = field(default_factory=list)
    inserters_out: List[Var] = field(default_factory=list)
    consuming: List[List[Var]] = field(default_factory=list)
    totals: List[Var] = field(default_factory=list)


def build_stage1_model(
    inst: ProblemInstance,
    bounds: ModelBounds,
    ledger: Optional[Stage1Ledger] = None,
    assembler_penalty: int = ASSEMBLER_PENALTY,
) -> Stage1Model:
    """Encodes item balance, rate bands, symmetry and ledger exclusion"""

    ledger = ledger or Stage1Ledger()
    model = Model("stage1")
    count = bounds.max_assemblers
    rate_in = inst.inserter_rate
    items = list(inst.items)
    max_total = MAX_INSERTERS_PER_ASSEMBLER

    num_assemblers = model.add_var(0, count, "num_assemblers", decision=False)
    recipes: List[Var] = []
    rates: List[Var] = []
    active: List[Var] = []
    inserters_in: List[List[Var]] = []
    inserters_out: List[Var] = []
    consuming: List[List[Var]] = []
    totals: List[Var] = []
    # produced[a][item] is the rate of assembler a when it makes item, else 0
    produced: List[dict] = []

    for a in range(count):
        recipe = model.add_var(0, inst.num_items, f"recipe[{a}]")
        rate = model.add_var(0, bounds.max_rate, f"rate[{a}]")
        ins_out = model.add_var(0, bounds.max_inserters_out, f"inserters_out[{a}]")
        ins_in = [
            model.add_var(0, bounds.max_inserters_in, f"inserters_in[{a}][{j}]")
            for j in items
        ]
        eats = [
            model.add_var(0, bounds.max_consumption, f"consuming[{a}][{j}]", False)
            for j in items
        ]
        tot = model.add_var(0, max_total, f"total[{a}]", decision=False)
        is_active = model.add_bool(f"active[{a}]", decision=False)

        model.post(ReifiedGt(is_active, recipe, 0))
        parts = [(1, tot), (-1, ins_out)] + [(-1, v) for v in ins_in]
        model.post(linear(parts, "==", 0))

        # inactive assemblers do nothing
        model.post(linear([(1, rate), (-bounds.max_rate, is_active)], "<=", 0))
        model.post(linear([(1, rate)], ">=", 1, enforce=[is_active]))
        capped = [(ins_out, bounds.max_inserters_out)]
        capped += [(var, bounds.max_inserters_in) for var in ins_in]
        capped += [(var, bounds.max_consumption) for var in eats]
        for var, cap in capped:
            model.post(linear([(1, var), (-cap, is_active)], "<=", 0))

        selects = {}
        made = {}
        for product in items:
            picked = model.add_bool(f"runs[{a}][{product}]", decision=False)
            model.post(ReifiedEq(picked, recipe, product))
            recipe_def = inst.recipe_for(product)
            if recipe_def is None:
                model.post(linear([(1, picked)], "==", 0))
                continue
            selects[product] = picked

            for j, eat in zip(items, eats):
                qty = recipe_def.quantity(j)
                if qty == 0:
                    model.post(linear([(1, eat)], "==", 0, enforce=[picked]))
                    continue
                # eat = floor(qty * rate / qty_produced)
                per_craft = recipe_def.qty_produced
                model.post(
                    linear([(per_craft, eat), (-qty, rate)], "<=", 0, enforce=[picked])
                )
                model.post(
                    linear(
                        [(per_craft, eat), (-qty, rate)],
                        ">=",
                        -(per_craft - 1),
                        enforce=[picked],
                    )
                )

            out = model.add_var(0, recipe_def.rate, f"produced[{a}][{product}]", False)
            model.post(linear([(1, out), (-recipe_def.rate, picked)], "<=", 0))
            model.post(linear([(1, out), (-1, rate)], "<=", 0))
            model.post(
                linear(
                    [(1, out), (-1, rate), (-bounds.max_rate, picked)],
                    ">=",
                    -bounds.max_rate,
                )
            )
            made[product] = out

        # rate never exceeds the rate of the chosen recipe
        model.post(
            linear(
                [(1, rate)]
                + [(-inst.recipe_for(p).rate, picked) for p, picked in selects.items()],
                "<=",
                0,
            )
        )

        # n inserters carry f items per minute when (n - 1) r < f <= n r
        for var, eat in zip(ins_in, eats):
            model.post(linear([(1, eat), (-rate_in, var)], "<=", 0))
            model.post(linear([(1, eat), (-rate_in, var)], ">=", -rate_in + 1))
        model.post(linear([(1, rate), (-rate_in, ins_out)], "<=", 0))
        model.post(linear([(1, rate), (-rate_in, ins_out)], ">=", -rate_in + 1))

        recipes.append(recipe)
        rates.append(rate)
        active.append(is_active)
        inserters_in.append(ins_in)
        inserters_out.append(ins_out)
        consuming.append(eats)
        totals.append(tot)
        produced.append(made)

    model.post(linear([(1, v) for v in active] + [(-1, num_assemblers)], "==", 0))

    for j_index, j in enumerate(items):
        needed = [(1, consuming[a][j_index]) for a in range(count)]
        made = [(-1, produced[a][j]) for a in range(count) if j in produced[a]]
        if needed:
            model.post(linear(needed + made, "<=", inst.supply(j)))

    for a in range(count - 1):
        model.post(implication([active[a + 1]], [active[a]]))
        model.post(
            lex_less(
                [recipes[a], totals[a]],
                [recipes[a + 1], totals[a + 1]],
                strict=False,
                enforce=[active[a + 1]],
            )
        )

    vector = recipes + totals
    for index, attempt in enumerate(ledger.attempts):
        if len(attempt.vector) != len(vector):
            raise InconsistentInputsError(
                f"ledger entry {index} has {len(attempt.recipes)} assemblers, "
                f"model has {count}"
            )
        below = model.add_bool(f"ledger_below[{index}]", decision=False)
        model.post(lex_less(vector, attempt.vector, enforce=[below]))
        model.post(lex_less(attempt.vector, vector, enforce=[~below]))

    terms = []
    for a in range(count):
        if inst.out_item in produced[a]:
            terms.append((1, produced[a][inst.out_item]))
        terms.append((-assembler_penalty, active[a]))
        terms.append((-1, totals[a]))

    _LOGGER.debug(
        "Stage 1 model: %s assemblers, %s items, %s ledger entries, %s constraints",
        count,
        inst.num_items,
        len(ledger),
        len(model.constraints),
    )
    return Stage1Model(
        inst=inst,
        bounds=bounds,
        model=model,
        objective=Objective.maximize(terms),
        num_assemblers=num_assemblers,
        recipes=recipes,
        rates=rates,
        active=active,
        inserters_in=inserters_in,
        inserters_out=inserters_out,
        consuming=consuming,
        totals=totals,
    )


def _solution(built: Stage1Model, values: Assignment, objective: int) -> Stage1Solution:
    return Stage1Solution(
        num_assemblers=values[built.num_assemblers],
        assembler_recipes=tuple(values[v] for v in built.recipes),
        assembler_rates=tuple(values[v] for v in built.rates),
        inserters_in=tuple(tuple(values[v] for v in row) for row in built.inserters_in),
        inserters_out=tuple(values[v] for v in built.inserters_out),
        consuming=tuple(tuple(values[v] for v in row) for row in built.consuming),
        objective_value=objective,
    )


def solve_stage1(
    built: Stage1Model,
    time_limit: float = 0.0,
    node_limit: int = 0,
    strategy: str = "fixed",
) -> Optional[Stage1Solution]:
    """Best assignment outside the ledger, None when none is left"""

    outcome = built.model.solve(
        SearchConfig(
            objective=built.objective,
            time_limit=time_limit,
            node_limit=node_limit,
            strategy=strategy,
        )
    )
    if outcome.status is Status.UNSAT:
        _LOGGER.info("Stage 1 infeasible")
        return None
    if outcome.status is Status.LIMIT_REACHED:
        _LOGGER.warning("Stage 1 stopped at its search limit")
        raise SearchLimitError("stage 1")

    sol = _solution(built, outcome.assignment, outcome.objective)
    _LOGGER.info(
        "Stage 1: %s assemblers %s at %s, objective %s",
        sol.num_assemblers,
        sol.assembler_recipes[: sol.num_assemblers],
        sol.assembler_rates[: sol.num_assemblers],
        sol.objective_value,
    )
    return sol
