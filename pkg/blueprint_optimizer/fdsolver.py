"""
A small deterministic finite domain solver.

Models are built from integer variables and a fixed catalogue of constraints.
Posting a constraint runs root propagation (bounds consistency for linear,
reified and clausal constraints, forward checking for the rest), search is
delegated to CP-SAT pinned to a single worker and a fixed seed, and every
assignment it returns is re-checked against the catalogue semantics.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import (
    Callable,
    Deque,
    Dict,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

from ortools.sat.python import cp_model

from .exceptions import ModelError, SolverError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Var:
    index: int
    name: str
    model_id: int
    decision: bool = True

    def __invert__(self) -> Lit:
        return Lit(self, False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Lit:
    """A Boolean variable, or its negation when `positive` is False"""

    var: Var
    positive: bool = True

    def __invert__(self) -> Lit:
        return Lit(self.var, not self.positive)


LitLike = Union[Var, Lit]
Operand = Union[int, Var]
Term = Tuple[int, Var]


def as_lit(value: LitLike) -> Lit:
    return value if isinstance(value, Lit) else Lit(value)


def _lits(values: Iterable[LitLike]) -> Tuple[Lit, ...]:
    return tuple(as_lit(value) for value in values)


# Constraint catalogue


@dataclass(frozen=True)
class Linear:
    """sum(coef * var) <op> rhs, op one of ==, <=, >=, !="""

    terms: Tuple[Term, ...]
    op: str
    rhs: int
    enforce: Tuple[Lit, ...] = ()


@dataclass(frozen=True)
class ReifiedEq:
    """literal <-> var == value"""

    literal: Var
    var: Var
    value: int


@dataclass(frozen=True)
class ReifiedGt:
    """literal <-> var > value"""

    literal: Var
    var: Var
    value: int


@dataclass(frozen=True)
class Implication:
    """All premises imply at least one conclusion"""

    premises: Tuple[Lit, ...]
    conclusions: Tuple[Lit, ...]


@dataclass(frozen=True)
class Element:
    """target == array[index], index 0-based"""

    target: Var
    array: Tuple[Operand, ...]
    index: Var


@dataclass(frozen=True)
class LexLess:
    """left <lex right, or <=lex when not strict"""

    left: Tuple[Operand, ...]
    right: Tuple[Operand, ...]
    strict: bool = True
    enforce: Tuple[Lit, ...] = ()


@dataclass(frozen=True)
class AllDifferentExcept0:
    vars: Tuple[Var, ...]


@dataclass(frozen=True)
class Table:
    vars: Tuple[Var, ...]
    tuples: Tuple[Tuple[int, ...], ...]


Constraint = Union[
    Linear,
    ReifiedEq,
    ReifiedGt,
    Implication,
    Element,
    LexLess,
    AllDifferentExcept0,
    Table,
]

_OPS = ("==", "<=", ">=", "!=")


def linear(
    terms: Iterable[Tuple[int, Var]],
    op: str,
    rhs: int,
    enforce: Iterable[LitLike] = (),
) -> Linear:
    """Builds a Linear constraint, merging repeated variables"""

    if op not in _OPS:
        raise ModelError(f"unknown linear operator {op!r}")
    merged: Dict[Var, int] = {}
    for coef, var in terms:
        merged[var] = merged.get(var, 0) + coef
    kept = tuple((coef, var) for var, coef in merged.items() if coef != 0)
    return Linear(kept, op, rhs, _lits(enforce))


def total(
    variables: Iterable[Var], op: str, rhs: int, enforce: Iterable[LitLike] = ()
) -> Linear:
    return linear(((1, var) for var in variables), op, rhs, enforce)


def lex_less(
    left: Sequence[Operand],
    right: Sequence[Operand],
    strict: bool = True,
    enforce: Iterable[LitLike] = (),
) -> LexLess:
    if len(left) != len(right):
        raise ModelError("lexicographic vectors differ in length")
    return LexLess(tuple(left), tuple(right), strict, _lits(enforce))


def lex_greater(
    left: Sequence[Operand],
    right: Sequence[Operand],
    strict: bool = True,
    enforce: Iterable[LitLike] = (),
) -> LexLess:
    return lex_less(right, left, strict, enforce)


def implication(premises: Iterable[LitLike], conclusions: Iterable[LitLike]):
    return Implication(_lits(premises), _lits(conclusions))


def scope(constraint: Constraint) -> List[Var]:
    """Variables a constraint reads"""

    if isinstance(constraint, Linear):
        found = [var for _, var in constraint.terms]
        found += [lit.var for lit in constraint.enforce]
    elif isinstance(constraint, (ReifiedEq, ReifiedGt)):
        found = [constraint.literal, constraint.var]
    elif isinstance(constraint, Implication):
        found = [lit.var for lit in constraint.premises + constraint.conclusions]
    elif isinstance(constraint, Element):
        found = [constraint.target, constraint.index]
        found += [op for op in constraint.array if isinstance(op, Var)]
    elif isinstance(constraint, LexLess):
        operands = constraint.left + constraint.right
        found = [op for op in operands if isinstance(op, Var)]
        found += [lit.var for lit in constraint.enforce]
    elif isinstance(constraint, (AllDifferentExcept0, Table)):
        found = list(constraint.vars)
    else:
        raise ModelError(f"unsupported constraint {constraint!r}")
    return found


def _literal_vars(constraint: Constraint) -> List[Var]:
    if isinstance(constraint, (ReifiedEq, ReifiedGt)):
        return [constraint.literal]
    if isinstance(constraint, Implication):
        return [lit.var for lit in constraint.premises + constraint.conclusions]
    if isinstance(constraint, (Linear, LexLess)):
        return [lit.var for lit in constraint.enforce]
    return []


# Ground semantics


def _operand(value: Operand, value_of: Callable[[Var], int]) -> int:
    return value_of(value) if isinstance(value, Var) else value


def _lit_true(lit: Lit, value_of: Callable[[Var], int]) -> bool:
    return (value_of(lit.var) == 1) == lit.positive


def holds(constraint: Constraint, value_of: Callable[[Var], int]) -> bool:
    """Evaluates a constraint on concrete values"""

    if isinstance(constraint, Linear):
        if not all(_lit_true(lit, value_of) for lit in constraint.enforce):
            return True
        lhs = sum(coef * value_of(var) for coef, var in constraint.terms)
        return {
            "==": lhs == constraint.rhs,
            "<=": lhs <= constraint.rhs,
            ">=": lhs >= constraint.rhs,
            "!=": lhs != constraint.rhs,
        }[constraint.op]
    if isinstance(constraint, ReifiedEq):
        matched = value_of(constraint.var) == constraint.value
        return value_of(constraint.literal) == int(matched)
    if isinstance(constraint, ReifiedGt):
        above = value_of(constraint.var) > constraint.value
        return value_of(constraint.literal) == int(above)
    if isinstance(constraint, Implication):
        if not all(_lit_true(lit, value_of) for lit in constraint.premises):
            return True
        return any(_lit_true(lit, value_of) for lit in constraint.conclusions)
    if isinstance(constraint, Element):
        index = value_of(constraint.index)
        if not 0 <= index < len(constraint.array):
            return False
        return value_of(constraint.target) == _operand(
            constraint.array[index], value_of
        )
    if isinstance(constraint, LexLess):
        if not all(_lit_true(lit, value_of) for lit in constraint.enforce):
            return True
        left = tuple(_operand(op, value_of) for op in constraint.left)
        right = tuple(_operand(op, value_of) for op in constraint.right)
        return left < right if constraint.strict else left <= right
    if isinstance(constraint, AllDifferentExcept0):
        used = [value_of(var) for var in constraint.vars if value_of(var) != 0]
        return len(used) == len(set(used))
    if isinstance(constraint, Table):
        row = tuple(value_of(var) for var in constraint.vars)
        return row in set(constraint.tuples)
    raise ModelError(f"unsupported constraint {constraint!r}")


# Search configuration and results


class Sense(Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class Mode(Enum):
    FIRST = "first"
    BEST = "best"
    ENUMERATE = "enumerate"


class Status(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    LIMIT_REACHED = "limit_reached"


@dataclass(frozen=True)
class Objective:
    sense: Sense
    terms: Tuple[Term, ...]

    @classmethod
    def maximize(cls, terms: Iterable[Tuple[int, Var]]) -> Objective:
        return cls(Sense.MAXIMIZE, tuple(terms))

    @classmethod
    def minimize(cls, terms: Iterable[Tuple[int, Var]]) -> Objective:
        return cls(Sense.MINIMIZE, tuple(terms))

    def evaluate(self, value_of: Callable[[Var], int]) -> int:
        return sum(coef * value_of(var) for coef, var in self.terms)


@dataclass(frozen=True)
class SearchConfig:
    """
    How to search.

    Limits of 0 mean unlimited. `strategy` is "fixed" (decision variables in
    registration order, smallest value first) or "automatic" (the engine's
    own single threaded heuristics).
    """

    objective: Optional[Objective] = None
    node_limit: int = 0
    time_limit: float = 0.0
    mode: Mode = Mode.BEST
    strategy: str = "fixed"

    def __post_init__(self) -> None:
        if self.node_limit < 0 or self.time_limit < 0:
            raise ModelError("search limits must be non-negative")
        if self.strategy not in ("fixed", "automatic"):
            raise ModelError(f"unknown search strategy {self.strategy!r}")
        if self.mode is Mode.ENUMERATE and self.objective is not None:
            raise ModelError("enumeration does not take an objective")


class Assignment:
    """Values of every model variable, indexed by Var"""

    def __init__(self, values: Sequence[int]) -> None:
        self._values = tuple(values)

    def __getitem__(self, var: Var) -> int:
        return self._values[var.index]

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[int]:
        return iter(self._values)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Assignment) and self._values == other._values

    def __hash__(self) -> int:
        return hash(self._values)

    def truth(self, lit: LitLike) -> bool:
        return _lit_true(as_lit(lit), self.__getitem__)

    def __repr__(self) -> str:
        return f"Assignment({list(self._values)})"


@dataclass(frozen=True)
class Outcome:
    status: Status
    assignment: Optional[Assignment] = None
    objective: Optional[int] = None
    optimal: bool = False
    nodes: int = 0
    solutions: Tuple[Assignment, ...] = ()

    @property
    def is_sat(self) -> bool:
        return self.status is Status.SAT

    @property
    def is_unsat(self) -> bool:
        return self.status is Status.UNSAT


class _Wipeout(Exception):
    pass


class Model:
    """A finite domain model: variables, constraints, root propagation and search"""

    _ids = itertools.count(1)

    def __init__(self, name: str = "model") -> None:
        self._id = next(Model._ids)
        self._name = name
        self._vars: List[Var] = []
        self._declared: List[Tuple[int, int]] = []
        self._lo: List[int] = []
        self._hi: List[int] = []
        self._constraints: List[Constraint] = []
        self._watchers: List[List[int]] = []
        self._queue: Deque[int] = deque()
        self._queued: Set[int] = set()
        self._failed = False

    @property
    def name(self) -> str:
        return self._name

    @property
    def variables(self) -> Tuple[Var, ...]:
        return tuple(self._vars)

    @property
    def constraints(self) -> Tuple[Constraint, ...]:
        return tuple(self._constraints)

    def add_var(
        self, lo: int, hi: int, name: Optional[str] = None, decision: bool = True
    ) -> Var:
        """Registers a variable with domain lo..hi"""

        if lo > hi:
            raise ModelError(f"empty domain {lo}..{hi} for {name or 'variable'}")
        var = Var(len(self._vars), name or f"v{len(self._vars)}", self._id, decision)
        self._vars.append(var)
        self._declared.append((lo, hi))
        self._lo.append(lo)
        self._hi.append(hi)
        self._watchers.append([])
        return var

    def add_bool(self, name: Optional[str] = None, decision: bool = True) -> Var:
        return self.add_var(0, 1, name, decision)

    def _check_var(self, var: Var) -> None:
        if (
            not isinstance(var, Var)
            or var.model_id != self._id
            or not 0 <= var.index < len(self._vars)
        ):
            raise ModelError(f"dangling variable reference {var!r} in {self._name}")

    def post(self, constraint: Constraint) -> None:
        """Adds a constraint; it is propagated at the next domain query or solve"""

        variables = scope(constraint)
        for var in variables:
            self._check_var(var)
        for var in _literal_vars(constraint):
            lo, hi = self._declared[var.index]
            if lo < 0 or hi > 1:
                raise ModelError(f"{var} is used as a literal but is not Boolean")
        if isinstance(constraint, Table) and any(
            len(row) != len(constraint.vars) for row in constraint.tuples
        ):
            raise ModelError("table tuples must match the table arity")

        index = len(self._constraints)
        self._constraints.append(constraint)
        for var_index in {var.index for var in variables}:
            self._watchers[var_index].append(index)
        self._enqueue(index)

    def domain(self, var: Var) -> Tuple[int, int]:
        """Propagated bounds of `var`"""
        self._check_var(var)
        self.propagate()
        return self._lo[var.index], self._hi[var.index]

    @property
    def failed(self) -> bool:
        """True once root propagation proved the model unsatisfiable"""
        return not self.propagate()

    # Root propagation

    def _enqueue(self, index: int) -> None:
        if index not in self._queued:
            self._queued.add(index)
            self._queue.append(index)

    def propagate(self) -> bool:
        while self._queue and not self._failed:
            index = self._queue.popleft()
            self._queued.discard(index)
            changed: List[int] = []
            try:
                self._filter(self._constraints[index], changed)
            except _Wipeout:
                self._failed = True
                _LOGGER.debug(
                    "%s is unsatisfiable at the root: %s",
                    self._name,
                    self._constraints[index],
                )
                break
            for var_index in changed:
                for watcher in self._watchers[var_index]:
                    self._enqueue(watcher)
        return not self._failed

    def _fixed(self, operand: Operand) -> Optional[int]:
        if isinstance(operand, int):
            return operand
        if self._lo[operand.index] == self._hi[operand.index]:
            return self._lo[operand.index]
        return None

    def _bounds(self, operand: Operand) -> Tuple[int, int]:
        if isinstance(operand, int):
            return operand, operand
        return self._lo[operand.index], self._hi[operand.index]

    def _tighten(self, var: Var, lo: int, hi: int, changed: List[int]) -> None:
        index = var.index
        new_lo = max(self._lo[index], lo)
        new_hi = min(self._hi[index], hi)
        if new_lo > new_hi:
            raise _Wipeout()
        if new_lo != self._lo[index] or new_hi != self._hi[index]:
            self._lo[index] = new_lo
            self._hi[index] = new_hi
            changed.append(index)

    def _lit_state(self, lit: Lit) -> Optional[bool]:
        value = self._fixed(lit.var)
        if value is None:
            return None
        return (value == 1) == lit.positive

    def _set_lit(self, lit: Lit, truth: bool, changed: List[int]) -> None:
        value = 1 if truth == lit.positive else 0
        self._tighten(lit.var, value, value, changed)

    def _enforced(self, enforce: Tuple[Lit, ...]) -> Optional[bool]:
        states = [self._lit_state(lit) for lit in enforce]
        if any(state is False for state in states):
            return False
        if all(state is True for state in states):
            return True
        return None

    def _refute(self, enforce: Tuple[Lit, ...], changed: List[int]) -> None:
        """The enforced part is infeasible, so some enforcement literal is false"""
        unknown = [lit for lit in enforce if self._lit_state(lit) is None]
        if not unknown and all(self._lit_state(lit) for lit in enforce):
            raise _Wipeout()
        if len(unknown) == 1:
            self._set_lit(unknown[0], False, changed)

    def _filter(self, constraint: Constraint, changed: List[int]) -> None:
        if isinstance(constraint, Linear):
            self._filter_linear(constraint, changed)
        elif isinstance(constraint, ReifiedEq):
            self._filter_reified_eq(constraint, changed)
        elif isinstance(constraint, ReifiedGt):
            self._filter_reified_gt(constraint, changed)
        elif isinstance(constraint, Implication):
            self._filter_clause(constraint, changed)
        elif isinstance(constraint, Element):
            self._filter_element(constraint, changed)
        elif isinstance(constraint, AllDifferentExcept0):
            self._filter_all_different(constraint, changed)
        elif isinstance(constraint, Table):
            self._filter_table(constraint, changed)
        else:
            self._filter_ground(constraint, changed)

    def _linear_range(self, terms: Tuple[Term, ...]) -> Tuple[int, int]:
        low = high = 0
        for coef, var in terms:
            lo, hi = self._bounds(var)
            low += min(coef * lo, coef * hi)
            high += max(coef * lo, coef * hi)
        return low, high

    def _linear_infeasible(self, constraint: Linear) -> bool:
        low, high = self._linear_range(constraint.terms)
        if constraint.op == "<=":
            return low > constraint.rhs
        if constraint.op == ">=":
            return high < constraint.rhs
        if constraint.op == "==":
            return low > constraint.rhs or high < constraint.rhs
        return low == high == constraint.rhs

    def _bound_le(self, terms: Sequence[Term], rhs: int, changed: List[int]) -> None:
        minimums = []
        for coef, var in terms:
            lo, hi = self._bounds(var)
            minimums.append(coef * lo if coef > 0 else coef * hi)
        least = sum(minimums)
        if least > rhs:
            raise _Wipeout()
        for (coef, var), minimum in zip(terms, minimums):
            slack = rhs - (least - minimum)
            if coef > 0:
                self._tighten(var, self._lo[var.index], slack // coef, changed)
            else:
                self._tighten(var, -(slack // -coef), self._hi[var.index], changed)

    def _filter_linear(self, constraint: Linear, changed: List[int]) -> None:
        state = self._enforced(constraint.enforce)
        if state is False:
            return
        if state is None:
            if self._linear_infeasible(constraint):
                self._refute(constraint.enforce, changed)
            return

        terms = constraint.terms
        if constraint.op in ("<=", "=="):
            self._bound_le(terms, constraint.rhs, changed)
        if constraint.op in (">=", "=="):
            negated = [(-coef, var) for coef, var in terms]
            self._bound_le(negated, -constraint.rhs, changed)
        if constraint.op == "!=":
            free = [(c, v) for c, v in terms if self._fixed(v) is None]
            fixed_sum = sum(
                c * self._lo[v.index] for c, v in terms if (c, v) not in free
            )
            if not free:
                if fixed_sum == constraint.rhs:
                    raise _Wipeout()
            elif len(free) == 1:
                coef, var = free[0]
                remainder = constraint.rhs - fixed_sum
                if remainder % coef == 0:
                    banned = remainder // coef
                    if self._lo[var.index] == banned:
                        self._tighten(var, banned + 1, self._hi[var.index], changed)
                    elif self._hi[var.index] == banned:
                        self._tighten(var, self._lo[var.index], banned - 1, changed)

    def _filter_reified_eq(self, constraint: ReifiedEq, changed: List[int]) -> None:
        literal = Lit(constraint.literal)
        var, value = constraint.var, constraint.value
        lo, hi = self._bounds(var)
        if value < lo or value > hi:
            self._set_lit(literal, False, changed)
        elif lo == hi == value:
            self._set_lit(literal, True, changed)

        state = self._lit_state(literal)
        if state is True:
            self._tighten(var, value, value, changed)
        elif state is False:
            lo, hi = self._bounds(var)
            if lo == value:
                self._tighten(var, value + 1, hi, changed)
            elif hi == value:
                self._tighten(var, lo, value - 1, changed)

    def _filter_reified_gt(self, constraint: ReifiedGt, changed: List[int]) -> None:
        literal = Lit(constraint.literal)
        var, value = constraint.var, constraint.value
        lo, hi = self._bounds(var)
        if lo > value:
            self._set_lit(literal, True, changed)
        elif hi <= value:
            self._set_lit(literal, False, changed)

        state = self._lit_state(literal)
        if state is True:
            self._tighten(var, value + 1, self._hi[var.index], changed)
        elif state is False:
            self._tighten(var, self._lo[var.index], value, changed)

    def _filter_clause(self, constraint: Implication, changed: List[int]) -> None:
        clause = [~lit for lit in constraint.premises] + list(constraint.conclusions)
        unknown = []
        for lit in clause:
            state = self._lit_state(lit)
            if state is True:
                return
            if state is None:
                unknown.append(lit)
        if not unknown:
            raise _Wipeout()
        if len(unknown) == 1:
            self._set_lit(unknown[0], True, changed)

    def _filter_element(self, constraint: Element, changed: List[int]) -> None:
        array, index, target = constraint.array, constraint.index, constraint.target
        self._tighten(index, 0, len(array) - 1, changed)

        t_lo, t_hi = self._bounds(target)
        lo, hi = self._bounds(index)
        # drop index values whose entry cannot reach the target range
        while lo <= hi:
            e_lo, e_hi = self._bounds(array[lo])
            if e_hi >= t_lo and e_lo <= t_hi:
                break
            lo += 1
        while hi >= lo:
            e_lo, e_hi = self._bounds(array[hi])
            if e_hi >= t_lo and e_lo <= t_hi:
                break
            hi -= 1
        self._tighten(index, lo, hi, changed)

        entries = [self._bounds(array[i]) for i in range(lo, hi + 1)]
        self._tighten(
            target, min(e[0] for e in entries), max(e[1] for e in entries), changed
        )
        if lo == hi and isinstance(array[lo], Var):
            t_lo, t_hi = self._bounds(target)
            self._tighten(array[lo], t_lo, t_hi, changed)

    def _filter_all_different(
        self, constraint: AllDifferentExcept0, changed: List[int]
    ) -> None:
        taken: Dict[int, Var] = {}
        for var in constraint.vars:
            value = self._fixed(var)
            if value:
                if value in taken:
                    raise _Wipeout()
                taken[value] = var
        for var in constraint.vars:
            if self._fixed(var) is not None:
                continue
            lo, hi = self._bounds(var)
            while lo in taken and lo != 0 and lo <= hi:
                lo += 1
            while hi in taken and hi != 0 and hi >= lo:
                hi -= 1
            self._tighten(var, lo, hi, changed)

    def _filter_table(self, constraint: Table, changed: List[int]) -> None:
        bounds = [self._bounds(var) for var in constraint.vars]
        supported = [
            row
            for row in constraint.tuples
            if all(lo <= value <= hi for value, (lo, hi) in zip(row, bounds))
        ]
        if not supported:
            raise _Wipeout()
        for column, var in enumerate(constraint.vars):
            values = [row[column] for row in supported]
            self._tighten(var, min(values), max(values), changed)

    def _filter_ground(self, constraint: Constraint, changed: List[int]) -> None:
        operands = scope(constraint)
        if any(self._fixed(var) is None for var in operands):
            return
        if not holds(constraint, lambda var: self._lo[var.index]):
            raise _Wipeout()

    # Search

    def solve(self, config: Optional[SearchConfig] = None) -> Outcome:
        """Searches for an assignment, or the best one under an objective"""

        config = config or SearchConfig()
        if config.objective is not None:
            for _, var in config.objective.terms:
                self._check_var(var)

        if not self.propagate():
            _LOGGER.debug("%s failed during root propagation", self._name)
            return Outcome(Status.UNSAT)

        backend = _CpSatBackend(self)
        outcome = backend.solve(config)

        for assignment in (outcome.assignment,) + outcome.solutions:
            if assignment is None:
                continue
            violations = check_assignment(self, assignment)
            if violations:
                raise SolverError(
                    f"{self._name}: engine returned an invalid assignment: "
                    + "; ".join(violations[:5])
                )

        _LOGGER.debug(
            "%s: %s vars, %s constraints -> %s (objective=%s, nodes=%s)",
            self._name,
            len(self._vars),
            len(self._constraints),
            outcome.status.value,
            outcome.objective,
            outcome.nodes,
        )
        return outcome


def check_assignment(model: Model, assignment: Sequence[int]) -> List[str]:
    """Re-evaluates every declared domain and constraint on concrete values"""

    values = list(assignment)
    violations: List[str] = []
    if len(values) != len(model.variables):
        return [f"expected {len(model.variables)} values, got {len(values)}"]

    for var in model.variables:
        lo, hi = model._declared[var.index]  # pylint: disable=protected-access
        if not lo <= values[var.index] <= hi:
            violations.append(f"{var}={values[var.index]} outside {lo}..{hi}")

    def value_of(var: Var) -> int:
        return values[var.index]

    for constraint in model.constraints:
        if not holds(constraint, value_of):
            violations.append(f"violated {constraint}")
    return violations


class _Collector(cp_model.CpSolverSolutionCallback):
    def __init__(self, variables: Sequence[cp_model.IntVar]) -> None:
        super().__init__()
        self._variables = variables
        self.solutions: List[Assignment] = []

    def on_solution_callback(self) -> None:
        self.solutions.append(Assignment([self.Value(v) for v in self._variables]))


class _CpSatBackend:
    """Translates a Model into CP-SAT and runs it deterministically"""

    def __init__(self, model: Model) -> None:
        self._model = model
        self._cp = cp_model.CpModel()
        self._vars: List[cp_model.IntVar] = []

        # pylint: disable=protected-access
        for var in model.variables:
            lo, hi = model._lo[var.index], model._hi[var.index]
            declared_lo, declared_hi = model._declared[var.index]
            if declared_lo >= 0 and declared_hi <= 1:
                cp_var = self._cp.NewBoolVar(var.name)
                if lo == hi:
                    self._cp.Add(cp_var == lo)
            else:
                cp_var = self._cp.NewIntVar(lo, hi, var.name)
            self._vars.append(cp_var)

        for constraint in model.constraints:
            self._translate(constraint)

        decisions = [self._vars[var.index] for var in model.variables if var.decision]
        if decisions:
            self._cp.AddDecisionStrategy(
                decisions, cp_model.CHOOSE_FIRST, cp_model.SELECT_MIN_VALUE
            )

    def _var(self, var: Var):
        return self._vars[var.index]

    def _lit(self, lit: Lit):
        cp_var = self._vars[lit.var.index]
        return cp_var if lit.positive else cp_var.Not()

    def _operand(self, operand: Operand):
        return operand if isinstance(operand, int) else self._vars[operand.index]

    def _expr(self, terms: Sequence[Term]):
        return cp_model.LinearExpr.WeightedSum(
            [self._var(var) for _, var in terms], [coef for coef, _ in terms]
        )

    def _enforced(self, constraint, enforce: Tuple[Lit, ...]) -> None:
        if enforce:
            constraint.OnlyEnforceIf([self._lit(lit) for lit in enforce])

    def _contradiction(self, enforce: Tuple[Lit, ...]) -> None:
        """At least one enforcement literal is false, or the model is infeasible"""
        if enforce:
            self._cp.AddBoolOr([self._lit(~lit) for lit in enforce])
        else:
            never = self._cp.NewBoolVar("never")
            self._cp.Add(never == 0)
            self._cp.AddBoolOr([never])

    def _translate(self, constraint: Constraint) -> None:
        cp = self._cp
        if isinstance(constraint, Linear):
            if not constraint.terms:
                if not holds(constraint, lambda var: 0):
                    self._contradiction(constraint.enforce)
                return
            expr = self._expr(constraint.terms)
            rhs = constraint.rhs
            built = {
                "==": lambda: cp.Add(expr == rhs),
                "<=": lambda: cp.Add(expr <= rhs),
                ">=": lambda: cp.Add(expr >= rhs),
                "!=": lambda: cp.Add(expr != rhs),
            }[constraint.op]()
            self._enforced(built, constraint.enforce)
        elif isinstance(constraint, ReifiedEq):
            literal, var = self._var(constraint.literal), self._var(constraint.var)
            cp.Add(var == constraint.value).OnlyEnforceIf(literal)
            cp.Add(var != constraint.value).OnlyEnforceIf(literal.Not())
        elif isinstance(constraint, ReifiedGt):
            literal, var = self._var(constraint.literal), self._var(constraint.var)
            cp.Add(var >= constraint.value + 1).OnlyEnforceIf(literal)
            cp.Add(var <= constraint.value).OnlyEnforceIf(literal.Not())
        elif isinstance(constraint, Implication):
            cp.AddBoolOr(
                [self._lit(~lit) for lit in constraint.premises]
                + [self._lit(lit) for lit in constraint.conclusions]
            )
        elif isinstance(constraint, Element):
            cp.AddElement(
                self._var(constraint.index),
                [self._operand(op) for op in constraint.array],
                self._var(constraint.target),
            )
        elif isinstance(constraint, LexLess):
            self._translate_lex(constraint)
        elif isinstance(constraint, AllDifferentExcept0):
            nonzero = []
            for var in constraint.vars:
                flag = cp.NewBoolVar(f"{var.name}_nz")
                cp.Add(self._var(var) != 0).OnlyEnforceIf(flag)
                cp.Add(self._var(var) == 0).OnlyEnforceIf(flag.Not())
                nonzero.append(flag)
            for i, j in itertools.combinations(range(len(constraint.vars)), 2):
                cp.Add(
                    self._var(constraint.vars[i]) != self._var(constraint.vars[j])
                ).OnlyEnforceIf([nonzero[i], nonzero[j]])
        elif isinstance(constraint, Table):
            cp.AddAllowedAssignments(
                [self._var(var) for var in constraint.vars],
                [list(row) for row in constraint.tuples],
            )
        else:
            raise ModelError(f"unsupported constraint {constraint!r}")

    def _bounds(self, operand: Operand) -> Tuple[int, int]:
        if isinstance(operand, int):
            return operand, operand
        # pylint: disable=protected-access
        return self._model._lo[operand.index], self._model._hi[operand.index]

    def _compare(self, left: Operand, right: Operand):
        """(left < right, left == right) as Python bools when decided by bounds"""
        l_lo, l_hi = self._bounds(left)
        r_lo, r_hi = self._bounds(right)

        if l_hi < r_lo:
            less = True
        elif l_lo >= r_hi:
            less = False
        else:
            less = self._cp.NewBoolVar("lex_lt")
            a, b = self._operand(left), self._operand(right)
            self._cp.Add(a < b).OnlyEnforceIf(less)
            self._cp.Add(a >= b).OnlyEnforceIf(less.Not())

        if l_lo == l_hi == r_lo == r_hi:
            equal = True
        elif l_hi < r_lo or r_hi < l_lo:
            equal = False
        else:
            equal = self._cp.NewBoolVar("lex_eq")
            a, b = self._operand(left), self._operand(right)
            self._cp.Add(a == b).OnlyEnforceIf(equal)
            self._cp.Add(a != b).OnlyEnforceIf(equal.Not())
        return less, equal

    def _conjunction(self, first, second):
        if first is False or second is False:
            return False
        if first is True:
            return second
        if second is True:
            return first
        both = self._cp.NewBoolVar("lex_and")
        self._cp.AddImplication(both, first)
        self._cp.AddImplication(both, second)
        self._cp.AddBoolOr([first.Not(), second.Not(), both])
        return both

    def _translate_lex(self, constraint: LexLess) -> None:
        prefix = True
        witnesses = []
        for left, right in zip(constraint.left, constraint.right):
            less, equal = self._compare(left, right)
            witnesses.append(self._conjunction(prefix, less))
            prefix = self._conjunction(prefix, equal)
            if prefix is False:
                break
        if not constraint.strict:
            witnesses.append(prefix)

        if any(witness is True for witness in witnesses):
            return
        clause = [witness for witness in witnesses if witness is not False]
        if not clause:
            self._contradiction(constraint.enforce)
            return
        built = self._cp.AddBoolOr(clause)
        self._enforced(built, constraint.enforce)

    def solve(self, config: SearchConfig) -> Outcome:
        cp = self._cp
        objective = config.objective
        if objective is not None:
            expr = self._expr(objective.terms) if objective.terms else 0
            if objective.sense is Sense.MAXIMIZE:
                cp.Maximize(expr)
            else:
                cp.Minimize(expr)

        solver = cp_model.CpSolver()
        parameters = solver.parameters
        parameters.num_workers = 1
        parameters.random_seed = 0
        if config.strategy == "fixed":
            parameters.search_branching = cp_model.FIXED_SEARCH
            # presolve may reorder or substitute decision variables
            parameters.cp_model_presolve = False
        if config.time_limit:
            parameters.max_time_in_seconds = config.time_limit
        if config.node_limit:
            parameters.max_number_of_conflicts = config.node_limit
        if config.mode is Mode.FIRST:
            parameters.stop_after_first_solution = True
        if config.mode is Mode.ENUMERATE:
            parameters.enumerate_all_solutions = True

        collector = _Collector(self._vars)
        status = solver.Solve(cp, collector)
        nodes = solver.NumBranches()

        if status == cp_model.MODEL_INVALID:
            raise SolverError(f"engine rejected the model: {cp.Validate()}")
        if status == cp_model.INFEASIBLE:
            return Outcome(Status.UNSAT, nodes=nodes)
        if status == cp_model.UNKNOWN:
            return Outcome(Status.LIMIT_REACHED, nodes=nodes)

        if config.mode is Mode.ENUMERATE:
            solutions = tuple(collector.solutions)
            complete = status == cp_model.OPTIMAL
            return Outcome(
                Status.SAT if complete else Status.LIMIT_REACHED,
                assignment=solutions[0] if solutions else None,
                nodes=nodes,
                solutions=solutions,
            )

        assignment = Assignment([solver.Value(v) for v in self._vars])
        value = None
        if objective is not None:
            value = objective.evaluate(assignment.__getitem__)
        optimal = status == cp_model.OPTIMAL
        if objective is not None and not optimal and config.mode is Mode.BEST:
            status_out = Status.LIMIT_REACHED
        else:
            status_out = Status.SAT
        return Outcome(
            status_out,
            assignment=assignment,
            objective=value,
            optimal=optimal and objective is not None,
            nodes=nodes,
        )
