""" Exceptions raised by the blueprint optimizer. """

from __future__ import annotations

from typing import Iterable, Optional


class BlueprintOptimizerError(Exception):
    """Base class for every error raised by this package"""


class InstanceError(BlueprintOptimizerError):
    """An instance document is well formed but its content is unusable"""


class InstanceSyntaxError(InstanceError):
    """An instance document could not be parsed"""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class ModelError(BlueprintOptimizerError):
    """A constraint model was built incorrectly"""


class SolverError(BlueprintOptimizerError):
    """The search backend misbehaved"""


class SearchLimitError(BlueprintOptimizerError):
    """A stage hit its node or time limit before it could conclude"""

    def __init__(self, stage: str) -> None:
        super().__init__(f"{stage} reached its search limit")
        self.stage = stage


class ConfigError(BlueprintOptimizerError):
    """A run configuration holds an unusable value"""


class DocumentError(BlueprintOptimizerError):
    """A blueprint, stage result or report document is unreadable"""


class LedgerError(BlueprintOptimizerError):
    """An attempt was recorded twice"""


class InconsistentInputsError(BlueprintOptimizerError):
    """Stage artefacts handed to an operation do not belong together"""


class SimulationError(BlueprintOptimizerError):
    """The steady state flow simulation did not settle"""


class BlueprintStringError(BlueprintOptimizerError):
    """A blueprint string could not be encoded or decoded"""


class UnsupportedEntityError(BlueprintStringError):
    def __init__(self, names: Iterable[str], message: Optional[str] = None) -> None:
        self.names = sorted(set(names))
        super().__init__(message or f"unsupported entities: {', '.join(self.names)}")


class UnmappedItemError(BlueprintStringError):
    def __init__(self, item: int) -> None:
        super().__init__(f"no name mapped for item {item}")
        self.item = item
