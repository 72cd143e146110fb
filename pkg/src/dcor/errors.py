"""Exception types raised across the package."""


class DcorError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DcorError, ValueError):
    """Operand shapes are incompatible."""


class DegenerateNeighborhoodError(DcorError, ValueError):
    """A softmax row or segment has no admissible entries."""


class ContractError(DcorError, ValueError):
    """A caller violated an operation precondition."""


class ParseError(DcorError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None for whole-file problems."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class SpecError(DcorError, ValueError):
    """Invalid generator or configuration parameters."""


class BudgetError(DcorError, ValueError):
    """Requested anomaly injection does not fit in the graph."""


class UndefinedAUCError(DcorError, ValueError):
    """AUC requested for labels containing a single class."""


class TrainingDivergedError(DcorError, RuntimeError):
    """A loss became non-finite during training."""

    def __init__(self, epoch: int, message: str = ""):
        super().__init__(f"training diverged at epoch {epoch}" + (f": {message}" if message else ""))
        self.epoch = epoch
