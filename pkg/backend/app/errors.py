class SimulationError(Exception):
    """Base class for every error the simulator reports to its callers."""


class TopologyError(SimulationError, ValueError):
    """Generator parameters that no network of the requested family satisfies."""


class DuplexFormatError(SimulationError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SnapshotError(SimulationError):
    pass


class CellFailedError(SimulationError):
    def __init__(self, alpha: float, replicate: int, cause: BaseException):
        super().__init__(f"cell alpha={alpha:g} replicate={replicate} failed: {cause}")
        self.alpha = alpha
        self.replicate = replicate


class UnknownMeasureError(SimulationError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown measure"


class EmptySelectionError(SimulationError):
    pass
