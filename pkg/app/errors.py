from typing import Any, List, Optional


class SimulationError(Exception):
    """
    Base class for everything the simulation stack raises on purpose.
    """


class ParameterError(SimulationError):
    """
    Vessel parameters that do not yield a usable mass matrix.
    """


class InstabilityError(SimulationError):
    """
    A run diverged. Carries the records produced before the abort.
    """
    def __init__(self, message: str, records: Optional[List[Any]] = None, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.records = records or []
        self.diagnostics = diagnostics or {}


class DriveBoundError(SimulationError):
    """
    The controller demanded a drive outside the saturation model's assumed bound.
    Carries the records produced before the abort and the actuator state.
    """
    def __init__(
        self,
        message: str,
        t: float,
        norm: float,
        bound: float,
        records: Optional[List[Any]] = None,
        diagnostics: Optional[dict] = None,
    ):
        super().__init__(message)
        self.t = t
        self.norm = norm
        self.bound = bound
        self.records = records or []
        self.diagnostics = diagnostics or {}


class ReportingError(SimulationError):
    """
    Writing or reading a run artifact failed.
    """
    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path
