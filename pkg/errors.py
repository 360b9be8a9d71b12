"""
Strataflow Errors

Exception hierarchy shared by the simulation, density, stratification and
regularity pipelines. Conditions that the pipelines treat as ordinary outcomes
(empty slices, singular time not found, density limit not converged) are
returned as values instead.
"""

from typing import Optional


class StrataflowError(Exception):
    """Base class for all strataflow failures"""


class InvalidInputError(StrataflowError):
    """Input violates an operation's preconditions"""


class OutOfRangeError(StrataflowError):
    """Requested time or scale lies outside the flow's spacetime extent"""


class DataMissingError(StrataflowError):
    """Curvature or normal data required by an operation is absent"""


class SimulationDegenerateError(StrataflowError):
    """Simulation left its domain of validity (self-intersection, non-graphical profile)"""

    def __init__(self, message: str, last_valid_time: Optional[float] = None):
        super().__init__(message)
        self.last_valid_time = last_valid_time

    def __str__(self) -> str:
        base = super().__str__()
        if self.last_valid_time is None:
            return base
        return f"{base} (last valid time {self.last_valid_time:.6g})"


class StepSizeError(StrataflowError):
    """Time step violates the explicit stability bound"""


class CaseViolationError(StrataflowError):
    """Inputs violate the preconditions of a cone-splitting or quasistatic case"""

    def __init__(self, inequality: str):
        super().__init__(f"case precondition failed: {inequality}")
        self.inequality = inequality


class PrecisionError(StrataflowError):
    """Discretization too coarse for the requested estimate"""


class TrackParseError(StrataflowError):
    """Malformed FlowTrack file"""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConfigError(StrataflowError):
    """Run or initial-condition configuration is invalid"""


class ConfigMismatchError(StrataflowError):
    """Artifacts produced from different configurations cannot be aggregated"""
