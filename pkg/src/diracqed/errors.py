"""Exception hierarchy.

Each family carries the process exit code the CLI reports for it.
"""


class SimulationError(Exception):
    exit_code = 1


class ValidationError(SimulationError, ValueError):
    """Bad parameters, shapes or configuration."""

    exit_code = 2


class ShapeError(ValidationError):
    pass


class DriveMisuseError(ValidationError):
    pass


class SingularMappingError(ValidationError):
    pass


class IntegrationError(SimulationError, RuntimeError):
    """Time integration lost accuracy (norm or trace drift, negativity)."""

    exit_code = 3


class TruncationError(IntegrationError):
    """Fock truncation is too small for the state being evolved."""


class AnalysisError(SimulationError, RuntimeError):
    exit_code = 4


class GridCoverageError(AnalysisError):
    pass


class GridMismatchError(AnalysisError):
    pass


class TruncationWarning(UserWarning):
    pass
