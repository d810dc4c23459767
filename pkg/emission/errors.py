"""
Emission Errors

Exception hierarchy shared by the numerical core, the runner and the CLI.
"""

from typing import List, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .types import TrajectoryRecord


class EmissionError(Exception):
    """Base class for all errors raised by the emission package"""


class ConfigurationError(EmissionError):
    """Invalid run or sweep configuration"""

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []


class DomainError(EmissionError, ValueError):
    """Argument outside the domain of a physical function"""


class ConsistencyError(EmissionError):
    """Internal-consistency check failed (non-real norm, negative occupation, ...)"""


class ConvergenceError(EmissionError):
    """Self-consistency iteration did not converge"""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class EomSolveError(EmissionError):
    """The regularized equations of motion could not be solved"""


class PropagationError(EmissionError):
    """Propagation aborted; carries the trajectory recorded up to the failure"""

    def __init__(self, message: str, partial: Optional["TrajectoryRecord"] = None):
        super().__init__(message)
        self.partial = partial
