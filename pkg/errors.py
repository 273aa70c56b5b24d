"""
Exception hierarchy for the leakage-control toolkit.

Value-type invariants are enforced by pydantic and surface as
``pydantic.ValidationError``; the classes below cover failures of the
numerical operations themselves.
"""

from typing import Optional


class LeakageControlError(Exception):
    """Base class for all toolkit errors"""


class GridError(LeakageControlError):
    """Invalid grid construction or mismatched grids"""


class BasisError(LeakageControlError):
    """Stationary-state solve failed or a basis lookup was invalid"""

    def __init__(self, message: str, r: Optional[float] = None):
        super().__init__(message)
        self.r = r


class PropagationError(LeakageControlError):
    """Time propagation diverged"""

    def __init__(self, message: str, step: int, norm: float):
        super().__init__(f"{message} (step={step}, norm={norm})")
        self.step = step
        self.norm = norm


class FitError(LeakageControlError):
    """Fringe fit could not be performed"""


class ExperimentError(LeakageControlError):
    """An experiment could not be assembled or completed"""


class ConfigError(LeakageControlError):
    """Configuration file problem, tied to a key and line where possible"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        location = []
        if key is not None:
            location.append(f"key '{key}'")
        if line is not None:
            location.append(f"line {line}")
        text = f"{message} ({', '.join(location)})" if location else message
        super().__init__(text)
        self.key = key
        self.line = line
