"""
Exception hierarchy for robust fair clustering
Every failure raised by the core package derives from RobustFairError.
"""

from typing import Optional


class RobustFairError(Exception):
    """Base class for all library errors."""


class InstanceError(RobustFairError):
    """Problem data could not be loaded or an id is out of range."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        context = []
        if row is not None:
            context.append(f"row {row}")
        if column is not None:
            context.append(f"column '{column}'")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class NoiseSpecError(RobustFairError):
    """Malformed error-model specification or unusable noise parameters."""


class BoundCollapseError(NoiseSpecError):
    """Automatic proportion bounds collapse for a group."""

    def __init__(self, group: int, message: str):
        self.group = group
        super().__init__(f"group {group}: {message}")


class UncertaintyBudgetError(RobustFairError):
    """Enumeration of the uncertainty set exceeded its budget."""


class LPIndeterminateError(RobustFairError):
    """Phase-1 optimum fell in the band between feasible and infeasible."""

    def __init__(self, gap: float, tol: float, radius: Optional[float] = None, reason: Optional[str] = None):
        self.gap = gap
        self.tol = tol
        self.radius = radius
        where = f" at R={radius}" if radius is not None else ""
        if reason is None:
            reason = f"phase-1 optimum {gap:.3e} is within ({tol:.1e}, {10 * tol:.1e})"
        super().__init__(f"indeterminate LP verdict{where}: {reason}")


class FlowRoundingError(RobustFairError):
    """No saturating integral flow was found for a fractional assignment."""


class AuditStructureError(RobustFairError):
    """A clustering handed to the auditor is structurally invalid."""

    def __init__(self, message: str, center: Optional[int] = None, point: Optional[int] = None):
        self.center = center
        self.point = point
        super().__init__(message)


class InfeasibleInstanceError(RobustFairError):
    """No robust fair clustering exists for the instance and noise parameters."""

    def __init__(self, message: str, groups: Optional[list] = None):
        self.groups = groups or []
        super().__init__(message)
