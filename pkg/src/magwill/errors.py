"""Error hierarchy for magwill."""

from typing import Any, Optional


class MagwillError(Exception):
    """Base exception for all magwill errors."""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        if not self.details:
            return self.message
        shown = ", ".join(f"{k}={v}" for k, v in self.details.items() if _is_scalar(v))
        return f"{self.message} ({shown})" if shown else self.message


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (int, float, str, bool)) or value is None


class ValidationError(MagwillError):
    """Input validation errors (malformed spaces, specs, grids, files)."""

    exit_code = 2


class UnsupportedDomainError(ValidationError):
    """Domain kind or dimension not supported by the requested operation."""

    pass


class NonConvexSpecError(ValidationError):
    """Operation requires a convex body (e.g. intrinsic volumes of a torus)."""

    pass


class SolverError(MagwillError):
    """Numerical solver failures."""

    exit_code = 3


class NotPositiveDefiniteError(SolverError):
    """Cholesky factorization of the similarity matrix failed."""

    def __init__(
        self,
        message: str,
        condition_estimate: Optional[float] = None,
        details: Optional[dict[str, Any]] = None,
    ):
        merged = {"condition_estimate": condition_estimate, **(details or {})}
        super().__init__(message, merged)
        self.condition_estimate = condition_estimate


class IllConditionedError(NotPositiveDefiniteError):
    """Factorization succeeded but the residual contract cannot be honored."""

    pass


class BudgetExceededError(SolverError):
    """Refinement ladder reached N_max before converging (strict mode only)."""

    def __init__(self, message: str, report: Any = None, details: Optional[dict[str, Any]] = None):
        super().__init__(message, details)
        self.report = report


class RankDeficientError(SolverError):
    """Least-squares design matrix is numerically singular."""

    pass


class CalibrationUnstableError(SolverError):
    """Calibrated constant is not resolved from zero by its uncertainty."""

    pass


class MeshError(MagwillError):
    """Surface mesh errors."""

    exit_code = 4


class DegenerateMeshError(MeshError):
    """Zero-area triangle, non-manifold or inconsistently oriented edge."""

    pass


class MissingCalibrationError(MagwillError):
    """No calibrated lambda_3 available."""

    exit_code = 5


class MissingLambdaError(MissingCalibrationError):
    """c3 requested from a prediction built without lambda_n."""

    pass


class SymbolError(MagwillError):
    """Symbol calculus errors."""

    exit_code = 2


class CutoffTooLowError(SymbolError):
    """Requested truncation reaches below what the inputs determine."""

    pass


class NotEllipticError(SymbolError):
    """Principal symbol is not invertible at a probe point."""

    pass


class UnboundScalarError(SymbolError):
    """A formal coefficient has no function bound to it."""

    pass


class JetTooShallowError(SymbolError):
    """Symbol references derivatives of S beyond the stored jet."""

    pass


class SymbolFormatError(SymbolError):
    """Symbol cannot be written as (or read from) a canonical term list."""

    pass
