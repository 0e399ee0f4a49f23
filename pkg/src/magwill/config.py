"""Numeric defaults for magwill.

Every public routine takes its tolerances as keyword arguments; these models hold the
defaults and can be passed whole where a routine accepts ``config=``.
"""

from pydantic import BaseModel, Field


class SolverConfig(BaseModel):
    """Kernel solve policy (no regularization, ill-conditioning is refused)."""

    condition_limit: float = Field(default=1e14, gt=1.0, description="Refuse solves above this")
    residual_tol: float = Field(default=1e-9, gt=0.0, description="max |Z w - 1| accepted")


class SamplingConfig(BaseModel):
    """Finite-subset refinement settings."""

    spacing_factor: float = Field(default=0.25, gt=0.0, description="Required h * R at the end")
    ladder_start: int = Field(default=3, ge=1, description="Points at the first refinement level")
    candidate_pool_factor: int = Field(default=8, ge=1)
    min_candidate_pool: int = Field(default=4096, ge=1)
    membership_tol: float = Field(default=1e-12, ge=0.0)


class MonteCarloConfig(BaseModel):
    """Stratified Monte Carlo settings for Steiner volumes."""

    chunk_size: int = Field(default=2**18, ge=1)
    newton_iterations: int = Field(default=80, ge=1)


class QuadratureConfig(BaseModel):
    """Surface quadrature settings."""

    quad_order: int = Field(default=128, ge=4)


DEFAULT_SOLVER = SolverConfig()
DEFAULT_SAMPLING = SamplingConfig()
DEFAULT_MONTE_CARLO = MonteCarloConfig()
DEFAULT_QUADRATURE = QuadratureConfig()
