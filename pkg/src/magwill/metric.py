"""Magnitude of finite metric spaces via positive-definite kernel solves."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from magwill.config import DEFAULT_SOLVER, SolverConfig
from magwill.errors import (
    IllConditionedError,
    MagwillError,
    NotPositiveDefiniteError,
    ValidationError,
)
from magwill.types import FiniteMetricSpace, MagnitudeCurve, MagnitudeSample, WeightVector
from magwill.utils import validate_grid

logger = logging.getLogger(__name__)


def _check_scale(R: float) -> float:
    if not np.isfinite(R) or R <= 0:
        raise ValidationError("Scale R must be a positive real", details={"R": R})
    return float(R)


def similarity_matrix(space: FiniteMetricSpace, R: float) -> np.ndarray:
    """
    Kernel matrix Z[i, j] = exp(-R * d(i, j)).

    Args:
        space: Finite metric space
        R: Scale parameter (> 0)

    Returns:
        Symmetric (N, N) array with unit diagonal and entries in (0, 1]
    """
    R = _check_scale(R)
    return np.exp(-R * space.dist)


def _condition_from_factor(c: np.ndarray) -> float:
    diag = np.abs(np.diag(c))
    return float((diag.max() / diag.min()) ** 2)


def weighting(
    space: FiniteMetricSpace, R: float, config: Optional[SolverConfig] = None
) -> WeightVector:
    """
    Solve Z w = 1 by Cholesky factorization.

    No jitter or regularization is applied: a failing factorization means the
    kernel is not (numerically) positive definite and is reported as such.

    Args:
        space: Finite metric space
        R: Scale parameter (> 0)
        config: Solver tolerances

    Returns:
        WeightVector with residual and condition estimate

    Raises:
        NotPositiveDefiniteError: Factorization failed
        IllConditionedError: Condition estimate or residual outside the contract
    """
    cfg = config or DEFAULT_SOLVER
    Z = similarity_matrix(space, R)
    n = Z.shape[0]
    try:
        factor = cho_factor(Z, lower=True, check_finite=False)
    except LinAlgError as e:
        cond = float(np.linalg.cond(Z)) if n <= 2000 else None
        raise NotPositiveDefiniteError(
            "Similarity matrix is not positive definite",
            condition_estimate=cond,
            details={"R": R, "n_points": n},
        ) from e

    cond = _condition_from_factor(factor[0])
    if cond > cfg.condition_limit:
        raise IllConditionedError(
            "Similarity matrix too ill-conditioned for the residual contract",
            condition_estimate=cond,
            details={"R": R, "n_points": n, "limit": cfg.condition_limit},
        )
    ones = np.ones(n)
    w = cho_solve(factor, ones, check_finite=False)
    residual = float(np.max(np.abs(Z @ w - ones)))
    if residual > cfg.residual_tol:
        raise IllConditionedError(
            "Weight residual exceeds tolerance",
            condition_estimate=cond,
            details={"R": R, "n_points": n, "residual": residual},
        )
    logger.debug("weighting N=%d R=%g cond~%.3g residual=%.3g", n, R, cond, residual)
    return WeightVector(w=w, R=R, residual=residual, condition_estimate=cond)


def magnitude(space: FiniteMetricSpace, R: float, config: Optional[SolverConfig] = None) -> float:
    """
    Magnitude Mag(X, R d) as the sum of the weighting.

    Raises:
        NotPositiveDefiniteError: Propagated from the kernel solve
    """
    return float(np.sum(weighting(space, R, config).w))


def _curve_sample(space: FiniteMetricSpace, R: float, config: Optional[SolverConfig]) -> MagnitudeSample:
    try:
        wv = weighting(space, R, config)
    except MagwillError as e:
        logger.warning("magnitude at R=%g failed: %s", R, e)
        cond = e.details.get("condition_estimate")
        return MagnitudeSample(
            R=R, value=None, n_points=space.n_points, condition_estimate=cond, failed=True,
            error=e.message,
        )
    return MagnitudeSample(
        R=R,
        value=float(np.sum(wv.w)),
        n_points=space.n_points,
        condition_estimate=wv.condition_estimate,
    )


def magnitude_curve(
    space: FiniteMetricSpace,
    R_grid: Any,
    config: Optional[SolverConfig] = None,
    threads: int = 1,
) -> MagnitudeCurve:
    """
    Evaluate the magnitude function over an increasing grid.

    Failures at individual grid points are recorded on the sample
    (``failed=True``) rather than raised.

    Args:
        space: Finite metric space
        R_grid: Strictly increasing positive scales
        config: Solver tolerances
        threads: Worker threads; output order always follows the grid

    Returns:
        MagnitudeCurve with one sample per grid point
    """
    grid = validate_grid(R_grid)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda r: _curve_sample(space, float(r), config), grid))
    else:
        samples = [_curve_sample(space, float(r), config) for r in grid]
    return MagnitudeCurve(samples=samples)
