"""Utility functions for magwill."""

import json
import math
from datetime import datetime, timezone
from typing import Any, Union

import numpy as np
from scipy.special import gamma

from magwill.errors import ValidationError


def unit_ball_volume(k: int) -> float:
    """Volume omega_k of the k-dimensional unit ball (omega_0 = 1)."""
    if k < 0:
        raise ValidationError("Dimension must be nonnegative", details={"k": k})
    return float(math.pi ** (k / 2) / gamma(k / 2 + 1))


def expansion_norm(n: int) -> float:
    """The normalization n! * omega_n of the magnitude expansion."""
    return math.factorial(n) * unit_ball_volume(n)


def parse_grid(text: str) -> list[float]:
    """
    Parse a grid given as ``start:stop:count`` or a comma separated list.

    Args:
        text: Grid description, e.g. ``2:6:5`` or ``1,2,4``

    Returns:
        List of floats (linspace for the colon form)
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError(text)
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError(text)
            return [float(v) for v in np.linspace(start, stop, count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ValidationError(f"Malformed grid: {text!r}") from e


def validate_grid(grid: Any, name: str = "R_grid", positive: bool = True) -> np.ndarray:
    """Check a grid is nonempty, finite, strictly increasing and (optionally) positive."""
    arr = np.asarray(grid, dtype=float).ravel()
    if arr.size == 0:
        raise ValidationError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    if positive and np.any(arr <= 0):
        raise ValidationError(f"{name} must be positive", details={"min": float(arr.min())})
    if np.any(np.diff(arr) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")
    return arr


def parse_domain(spec: Union[str, dict[str, Any]]) -> Any:
    """
    Parse a DomainSpec from JSON text, a dict, or a bare kind name.

    A bare ``ball`` means the unit ball; other kinds need their parameters.
    """
    import pydantic

    from magwill.types import domain_adapter

    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("{"):
            try:
                payload: Any = json.loads(text)
            except json.JSONDecodeError as e:
                raise ValidationError("Domain JSON is malformed", details={"error": str(e)}) from e
        else:
            payload = {"kind": text}
    else:
        payload = spec
    try:
        return domain_adapter.validate_python(payload)
    except pydantic.ValidationError as e:
        raise ValidationError("Invalid domain spec", details={"error": str(e)}) from e


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator keyed by (seed, *keys), independent of evaluation order."""
    return np.random.default_rng([int(seed), *[int(k) for k in keys]])


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def weighted_lstsq(
    A: np.ndarray, b: np.ndarray, weights: np.ndarray, rcond: float = 1e-12
) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Solve min || sqrt(weights) * (A x - b) || by SVD.

    Args:
        A: (m, k) design matrix
        b: (m,) observations
        weights: (m,) nonnegative row weights (1 / variance for calibrated errors)
        rcond: Singular values below rcond * s_max count as rank loss

    Returns:
        (coefficients, standard errors, weighted residual norm)

    Raises:
        RankDeficientError: Design matrix numerically singular
    """
    from magwill.errors import RankDeficientError

    sw = np.sqrt(np.asarray(weights, dtype=float))
    Aw = A * sw[:, None]
    bw = b * sw
    U, s, Vt = np.linalg.svd(Aw, full_matrices=False)
    if s.size == 0 or s[-1] <= rcond * s[0]:
        raise RankDeficientError(
            "Design matrix is numerically singular",
            details={"smallest_singular": float(s[-1]) if s.size else 0.0, "columns": A.shape[1]},
        )
    x = Vt.T @ ((U.T @ bw) / s)
    err = np.sqrt(np.sum((Vt.T / s) ** 2, axis=1))
    residual = float(np.linalg.norm(Aw @ x - bw))
    return x, err, residual
