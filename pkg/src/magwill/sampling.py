"""Magnitude of compact Euclidean domains as a supremum over nested finite subsets."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal, Optional

import numpy as np

from magwill.config import DEFAULT_SAMPLING, SamplingConfig, SolverConfig
from magwill.errors import BudgetExceededError, MagwillError, UnsupportedDomainError, ValidationError
from magwill.metric import weighting
from magwill.types import (
    EstimateReport,
    FiniteMetricSpace,
    MagnitudeCurve,
    MagnitudeSample,
    PointCloudSpec,
)
from magwill.utils import make_rng, validate_grid

logger = logging.getLogger(__name__)

Strategy = Literal["grid", "farthest_point"]


def interval_magnitude_exact(length: float, R: float) -> float:
    """
    Magnitude of the interval [0, length] at scale R: 1 + length * R / 2.

    Args:
        length: Interval length (>= 0; zero is the one-point space)
        R: Scale parameter (> 0)
    """
    if length < 0 or R <= 0:
        raise ValidationError("Need length >= 0 and R > 0", details={"length": length, "R": R})
    return 1.0 + length * R / 2.0


def equispaced_interval_magnitude(length: float, n_points: int, R: float) -> float:
    """Magnitude of n_points equally spaced points spanning [0, length]."""
    if n_points < 1:
        raise ValidationError("Need at least one point")
    if n_points == 1:
        return 1.0
    h = length / (n_points - 1)
    return 1.0 + (n_points - 1) * math.tanh(R * h / 2.0)


def ball_magnitude_exact(radius: float, R: float) -> float:
    """Magnitude of the solid 3-ball of given radius at scale R."""
    t = radius * R
    return 1.0 + 2.0 * t + t**2 + t**3 / 6.0


@dataclass(frozen=True)
class _OrderedSample:
    """Points in refinement order; every prefix is a valid nested sample."""

    points: np.ndarray
    level_counts: Optional[np.ndarray] = None
    level_spacing: Optional[np.ndarray] = None
    fill: Optional[np.ndarray] = None

    def spacing(self, n: int) -> Optional[float]:
        """Spacing of the first n points (finest complete lattice level, or 2x fill distance)."""
        if self.level_counts is not None and self.level_spacing is not None:
            complete = np.nonzero(self.level_counts <= n)[0]
            if complete.size == 0:
                return None
            return float(self.level_spacing[complete[-1]])
        if self.fill is not None:
            return float(2.0 * self.fill[min(n, len(self.fill)) - 1])
        return None


def _trailing_zeros(q: np.ndarray, cap: int) -> np.ndarray:
    out = np.full(q.shape, cap, dtype=np.int64)
    nz = q != 0
    v = np.abs(q[nz])
    tz = np.zeros(v.shape, dtype=np.int64)
    while True:
        even = (v % 2 == 0) & (tz < cap)
        if not np.any(even):
            break
        v = np.where(even, v // 2, v)
        tz = tz + even
    out[nz] = tz
    return out


def _lattice_order(spec: Any, n: int, cfg: SamplingConfig) -> _OrderedSample:
    centroid = np.asarray(spec.centroid(), dtype=float)
    lo, hi = spec.bounding_box()
    h0 = float(np.max(np.maximum(hi - centroid, centroid - lo)))
    dim = centroid.size

    finest = 0
    while True:
        h = h0 / 2**finest
        axes = [
            np.arange(math.floor((lo[i] - centroid[i]) / h), math.ceil((hi[i] - centroid[i]) / h) + 1)
            for i in range(dim)
        ]
        q = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        pts = centroid + q * h
        inside = spec.contains(pts, tol=cfg.membership_tol)
        q, pts = q[inside], pts[inside]
        if len(pts) >= n or finest > 30:
            break
        finest += 1

    if len(pts) < n:
        raise ValidationError("Could not place the requested number of grid points")
    zeros = _trailing_zeros(q, finest).min(axis=1)
    level = finest - zeros
    radius = np.linalg.norm(pts - centroid, axis=1)
    keys = [pts[:, i] for i in reversed(range(dim))] + [radius, level]
    order = np.lexsort(keys)
    counts = np.cumsum(np.bincount(level, minlength=finest + 1))
    spacing = h0 / 2.0 ** np.arange(finest + 1)
    return _OrderedSample(points=pts[order], level_counts=counts, level_spacing=spacing)


def _uniform_in_domain(spec: Any, count: int, seed: int, cfg: SamplingConfig) -> np.ndarray:
    lo, hi = spec.bounding_box()
    out: list[np.ndarray] = []
    have = 0
    batch = 0
    while have < count:
        rng = make_rng(seed, batch)
        cand = rng.uniform(lo, hi, size=(max(2 * (count - have), 1024), len(lo)))
        cand = cand[spec.contains(cand, tol=cfg.membership_tol)]
        out.append(cand)
        have += len(cand)
        batch += 1
    return np.concatenate(out)[:count]


def _farthest_point_order(pool: np.ndarray, start: int, n: int) -> _OrderedSample:
    selected = [start]
    min_d = np.linalg.norm(pool - pool[start], axis=1)
    fill = [float(min_d.max())]
    for _ in range(1, n):
        i = int(np.argmax(min_d))
        selected.append(i)
        min_d = np.minimum(min_d, np.linalg.norm(pool - pool[i], axis=1))
        fill.append(float(min_d.max()))
    return _OrderedSample(points=pool[selected], fill=np.array(fill))


def _ordered_sample(
    spec: Any, n: int, strategy: str, seed: int, cfg: SamplingConfig
) -> _OrderedSample:
    if n < 1:
        raise ValidationError("Need at least one sample point", details={"N": n})
    if strategy not in ("grid", "farthest_point"):
        raise ValidationError(f"Unknown sampling strategy: {strategy}")

    if isinstance(spec, PointCloudSpec):
        cloud = spec.load_points()
        if cloud.shape[1] not in (1, 2, 3):
            raise UnsupportedDomainError(
                "Point clouds must be 1-, 2- or 3-dimensional", details={"dim": cloud.shape[1]}
            )
        if n > len(cloud):
            raise ValidationError(
                "Point cloud has fewer points than requested",
                details={"N": n, "available": len(cloud)},
            )
        if strategy == "grid":
            return _OrderedSample(points=cloud[:n])
        start = int(np.argmin(np.linalg.norm(cloud - cloud.mean(axis=0), axis=1)))
        return _farthest_point_order(cloud, start, n)

    if spec.dimension not in (1, 3):
        raise UnsupportedDomainError("Only 1D and 3D domains are sampled")
    if strategy == "grid":
        return _lattice_order(spec, n, cfg)

    pool_size = max(cfg.candidate_pool_factor * n, cfg.min_candidate_pool)
    centroid = np.asarray(spec.centroid(), dtype=float)
    pool = _uniform_in_domain(spec, pool_size, seed, cfg)
    if spec.contains(centroid[None, :], tol=cfg.membership_tol)[0]:
        pool = np.vstack([centroid[None, :], pool])
    start = int(np.argmin(np.linalg.norm(pool - centroid, axis=1)))
    return _farthest_point_order(pool, start, n)


def sample_domain(
    spec: Any,
    N: int,
    strategy: Strategy = "grid",
    seed: int = 0,
    config: Optional[SamplingConfig] = None,
) -> FiniteMetricSpace:
    """
    Draw N points inside the closed domain.

    Args:
        spec: Domain specification
        N: Number of points (>= 1)
        strategy: ``grid`` (hierarchical dyadic lattice) or ``farthest_point``
        seed: Seed for the farthest-point candidate pool
        config: Sampling settings

    Returns:
        FiniteMetricSpace with Euclidean distances and coordinates attached
    """
    cfg = config or DEFAULT_SAMPLING
    ordered = _ordered_sample(spec, N, strategy, seed, cfg)
    return FiniteMetricSpace.from_points(ordered.points[:N])


def _ladder(start: int, cap: int) -> list[int]:
    sizes = [min(start, cap)]
    while sizes[-1] < cap:
        sizes.append(min(2 * sizes[-1] - 1 if sizes[-1] > 1 else 2, cap))
    return sizes


def _rungs(ordered: _OrderedSample, start: int, cap: int) -> tuple[list[int], set[int]]:
    """Ladder sizes plus completed lattice levels; the second item marks the checkpoints."""
    sizes = set(_ladder(start, cap))
    if ordered.level_counts is None:
        return sorted(sizes), sizes
    levels = {int(c) for c in np.unique(ordered.level_counts) if start <= c <= cap}
    return sorted(sizes | levels), levels


def _extrapolate(checkpoints: list[tuple[float, float]]) -> Optional[float]:
    """Value at zero spacing from the last two (spacing, value) pairs, first order in spacing."""
    if len(checkpoints) < 2:
        return None
    (h1, v1), (h2, v2) = checkpoints[-2:]
    if not h1 > h2 > 0:
        return None
    return (h1 * v2 - h2 * v1) / (h1 - h2)


def _estimate_from_order(
    spec: Any,
    ordered: _OrderedSample,
    R: float,
    tol: float,
    cap: int,
    strategy: str,
    seed: int,
    cfg: SamplingConfig,
    solver_config: Optional[SolverConfig],
    strict: bool,
) -> EstimateReport:
    estimates: list[tuple[int, float]] = []
    conds: list[float] = []
    checked: list[float] = []
    spaced: list[tuple[float, float]] = []
    converged = False
    spacing: Optional[float] = None
    spacing_ok = False
    cloud = isinstance(spec, PointCloudSpec)
    rungs, checkpoints = _rungs(ordered, min(cfg.ladder_start, cap), cap)

    for n in rungs:
        space = FiniteMetricSpace.from_points(ordered.points[:n])
        wv = weighting(space, R, solver_config)
        value = float(np.sum(wv.w))
        if estimates and value < estimates[-1][1] - 1e-9:
            logger.warning(
                "refinement lost monotonicity at N=%d (%.12g < %.12g)", n, value, estimates[-1][1]
            )
        estimates.append((n, value))
        conds.append(wv.condition_estimate)
        spacing = None if cloud else ordered.spacing(n)
        spacing_ok = cloud or (spacing is not None and spacing * R <= cfg.spacing_factor)
        logger.debug("R=%g N=%d magnitude=%.12g spacing=%s", R, n, value, spacing)
        if n not in checkpoints:
            continue
        checked.append(value)
        if spacing is not None:
            spaced.append((spacing, value))
        # partial lattice levels never count; two successive steps must both be small
        if (
            len(checked) >= 3
            and abs(checked[-1] - checked[-2]) < tol
            and abs(checked[-2] - checked[-3]) < tol
            and spacing_ok
        ):
            converged = True
            break
        if cloud and n == cap:
            converged = True

    if len(checked) >= 2:
        delta: Optional[float] = checked[-1] - checked[-2]
    else:
        delta = estimates[-1][1] - estimates[-2][1] if len(estimates) >= 2 else None
    extrapolated = _extrapolate(spaced)
    previous = _extrapolate(spaced[:-1])
    report = EstimateReport(
        R=R,
        estimates=estimates,
        converged=converged,
        final=estimates[-1][1],
        delta_last=delta,
        spacing=spacing,
        spacing_ok=spacing_ok,
        extrapolated=extrapolated,
        extrapolation_delta=(
            None if extrapolated is None or previous is None else abs(extrapolated - previous)
        ),
        condition_estimates=conds,
        strategy=strategy,
        seed=seed,
    )

    if not converged:
        logger.warning(
            "estimate at R=%g not converged after N=%d (delta=%s, spacing*R=%s)",
            R,
            estimates[-1][0],
            delta,
            None if spacing is None else spacing * R,
        )
        if strict:
            raise BudgetExceededError(
                "Refinement budget exhausted before convergence",
                report=report,
                details={"R": R, "N_max": cap, "final": report.final},
            )
    return report


def _cap_for(spec: Any, N_max: int) -> int:
    if N_max < 1:
        raise ValidationError("N_max must be positive", details={"N_max": N_max})
    if isinstance(spec, PointCloudSpec):
        return min(N_max, len(spec.load_points()))
    return N_max


def estimate_magnitude(
    spec: Any,
    R: float,
    tol: float = 1e-3,
    N_max: int = 4096,
    strategy: Strategy = "grid",
    seed: int = 0,
    config: Optional[SamplingConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    strict: bool = False,
) -> EstimateReport:
    """
    Lower-bound the magnitude of a compact domain by nested finite subsets.

    Sample sizes follow the ladder N -> 2N - 1, with every completed lattice
    level added as an extra rung. Convergence is judged at checkpoints only
    (completed levels for the grid, every rung otherwise): two successive
    checkpoint differences below ``tol`` (absolute) with spacing * R within
    the sampling-density rule. ``extrapolated`` is the advisory value at zero
    spacing from the last two checkpoints, assuming first-order error in the
    spacing.

    Args:
        spec: Domain specification
        R: Scale parameter
        tol: Absolute convergence tolerance
        N_max: Largest sample size
        strategy: ``grid`` or ``farthest_point``
        seed: Seed for randomized candidate pools
        config: Sampling settings
        solver_config: Kernel solve tolerances
        strict: Raise BudgetExceededError instead of returning an unconverged report

    Returns:
        EstimateReport whose ``final`` is the last (largest) lower bound
    """
    if tol <= 0:
        raise ValidationError("tol must be positive", details={"tol": tol})
    if R <= 0:
        raise ValidationError("R must be positive", details={"R": R})
    cfg = config or DEFAULT_SAMPLING
    cap = _cap_for(spec, N_max)
    ordered = _ordered_sample(spec, cap, strategy, seed, cfg)
    return _estimate_from_order(
        spec, ordered, float(R), tol, cap, strategy, seed, cfg, solver_config, strict
    )


def estimate_curve(
    spec: Any,
    R_grid: Any,
    tol: float = 1e-3,
    N_max: int = 4096,
    strategy: Strategy = "grid",
    seed: int = 0,
    config: Optional[SamplingConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    threads: int = 1,
) -> tuple[MagnitudeCurve, list[Optional[EstimateReport]]]:
    """
    Batch of ``estimate_magnitude`` over a grid of scales.

    Per-R failures are recorded on the curve, not raised.

    Returns:
        The curve and the per-R reports (None where the estimate failed)
    """
    grid = validate_grid(R_grid)
    if tol <= 0:
        raise ValidationError("tol must be positive", details={"tol": tol})
    cfg = config or DEFAULT_SAMPLING
    cap = _cap_for(spec, N_max)
    ordered = _ordered_sample(spec, cap, strategy, seed, cfg)

    def run(R: float) -> tuple[MagnitudeSample, Optional[EstimateReport]]:
        try:
            rep = _estimate_from_order(
                spec, ordered, R, tol, cap, strategy, seed, cfg, solver_config, False
            )
        except MagwillError as e:
            logger.warning("estimate at R=%g failed: %s", R, e)
            return (
                MagnitudeSample(R=R, n_points=0, failed=True, error=e.message,
                                condition_estimate=e.details.get("condition_estimate")),
                None,
            )
        sample = MagnitudeSample(
            R=R,
            value=rep.final,
            n_points=rep.estimates[-1][0],
            condition_estimate=rep.condition_estimates[-1],
            converged=rep.converged,
            delta_last=rep.delta_last,
        )
        return sample, rep

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, [float(r) for r in grid]))
    else:
        results = [run(float(r)) for r in grid]
    curve = MagnitudeCurve(samples=[s for s, _ in results])
    return curve, [r for _, r in results]
