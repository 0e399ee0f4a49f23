"""Boundary functionals by quadrature and intrinsic volumes by Steiner fitting."""

import logging
import math
from typing import Any, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from magwill.config import DEFAULT_MONTE_CARLO, DEFAULT_QUADRATURE, MonteCarloConfig
from magwill.errors import NonConvexSpecError, UnsupportedDomainError, ValidationError
from magwill.types import (
    BallSpec,
    EllipsoidSpec,
    GeometricFunctionals,
    IntervalSpec,
    IntrinsicVolumes,
    SolidTorusSpec,
)
from magwill.utils import make_rng, unit_ball_volume, weighted_lstsq

logger = logging.getLogger(__name__)

DEFAULT_T_GRID = tuple(0.25 * k for k in range(1, 9))


def interval_functionals(length: float) -> GeometricFunctionals:
    """Functionals of [0, length]: boundary measure 2 (two points), no curvature."""
    if length <= 0:
        raise ValidationError("Interval length must be positive", details={"length": length})
    return GeometricFunctionals(volume=length, area=2.0, mean_curvature_integral=0.0, willmore=0.0)


def torus_willmore_exact(R0: float, r0: float) -> float:
    """Willmore energy pi^2 c^2 / sqrt(c^2 - 1) of the torus with c = R0 / r0."""
    if not R0 > r0 > 0:
        raise ValidationError("Need R0 > r0 > 0", details={"R0": R0, "r0": r0})
    c = R0 / r0
    return math.pi**2 * c**2 / math.sqrt(c**2 - 1.0)


def _surface_integrals(
    X: np.ndarray,
    Xs: np.ndarray,
    Xt: np.ndarray,
    Xss: np.ndarray,
    Xst: np.ndarray,
    Xtt: np.ndarray,
    weights: np.ndarray,
) -> GeometricFunctionals:
    """Integrate over a parametrized surface whose Xs x Xt points outward."""
    dot = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
    cross = np.cross(Xs, Xt)
    jac = np.linalg.norm(cross, axis=-1)
    n = cross / jac[..., None]
    E, F, G = dot(Xs, Xs), dot(Xs, Xt), dot(Xt, Xt)
    L, M, N = dot(Xss, n), dot(Xst, n), dot(Xtt, n)
    H = -(E * N - 2 * F * M + G * L) / (2.0 * (E * G - F * F))
    dS = jac * weights
    return GeometricFunctionals(
        volume=float(np.sum(dot(X, n) * dS) / 3.0),
        area=float(np.sum(dS)),
        mean_curvature_integral=float(np.sum(H * dS)),
        willmore=float(np.sum(H * H * dS)),
    )


def _quadric_functionals(axes: np.ndarray, order: int) -> GeometricFunctionals:
    x, w = leggauss(order)
    theta = 0.5 * np.pi * (x + 1.0)
    wt = 0.5 * np.pi * w
    n_phi = 2 * order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    weights = wt[:, None] * (2.0 * np.pi / n_phi) * np.ones_like(P)
    st, ct, sp_, cp = np.sin(T), np.cos(T), np.sin(P), np.cos(P)
    zero = np.zeros_like(T)

    def emb(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
        return np.stack([axes[0] * a, axes[1] * b, axes[2] * c], axis=-1)

    return _surface_integrals(
        X=emb(st * cp, st * sp_, ct),
        Xs=emb(ct * cp, ct * sp_, -st),
        Xt=emb(-st * sp_, st * cp, zero),
        Xss=emb(-st * cp, -st * sp_, -ct),
        Xst=emb(-ct * sp_, ct * cp, zero),
        Xtt=emb(-st * cp, -st * sp_, zero),
        weights=weights,
    )


def _torus_functionals(R0: float, r0: float, order: int) -> GeometricFunctionals:
    n = 2 * order
    u = 2.0 * np.pi * np.arange(n) / n
    U, V = np.meshgrid(u, u, indexing="ij")
    weights = np.full_like(U, (2.0 * np.pi / n) ** 2)
    su, cu, sv, cv = np.sin(U), np.cos(U), np.sin(V), np.cos(V)
    ring = R0 + r0 * cv
    zero = np.zeros_like(U)
    return _surface_integrals(
        X=np.stack([ring * cu, ring * su, r0 * sv], axis=-1),
        Xs=np.stack([-ring * su, ring * cu, zero], axis=-1),
        Xt=np.stack([-r0 * sv * cu, -r0 * sv * su, r0 * cv], axis=-1),
        Xss=np.stack([-ring * cu, -ring * su, zero], axis=-1),
        Xst=np.stack([r0 * sv * su, -r0 * sv * cu, zero], axis=-1),
        Xtt=np.stack([-r0 * cv * cu, -r0 * cv * su, -r0 * sv], axis=-1),
        weights=weights,
    )


def functionals_quadrature(spec: Any, quad_order: Optional[int] = None) -> GeometricFunctionals:
    """
    Volume, area, mean-curvature integral and Willmore energy from the analytic
    parametrization.

    Gauss-Legendre in the polar angle and the periodic trapezoid rule in the
    azimuth (both torus angles are periodic). H is the mean of the principal
    curvatures with the outward normal, so the unit sphere has H = 1.

    Args:
        spec: Ball, ellipsoid, solid torus (or interval, which is exact)
        quad_order: Nodes per direction (defaults to QuadratureConfig.quad_order)
    """
    order = quad_order or DEFAULT_QUADRATURE.quad_order
    if order < 4:
        raise ValidationError("quad_order must be at least 4", details={"quad_order": order})
    if isinstance(spec, IntervalSpec):
        return interval_functionals(spec.length)
    if isinstance(spec, (BallSpec, EllipsoidSpec)):
        result = _quadric_functionals(spec.semi_axes, order)
    elif isinstance(spec, SolidTorusSpec):
        result = _torus_functionals(spec.R0, spec.r0, order)
    else:
        raise UnsupportedDomainError(
            "Quadrature needs a parametrized domain",
            details={"kind": getattr(spec, "kind", type(spec).__name__)},
        )
    logger.debug("quadrature functionals %s (order %d): %s", spec.kind, order, result)
    return result


def _distance_to_quadric(p: np.ndarray, axes: np.ndarray, iterations: int) -> np.ndarray:
    """Euclidean distance from points to the solid axis-aligned ellipsoid (0 inside)."""
    if np.allclose(axes, axes[0]):
        return np.maximum(np.linalg.norm(p, axis=1) - axes[0], 0.0)
    a2 = axes**2
    q = p * p * a2
    outside = np.sum(p * p / a2, axis=1) > 1.0
    lam = np.zeros(len(p))
    active = outside.copy()
    for _ in range(iterations):
        if not np.any(active):
            break
        denom = a2 + lam[active, None]
        f = np.sum(q[active] / denom**2, axis=1) - 1.0
        df = -2.0 * np.sum(q[active] / denom**3, axis=1)
        step = f / df
        lam[active] -= step
        done = np.abs(step) <= 1e-14 * (1.0 + lam[active])
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
    closest = p * a2 / (a2 + lam[:, None])
    d = np.linalg.norm(p - closest, axis=1)
    return np.where(outside, d, 0.0)


def _stratified_counts(
    axes: np.ndarray, t_grid: np.ndarray, n_mc: int, seed: int, cfg: MonteCarloConfig
) -> tuple[np.ndarray, int, float]:
    """Jittered-grid counts of points within distance t of the body, per t."""
    half = axes + t_grid.max()
    box_volume = float(np.prod(2.0 * half))
    k = max(int(round(n_mc ** (1.0 / 3.0))), 1)
    total = k**3
    counts = np.zeros(len(t_grid), dtype=np.int64)
    for chunk, start in enumerate(range(0, total, cfg.chunk_size)):
        cells = np.arange(start, min(start + cfg.chunk_size, total))
        ijk = np.stack(np.unravel_index(cells, (k, k, k)), axis=1)
        rng = make_rng(seed, chunk)
        pts = -half + (ijk + rng.random((len(cells), 3))) * (2.0 * half / k)
        d = _distance_to_quadric(pts, axes, cfg.newton_iterations)
        counts += np.sum(d[:, None] <= t_grid[None, :], axis=0)
    return counts, total, box_volume


def intrinsic_volumes(
    spec: Any,
    t_grid: Optional[Any] = None,
    N_mc: int = 10**6,
    seed: int = 0,
    config: Optional[MonteCarloConfig] = None,
) -> IntrinsicVolumes:
    """
    Intrinsic volumes V0..V3 of a convex body by fitting the Steiner polynomial

        vol(X + tB) = V3 + 2 V2 t + pi V1 t^2 + (4 pi / 3) V0 t^3

    to stratified Monte Carlo estimates of the parallel volumes.

    Args:
        spec: Ball or ellipsoid
        t_grid: Positive offsets (at least 4 distinct); t = 0 is always added
        N_mc: Number of Monte Carlo points (rounded to a cube)
        seed: Seed; chunk c draws from a generator keyed by (seed, c)
        config: Monte Carlo settings

    Raises:
        NonConvexSpecError: Solid torus or point cloud
    """
    cfg = config or DEFAULT_MONTE_CARLO
    if isinstance(spec, SolidTorusSpec) or not getattr(spec, "is_convex", False):
        raise NonConvexSpecError(
            "Intrinsic volumes need a convex body",
            details={"kind": getattr(spec, "kind", type(spec).__name__)},
        )
    if not isinstance(spec, (BallSpec, EllipsoidSpec)):
        raise UnsupportedDomainError("Intrinsic volumes are computed for 3D convex bodies")
    t = np.asarray(DEFAULT_T_GRID if t_grid is None else t_grid, dtype=float).ravel()
    if np.any(t < 0) or len(np.unique(t[t > 0])) < 4:
        raise ValidationError("t_grid needs at least 4 distinct positive values")
    t = np.unique(np.concatenate([[0.0], t]))
    if N_mc < 1000:
        raise ValidationError("N_mc too small", details={"N_mc": N_mc})

    counts, total, box_volume = _stratified_counts(spec.semi_axes, t, N_mc, seed, cfg)
    p = counts / total
    volumes = box_volume * p
    stderr = box_volume * np.sqrt(np.maximum(p * (1.0 - p), 1.0 / total) / total)

    omega = [unit_ball_volume(3 - k) for k in range(4)]
    design = np.stack([omega[k] * t ** (3 - k) for k in range(4)], axis=1)
    V, err, _ = weighted_lstsq(design, volumes, 1.0 / stderr**2)
    fit_residual = float(np.linalg.norm(design @ V - volumes) / np.linalg.norm(volumes))
    result = IntrinsicVolumes(
        V=[float(v) for v in V],
        stderr=[float(e) for e in err],
        residual=fit_residual,
        t_grid=[float(x) for x in t],
        volumes=[float(v) for v in volumes],
        volume_stderr=[float(s) for s in stderr],
        n_samples=total,
    )
    logger.info(
        "intrinsic volumes %s: V=%s stderr=%s residual=%.2e",
        spec.kind, np.round(V, 5).tolist(), np.round(err, 5).tolist(), fit_residual,
    )
    return result
