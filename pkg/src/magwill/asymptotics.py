"""Large-R magnitude expansion: prediction, fitting, lambda_3 calibration, falsification."""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from magwill.errors import (
    CalibrationUnstableError,
    MagwillError,
    MissingCalibrationError,
    MissingLambdaError,
    ValidationError,
)
from magwill.geometry import functionals_quadrature, intrinsic_volumes
from magwill.io import read_model, write_model
from magwill.sampling import estimate_curve
from magwill.types import (
    BallSpec,
    CalibrationResult,
    EllipsoidSpec,
    EstimateReport,
    ExpansionPrediction,
    ExperimentRow,
    ExperimentTable,
    FitResult,
    GeometricFunctionals,
    MagnitudeCurve,
)
from magwill.utils import expansion_norm, make_rng, utc_now, validate_grid, weighted_lstsq

logger = logging.getLogger(__name__)

Estimator = Callable[[Sequence[float]], Sequence[Optional[EstimateReport]]]

NON_CONSTANT = "non-constant"
INSUFFICIENT_GRID = "insufficient grid"
INCONCLUSIVE = "inconclusive"


def predict_coefficients(
    g: GeometricFunctionals, n: int = 3, lambda_n: Optional[float] = None
) -> ExpansionPrediction:
    """
    Coefficients of M_X(R) ~ sum_j c_j R^(n-j) / (n! omega_n).

    c0 = volume, c1 = m * area, c2 = (m^2 / 2)(n - 1) * int H, c3 = lambda_n * W
    with m = (n + 1) / 2. Without lambda_n the c3 slot is left empty.
    """
    if n < 1 or n % 2 == 0:
        raise ValidationError("The expansion needs an odd dimension n >= 1", details={"n": n})
    m = (n + 1) // 2
    c3 = None if lambda_n is None else lambda_n * g.willmore
    return ExpansionPrediction(
        n=n,
        m=m,
        c=[
            g.volume,
            m * g.area,
            (m * m / 2.0) * (n - 1) * g.mean_curvature_integral,
            c3,
        ],
        norm=expansion_norm(n),
        lambda_n=lambda_n,
    )


def predicted_magnitude(p: ExpansionPrediction, R: float, order: int = 3) -> float:
    """Truncated expansion (1 / norm) * sum_{j <= order} c_j R^(n - j)."""
    if R <= 0:
        raise ValidationError("R must be positive", details={"R": R})
    if order not in (0, 1, 2, 3):
        raise ValidationError("order must be 0..3", details={"order": order})
    total = 0.0
    for j in range(order + 1):
        c = p.c[j]
        if c is None:
            raise MissingLambdaError(
                f"c{j} requested from a prediction built without lambda_n", details={"n": p.n}
            )
        total += c * R ** (p.n - j)
    return total / p.norm


def fit_expansion(
    curve: MagnitudeCurve,
    n: int = 3,
    fixed: Optional[dict[int, float]] = None,
    free_powers: Optional[Sequence[int]] = None,
) -> FitResult:
    """
    Weighted least squares of value * n! omega_n against powers of R.

    The candidate powers are n, n-1, n-2, n-3. Powers in ``fixed`` are
    subtracted at their given coefficient; ``free_powers`` (default: the rest)
    are fitted and any remaining power is taken as zero. Row i is weighted by
    R_i^(-p) with p the lowest free power, so every sample pulls equally on it.

    Raises:
        ValidationError: Too few samples or R range narrower than a factor 2
        RankDeficientError: Design matrix numerically singular
    """
    fixed = dict(fixed or {})
    powers = [n - j for j in range(4)]
    unknown = [p for p in fixed if p not in powers]
    if unknown:
        raise ValidationError("Fixed powers outside the expansion", details={"powers": str(unknown)})
    free = sorted(
        (p for p in powers if p not in fixed) if free_powers is None else free_powers,
        reverse=True,
    )
    if not free:
        raise ValidationError("Nothing left to fit")
    if set(free) & set(fixed) or any(p not in powers for p in free):
        raise ValidationError("Free powers must be expansion powers not held fixed")

    R = curve.R_values
    y = curve.values
    if len(R) < 2 + len(free):
        raise ValidationError(
            "Not enough samples for the free powers",
            details={"samples": len(R), "free": len(free)},
        )
    if R.max() < 2.0 * R.min():
        raise ValidationError("R values must span at least a factor 2")

    norm = expansion_norm(n)
    target = y * norm - sum((c * R**p for p, c in fixed.items()), np.zeros_like(R))
    design = np.stack([R**p for p in free], axis=1)
    weights = R ** (-2.0 * min(free))
    coef, err, residual = weighted_lstsq(design, target, weights)
    dof = len(R) - len(free)
    sigma = residual / math.sqrt(dof) if dof > 0 else 0.0
    result = FitResult(
        coefficients={p: float(c) for p, c in zip(free, coef)},
        errors={p: float(e * sigma) for p, e in zip(free, err)},
        residual_norm=residual,
        fixed=fixed,
    )
    logger.debug("fit n=%d free=%s -> %s", n, free, result.coefficients)
    return result


def _ball_estimator(
    radius: float,
    tol: float,
    N_max: int,
    seed: int,
    strategy: str,
    threads: int,
) -> Estimator:
    def run(grid: Sequence[float]) -> Sequence[Optional[EstimateReport]]:
        _, reports = estimate_curve(
            BallSpec(radius=radius), grid, tol=tol, N_max=N_max,
            strategy=strategy,  # type: ignore[arg-type]
            seed=seed, threads=threads,
        )
        return reports

    return run


def calibrate_lambda3(
    R_grid: Sequence[float],
    tol: float = 1e-3,
    N_max: int = 4096,
    seed: int = 0,
    strategy: str = "grid",
    n_boot: int = 1000,
    use_extrapolated: bool = True,
    estimator: Optional[Estimator] = None,
    threads: int = 1,
) -> CalibrationResult:
    """
    Calibrate lambda_3 from magnitude estimates of the unit ball.

    The order-2 prediction (c0..c2 from quadrature of the sphere) is
    subtracted from each estimate; residual * norm is fitted by a constant
    (the R^0 term for n = 3) and divided by the sphere's Willmore energy.
    Each R must come with a converged estimate or, when ``use_extrapolated``
    is set, with a value extrapolated to zero spacing. The uncertainty
    combines a bootstrap over R samples with the mean convergence error
    (last checkpoint delta, or the change of the extrapolated value).

    Args:
        R_grid: At least 6 increasing scales
        tol, N_max, seed, strategy: Passed to the domain sampler
        n_boot: Bootstrap resamples
        use_extrapolated: Use the zero-spacing values where available
        estimator: Replacement for the domain sampler, mapping a grid to reports
        threads: Concurrent R values for the default estimator

    Raises:
        CalibrationUnstableError: lambda_3 not resolved from zero, or an R
            without a usable estimate (listed in ``details["unconverged_R"]``)
    """
    grid = validate_grid(R_grid)
    if len(grid) < 6:
        raise ValidationError("Calibration needs at least 6 R values", details={"count": len(grid)})
    run = estimator or _ball_estimator(1.0, tol, N_max, seed, strategy, threads)
    reports = list(run([float(r) for r in grid]))
    if len(reports) != len(grid):
        raise ValidationError("Estimator returned the wrong number of reports")

    g = functionals_quadrature(BallSpec(radius=1.0))
    pred = predict_coefficients(g, n=3)
    Rs: list[float] = []
    residuals: list[float] = []
    deltas: list[float] = []
    extrapolated_R: list[float] = []
    unconverged: list[float] = []
    for R, rep in zip(grid, reports):
        if rep is None:
            logger.warning("calibration sample at R=%g failed; skipped", R)
            continue
        if use_extrapolated and rep.extrapolated is not None:
            value = rep.extrapolated
            if rep.extrapolation_delta is not None:
                error = rep.extrapolation_delta
            else:
                error = abs(rep.extrapolated - rep.final)
            if not rep.converged:
                extrapolated_R.append(float(R))
        elif rep.converged:
            value = rep.final
            error = abs(rep.delta_last or 0.0)
        else:
            unconverged.append(float(R))
            continue
        Rs.append(float(R))
        residuals.append((value - predicted_magnitude(pred, float(R), order=2)) * pred.norm)
        deltas.append(error * pred.norm)
    if unconverged:
        raise CalibrationUnstableError(
            f"Calibration needs converged ball estimates; unusable at R={unconverged}",
            details={"unconverged_R": unconverged, "use_extrapolated": use_extrapolated},
        )
    if len(residuals) < 6:
        raise ValidationError(
            "Too few successful calibration samples", details={"successful": len(residuals)}
        )
    if extrapolated_R:
        logger.info("calibration uses extrapolated values at R=%s", extrapolated_R)

    from magwill import __version__

    res = np.asarray(residuals)
    W = g.willmore
    lam = float(res.mean() / W)
    rng = make_rng(seed, len(res))
    boot = res[rng.integers(0, len(res), size=(n_boot, len(res)))].mean(axis=1) / W
    sigma_boot = float(boot.std(ddof=1))
    sigma_conv = float(np.mean(deltas) / W)
    sigma = math.hypot(sigma_boot, sigma_conv)

    provenance = {
        "R_grid": Rs,
        "tol": tol,
        "N_max": N_max,
        "seed": seed,
        "strategy": strategy,
        "n_boot": n_boot,
        "use_extrapolated": use_extrapolated,
        "residuals": [float(r) for r in res],
        "extrapolated_R": extrapolated_R,
        "sigma_bootstrap": sigma_boot,
        "sigma_convergence": sigma_conv,
        "willmore_sphere": W,
        "tool_version": __version__,
        "created_at": utc_now(),
    }
    logger.info("lambda_3 = %.6g +/- %.3g (bootstrap %.3g, convergence %.3g)",
                lam, sigma, sigma_boot, sigma_conv)
    if sigma > 0.5 * abs(lam) or abs(lam) <= 3.0 * sigma:
        raise CalibrationUnstableError(
            "lambda_3 is not resolved from zero by its uncertainty",
            details={"lambda3": lam, "uncertainty": sigma, "provenance": provenance},
        )
    return CalibrationResult(lambda3=lam, uncertainty=sigma, provenance=provenance)


def save_calibration(result: CalibrationResult, path: Union[str, Path]) -> None:
    write_model(result, path)


def load_calibration(path: Union[str, Path]) -> CalibrationResult:
    """
    Raises:
        MissingCalibrationError: No calibration file at path
    """
    if not Path(path).is_file():
        raise MissingCalibrationError(f"No calibration file at {path}")
    return read_model(path, CalibrationResult)


def _experiment_row(
    a: float,
    lam: float,
    R_grid: Optional[np.ndarray],
    budget: Optional[int],
    tol: float,
    seed: int,
    quad_order: Optional[int],
    mc_samples: Optional[int],
) -> ExperimentRow:
    row = ExperimentRow(a=a)
    try:
        spec = EllipsoidSpec(a=a)
        g = functionals_quadrature(spec, quad_order)
        row.willmore = g.willmore
        row.V0 = 1.0 if not mc_samples else intrinsic_volumes(spec, N_mc=mc_samples, seed=seed).V[0]
        row.c3_pred = lam * g.willmore
        row.ratio_c3_V0 = row.c3_pred / row.V0
        if budget and R_grid is not None:
            pred = predict_coefficients(g, n=3, lambda_n=lam)
            curve, _ = estimate_curve(spec, R_grid, tol=tol, N_max=budget, seed=seed)
            fixed = {3 - j: float(pred.c[j]) for j in range(3)}  # type: ignore[arg-type]
            fit = fit_expansion(curve, n=3, fixed=fixed)
            row.c3_fitted = fit.coefficients[0]
            row.c3_fitted_err = fit.errors.get(0)
    except MagwillError as e:
        logger.warning("experiment row a=%g failed: %s", a, e)
        row.error = str(e)
    logger.info(
        "a=%g willmore=%s V0=%s c3_pred=%s c3_fitted=%s", a, row.willmore, row.V0,
        row.c3_pred, row.c3_fitted,
    )
    return row


def falsification_experiment(
    a_grid: Sequence[float],
    calibration: Optional[CalibrationResult],
    R_grid: Optional[Sequence[float]] = None,
    budget: Optional[int] = None,
    tol: float = 1e-3,
    seed: int = 0,
    quad_order: Optional[int] = None,
    mc_samples: Optional[int] = None,
    spread_threshold: float = 2.0,
    threads: int = 1,
) -> ExperimentTable:
    """
    Tabulate c3 / V0 over the ellipsoids X_a.

    A universal constant would force c3 / V0 to be the same for every convex
    body; the Willmore energy diverges as a -> 0 while V0 stays 1, so the
    ratio spread exhibits the contradiction.

    Args:
        a_grid: Aspect parameters in (0, 1], strictly decreasing
        calibration: Calibrated lambda_3
        R_grid: Scales for the sampled c3 fit (skipped when None)
        budget: N_max for the sampled fits (skipped when None or 0)
        tol, seed: Passed to the domain sampler and Monte Carlo
        quad_order: Quadrature order for the Willmore column
        mc_samples: Monte Carlo V0 with this many points; None uses V0 = 1
        spread_threshold: max/min ratio above which the verdict is non-constant
        threads: Concurrent rows

    Raises:
        MissingCalibrationError: calibration is None
    """
    if calibration is None:
        raise MissingCalibrationError("falsification needs a calibrated lambda_3")
    a = np.asarray(a_grid, dtype=float).ravel()
    if a.size == 0 or np.any(a <= 0) or np.any(a > 1):
        raise ValidationError("a values must lie in (0, 1]")
    if np.any(np.diff(a) >= 0):
        raise ValidationError("a_grid must be strictly decreasing")
    grid = None if R_grid is None else validate_grid(R_grid)
    lam = calibration.lambda3

    def run(av: float) -> ExperimentRow:
        return _experiment_row(av, lam, grid, budget, tol, seed, quad_order, mc_samples)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, [float(x) for x in a]))
    else:
        rows = [run(float(x)) for x in a]

    ratios = [abs(r.ratio_c3_V0) for r in rows if r.ratio_c3_V0 is not None]
    spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else None
    ws = [r.willmore for r in rows]
    increasing = all(w is not None for w in ws) and all(
        b > a_ for a_, b in zip(ws, ws[1:])  # type: ignore[operator]
    )
    if len(ratios) < 2:
        verdict = INSUFFICIENT_GRID
    elif spread is not None and spread > spread_threshold:
        verdict = NON_CONSTANT
    else:
        verdict = INCONCLUSIVE
    logger.info("falsification: spread=%s willmore increasing=%s verdict=%s",
                spread, increasing, verdict)
    return ExperimentTable(
        rows=rows, lambda3=lam, spread=spread, willmore_increasing=increasing, verdict=verdict
    )
