"""magwill - magnitude of metric spaces, its asymptotic expansion and the Willmore term."""

from magwill.asymptotics import (
    calibrate_lambda3,
    falsification_experiment,
    fit_expansion,
    load_calibration,
    predict_coefficients,
    predicted_magnitude,
    save_calibration,
)
from magwill.errors import (
    BudgetExceededError,
    CalibrationUnstableError,
    CutoffTooLowError,
    DegenerateMeshError,
    IllConditionedError,
    JetTooShallowError,
    MagwillError,
    MeshError,
    MissingCalibrationError,
    MissingLambdaError,
    NonConvexSpecError,
    NotEllipticError,
    NotPositiveDefiniteError,
    RankDeficientError,
    SolverError,
    SymbolError,
    SymbolFormatError,
    UnboundScalarError,
    UnsupportedDomainError,
    ValidationError,
)
from magwill.geometry import (
    functionals_quadrature,
    interval_functionals,
    intrinsic_volumes,
    torus_willmore_exact,
)
from magwill.mesh import functionals_mesh, mesh_domain, validate_mesh
from magwill.metric import magnitude, magnitude_curve, similarity_matrix, weighting
from magwill.reduction import (
    CircleManifold,
    Torus2Manifold,
    TwoVariableSymbol,
    direct_expectation,
    expectation_expansion,
    parity_vanishing_check,
    reduce_two_variable,
)
from magwill.sampling import (
    ball_magnitude_exact,
    equispaced_interval_magnitude,
    estimate_curve,
    estimate_magnitude,
    interval_magnitude_exact,
    sample_domain,
)
from magwill.symbols import (
    PolyhomSymbol,
    constant_matrix_symbol,
    douglis_nirenberg_diagonal,
    homogeneity_check,
    identity_symbol,
    parametrix,
    symbol_product,
    symbols_equal,
)
from magwill.types import (
    BallSpec,
    CalibrationResult,
    EllipsoidSpec,
    EstimateReport,
    ExpansionPrediction,
    ExperimentRow,
    ExperimentTable,
    FiniteMetricSpace,
    FitResult,
    GeometricFunctionals,
    IntervalSpec,
    IntrinsicVolumes,
    MagnitudeCurve,
    MagnitudeSample,
    PointCloudSpec,
    RunManifest,
    SolidTorusSpec,
    SurfaceMesh,
    WeightVector,
)

__version__ = "0.1.0"

__all__ = [
    # Metric core
    "similarity_matrix",
    "weighting",
    "magnitude",
    "magnitude_curve",
    # Domain sampler
    "sample_domain",
    "estimate_magnitude",
    "estimate_curve",
    "interval_magnitude_exact",
    "equispaced_interval_magnitude",
    "ball_magnitude_exact",
    # Boundary geometry
    "mesh_domain",
    "validate_mesh",
    "functionals_mesh",
    "functionals_quadrature",
    "interval_functionals",
    "torus_willmore_exact",
    "intrinsic_volumes",
    # Asymptotics
    "predict_coefficients",
    "predicted_magnitude",
    "fit_expansion",
    "calibrate_lambda3",
    "save_calibration",
    "load_calibration",
    "falsification_experiment",
    # Symbol engine
    "PolyhomSymbol",
    "TwoVariableSymbol",
    "CircleManifold",
    "Torus2Manifold",
    "homogeneity_check",
    "symbol_product",
    "parametrix",
    "symbols_equal",
    "identity_symbol",
    "douglis_nirenberg_diagonal",
    "constant_matrix_symbol",
    "expectation_expansion",
    "direct_expectation",
    "reduce_two_variable",
    "parity_vanishing_check",
    # Errors
    "MagwillError",
    "ValidationError",
    "UnsupportedDomainError",
    "NonConvexSpecError",
    "SolverError",
    "NotPositiveDefiniteError",
    "IllConditionedError",
    "BudgetExceededError",
    "RankDeficientError",
    "CalibrationUnstableError",
    "MeshError",
    "DegenerateMeshError",
    "MissingCalibrationError",
    "MissingLambdaError",
    "SymbolError",
    "CutoffTooLowError",
    "NotEllipticError",
    "UnboundScalarError",
    "JetTooShallowError",
    "SymbolFormatError",
    # Types
    "FiniteMetricSpace",
    "WeightVector",
    "MagnitudeSample",
    "MagnitudeCurve",
    "IntervalSpec",
    "BallSpec",
    "EllipsoidSpec",
    "SolidTorusSpec",
    "PointCloudSpec",
    "EstimateReport",
    "SurfaceMesh",
    "GeometricFunctionals",
    "IntrinsicVolumes",
    "ExpansionPrediction",
    "FitResult",
    "CalibrationResult",
    "ExperimentRow",
    "ExperimentTable",
    "RunManifest",
]
