"""Type definitions for magwill using Pydantic v2."""

import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    field_serializer,
    field_validator,
    model_validator,
)


class FiniteMetricSpace(BaseModel):
    """Labeled points with a symmetric distance matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    labels: list[str] = Field(default_factory=list, description="Point identifiers")
    dist: np.ndarray = Field(..., description="Symmetric distance matrix, zero diagonal")
    points: Optional[np.ndarray] = Field(
        default=None, description="Euclidean coordinates, when the space came from points"
    )

    @field_validator("dist", mode="before")
    @classmethod
    def coerce_dist(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("Distance matrix must be square")
        return arr

    @field_validator("points", mode="before")
    @classmethod
    def coerce_points(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        arr = np.array(v, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return arr

    @model_validator(mode="after")
    def check_metric(self) -> "FiniteMetricSpace":
        d = self.dist
        n = d.shape[0]
        if n == 0:
            raise ValueError("Metric space must contain at least one point")
        if not self.labels:
            self.labels = [str(i) for i in range(n)]
        if len(self.labels) != n:
            raise ValueError(f"Got {len(self.labels)} labels for {n} points")
        if not np.all(np.isfinite(d)):
            raise ValueError("Distances must be finite")
        if np.any(np.diag(d) != 0.0):
            raise ValueError("Distance matrix must have a zero diagonal")
        scale = max(float(np.max(np.abs(d))), 1.0)
        if np.max(np.abs(d - d.T)) > 1e-12 * scale:
            raise ValueError("Distance matrix must be symmetric")
        off = d[~np.eye(n, dtype=bool)]
        if np.any(off < 0.0):
            raise ValueError("Distances must be nonnegative")
        if np.any(off == 0.0):
            raise ValueError("Duplicate points (zero off-diagonal distance)")
        if self.points is not None and self.points.shape[0] != n:
            raise ValueError("Coordinate count does not match the distance matrix")
        return self

    @field_serializer("dist", "points")
    def serialize_array(self, v: Optional[np.ndarray]) -> Optional[list[Any]]:
        return None if v is None else v.tolist()

    @classmethod
    def from_points(
        cls, points: Any, labels: Optional[list[str]] = None
    ) -> "FiniteMetricSpace":
        """Build a Euclidean space from an (N, d) coordinate array."""
        from scipy.spatial.distance import cdist

        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        dist = cdist(pts, pts)
        np.fill_diagonal(dist, 0.0)
        return cls(labels=labels or [], dist=dist, points=pts)

    @property
    def n_points(self) -> int:
        return int(self.dist.shape[0])

    def scaled(self, s: float) -> "FiniteMetricSpace":
        """Same points with every distance multiplied by s."""
        if s <= 0:
            raise ValueError("Scale factor must be positive")
        pts = None if self.points is None else self.points * s
        return FiniteMetricSpace(labels=list(self.labels), dist=self.dist * s, points=pts)

    def subspace(self, indices: Any) -> "FiniteMetricSpace":
        idx = np.asarray(indices, dtype=int)
        pts = None if self.points is None else self.points[idx]
        return FiniteMetricSpace(
            labels=[self.labels[i] for i in idx], dist=self.dist[np.ix_(idx, idx)], points=pts
        )

    def permuted(self, order: Any) -> "FiniteMetricSpace":
        return self.subspace(order)

    def check_triangle_inequality(self, tol: float = 1e-12) -> bool:
        """Opt-in O(N^3) check of d(i,k) <= d(i,j) + d(j,k)."""
        d = self.dist
        scale = max(float(np.max(d)), 1.0)
        for j in range(d.shape[0]):
            via = d[:, j][:, None] + d[j, :][None, :]
            if np.any(d > via + tol * scale):
                return False
        return True


class WeightVector(BaseModel):
    """Solution of Z w = 1."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w: np.ndarray
    R: float = Field(..., gt=0)
    residual: float = Field(..., description="max_i |(Z w)_i - 1|")
    condition_estimate: float

    @field_serializer("w")
    def serialize_w(self, v: np.ndarray) -> list[float]:
        return v.tolist()


class MagnitudeSample(BaseModel):
    """One (R, magnitude) sample."""

    R: float = Field(..., gt=0)
    value: Optional[float] = None
    n_points: int = Field(..., ge=0)
    condition_estimate: Optional[float] = None
    failed: bool = False
    error: Optional[str] = None
    converged: Optional[bool] = None
    delta_last: Optional[float] = None

    @model_validator(mode="after")
    def check_value(self) -> "MagnitudeSample":
        if not self.failed and (self.value is None or not math.isfinite(self.value)):
            raise ValueError("Accepted samples must carry a finite value")
        return self


class MagnitudeCurve(BaseModel):
    """Sampled magnitude function R -> M_X(R)."""

    samples: list[MagnitudeSample] = Field(default_factory=list)

    @field_validator("samples")
    @classmethod
    def check_increasing(cls, v: list[MagnitudeSample]) -> list[MagnitudeSample]:
        for prev, cur in zip(v, v[1:]):
            if not cur.R > prev.R:
                raise ValueError("R values must be strictly increasing")
        return v

    @property
    def R_values(self) -> np.ndarray:
        return np.array([s.R for s in self.samples if not s.failed])

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples if not s.failed], dtype=float)


class IntervalSpec(BaseModel):
    """Closed interval [0, length]."""

    kind: Literal["interval"] = "interval"
    length: float = Field(..., gt=0)

    @property
    def dimension(self) -> int:
        return 1

    @property
    def is_convex(self) -> bool:
        return True

    def centroid(self) -> np.ndarray:
        return np.array([self.length / 2.0])

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([0.0]), np.array([self.length])

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        x = np.asarray(pts, dtype=float).reshape(len(pts), -1)[:, 0]
        return (x >= -tol) & (x <= self.length + tol)

    def scaled(self, s: float) -> "IntervalSpec":
        return IntervalSpec(length=self.length * s)


class _Quadric(BaseModel, ABC):
    """Axis-aligned solid ellipsoid centred at the origin."""

    @property
    def dimension(self) -> int:
        return 3

    @property
    def is_convex(self) -> bool:
        return True

    @property
    @abstractmethod
    def semi_axes(self) -> np.ndarray:
        """Semi-axes (a, b, c) along x, y, z."""

    def centroid(self) -> np.ndarray:
        return np.zeros(3)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        ax = self.semi_axes
        return -ax, ax

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        q = np.sum((np.asarray(pts, dtype=float) / self.semi_axes) ** 2, axis=1)
        return q <= 1.0 + tol


class BallSpec(_Quadric):
    """Solid ball of given radius."""

    kind: Literal["ball"] = "ball"
    radius: float = Field(default=1.0, gt=0)

    @property
    def semi_axes(self) -> np.ndarray:
        return np.full(3, self.radius)

    def scaled(self, s: float) -> "BallSpec":
        return BallSpec(radius=self.radius * s)


class EllipsoidSpec(_Quadric):
    """Solid ellipsoid X_a with semi-axes scale * (1, 1, a)."""

    kind: Literal["ellipsoid"] = "ellipsoid"
    a: float = Field(..., gt=0)
    scale: float = Field(default=1.0, gt=0)

    @property
    def semi_axes(self) -> np.ndarray:
        return self.scale * np.array([1.0, 1.0, self.a])

    def scaled(self, s: float) -> "EllipsoidSpec":
        return EllipsoidSpec(a=self.a, scale=self.scale * s)


class SolidTorusSpec(BaseModel):
    """Solid torus with major radius R0 and minor radius r0 around the z-axis."""

    model_config = ConfigDict(populate_by_name=True)

    kind: Literal["solid_torus"] = "solid_torus"
    R0: float = Field(..., gt=0)
    r0: float = Field(..., gt=0)

    @model_validator(mode="after")
    def check_radii(self) -> "SolidTorusSpec":
        if not self.R0 > self.r0:
            raise ValueError("Solid torus needs R0 > r0")
        return self

    @property
    def dimension(self) -> int:
        return 3

    @property
    def is_convex(self) -> bool:
        return False

    def centroid(self) -> np.ndarray:
        return np.zeros(3)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        e = self.R0 + self.r0
        hi = np.array([e, e, self.r0])
        return -hi, hi

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        p = np.asarray(pts, dtype=float)
        rho = np.hypot(p[:, 0], p[:, 1])
        return (rho - self.R0) ** 2 + p[:, 2] ** 2 <= self.r0**2 * (1.0 + tol)

    def scaled(self, s: float) -> "SolidTorusSpec":
        return SolidTorusSpec(R0=self.R0 * s, r0=self.r0 * s)


class PointCloudSpec(BaseModel):
    """Raw point cloud read from a CSV file."""

    kind: Literal["point_cloud"] = "point_cloud"
    path: str

    def load_points(self) -> np.ndarray:
        from magwill.io import read_point_cloud

        return read_point_cloud(Path(self.path))

    @property
    def dimension(self) -> int:
        return int(self.load_points().shape[1])

    @property
    def is_convex(self) -> bool:
        return False

    def centroid(self) -> np.ndarray:
        return self.load_points().mean(axis=0)


DomainSpec = Annotated[
    Union[IntervalSpec, BallSpec, EllipsoidSpec, SolidTorusSpec, PointCloudSpec],
    Field(discriminator="kind"),
]

domain_adapter: TypeAdapter[Any] = TypeAdapter(DomainSpec)


class EstimateReport(BaseModel):
    """Refinement ladder of lower bounds for Mag(X, R d)."""

    R: float = Field(..., gt=0)
    estimates: list[tuple[int, float]] = Field(default_factory=list)
    converged: bool = False
    final: float
    delta_last: Optional[float] = None
    spacing: Optional[float] = Field(default=None, description="Sample spacing at the last level")
    spacing_ok: bool = False
    extrapolated: Optional[float] = Field(
        default=None, description="Advisory value extrapolated to zero spacing"
    )
    extrapolation_delta: Optional[float] = Field(
        default=None, description="Change of the extrapolated value over the last checkpoint"
    )
    condition_estimates: list[float] = Field(default_factory=list)
    strategy: str = "grid"
    seed: int = 0


class SurfaceMesh(BaseModel):
    """Closed, outward-oriented triangle mesh."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    vertices: np.ndarray
    triangles: np.ndarray
    normals: Optional[np.ndarray] = None

    @field_validator("vertices", mode="before")
    @classmethod
    def coerce_vertices(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("Vertices must be an (V, 3) array")
        return arr

    @field_validator("triangles", mode="before")
    @classmethod
    def coerce_triangles(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("Triangles must be an (F, 3) index array")
        return arr

    @field_validator("normals", mode="before")
    @classmethod
    def coerce_normals(cls, v: Any) -> Optional[np.ndarray]:
        return None if v is None else np.array(v, dtype=float)

    @field_serializer("vertices", "triangles", "normals")
    def serialize_array(self, v: Optional[np.ndarray]) -> Optional[list[Any]]:
        return None if v is None else v.tolist()

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_triangles


class GeometricFunctionals(BaseModel):
    """Volume, boundary area, mean-curvature integral and Willmore energy."""

    volume: float
    area: float
    mean_curvature_integral: float
    willmore: float

    @model_validator(mode="after")
    def check_finite(self) -> "GeometricFunctionals":
        vals = (self.volume, self.area, self.mean_curvature_integral, self.willmore)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("Functionals must be finite")
        if self.area <= 0:
            raise ValueError("Boundary measure must be positive")
        return self

    def scaled(self, s: float, n: int = 3) -> "GeometricFunctionals":
        """Functionals of the domain dilated by s in dimension n."""
        return GeometricFunctionals(
            volume=self.volume * s**n,
            area=self.area * s ** (n - 1),
            mean_curvature_integral=self.mean_curvature_integral * s ** (n - 2),
            willmore=self.willmore * s ** (n - 3),
        )


class IntrinsicVolumes(BaseModel):
    """Steiner-fit intrinsic volumes V0..V3 with Monte Carlo errors."""

    V: list[float] = Field(..., min_length=4, max_length=4)
    stderr: list[float] = Field(..., min_length=4, max_length=4)
    residual: float = Field(..., description="Relative Steiner polynomial fit residual")
    t_grid: list[float]
    volumes: list[float]
    volume_stderr: list[float]
    n_samples: int


class ExpansionPrediction(BaseModel):
    """Coefficients c0..c3 of the large-R magnitude expansion."""

    n: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    c: list[Optional[float]] = Field(..., min_length=4, max_length=4)
    norm: float = Field(..., gt=0, description="n! * omega_n")
    lambda_n: Optional[float] = None

    @model_validator(mode="after")
    def check_dimension(self) -> "ExpansionPrediction":
        if self.n % 2 != 1:
            raise ValueError("The expansion is defined for odd n")
        if self.m != (self.n + 1) // 2:
            raise ValueError("m must equal (n + 1) / 2")
        return self


class FitResult(BaseModel):
    """Weighted least-squares fit of a magnitude curve against powers of R."""

    coefficients: dict[int, float]
    errors: dict[int, float] = Field(default_factory=dict)
    residual_norm: float
    fixed: dict[int, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_disjoint(self) -> "FitResult":
        if not math.isfinite(self.residual_norm):
            raise ValueError("Residual norm must be finite")
        if set(self.fixed) & set(self.coefficients):
            raise ValueError("A power cannot be both fixed and fitted")
        return self


class CalibrationResult(BaseModel):
    """Calibrated lambda_3 with provenance."""

    lambda3: float
    uncertainty: float = Field(..., ge=0)
    provenance: dict[str, Any] = Field(default_factory=dict)


class ExperimentRow(BaseModel):
    """One ellipsoid of the falsification table."""

    a: float
    willmore: Optional[float] = None
    V0: Optional[float] = None
    c3_pred: Optional[float] = None
    c3_fitted: Optional[float] = None
    c3_fitted_err: Optional[float] = None
    ratio_c3_V0: Optional[float] = None
    error: Optional[str] = None


class ExperimentTable(BaseModel):
    """Falsification experiment output."""

    rows: list[ExperimentRow]
    lambda3: float
    spread: Optional[float] = None
    willmore_increasing: bool = False
    verdict: str


class RunManifest(BaseModel):
    """Provenance record of one CLI run."""

    command: str
    parameters: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str
    started_at: str
    finished_at: Optional[str] = None
