"""File formats: point clouds, distance matrices, curves, OFF meshes, JSON records."""

import logging
import sys
from pathlib import Path
from typing import Any, Optional, TypeVar, Union

import numpy as np
import pandas as pd
import pydantic
from pydantic import BaseModel

from magwill.errors import ValidationError
from magwill.types import (
    ExperimentTable,
    FiniteMetricSpace,
    MagnitudeCurve,
    MagnitudeSample,
    RunManifest,
    SurfaceMesh,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)

POINT_COLUMNS = ("x", "y", "z")
CURVE_COLUMNS = ["R", "value", "n_points", "condition_estimate"]
EXPERIMENT_COLUMNS = ["a", "willmore", "V0", "c3_pred", "c3_fitted", "c3_fitted_err", "ratio_c3_V0"]


def _read_csv(path: PathLike, **kwargs: Any) -> pd.DataFrame:
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError as e:
        raise ValidationError(f"File not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ValidationError(f"Malformed CSV: {path}", details={"error": str(e)}) from e


def read_point_cloud(path: PathLike) -> np.ndarray:
    """
    Read a point cloud CSV with header ``x``, ``x,y`` or ``x,y,z``.

    Returns:
        (N, d) float array
    """
    df = _read_csv(path)
    cols = [str(c).strip() for c in df.columns]
    if tuple(cols) not in (POINT_COLUMNS[:1], POINT_COLUMNS[:2], POINT_COLUMNS):
        raise ValidationError(
            "Point cloud header must be x, x,y or x,y,z", details={"header": ",".join(cols)}
        )
    try:
        pts = df.to_numpy(dtype=float)
    except ValueError as e:
        raise ValidationError(f"Non-numeric coordinates in {path}") from e
    if len(pts) == 0:
        raise ValidationError(f"Point cloud is empty: {path}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError(f"Non-finite coordinates in {path}")
    logger.debug("read %d points of dimension %d from %s", len(pts), pts.shape[1], path)
    return pts


def write_point_cloud(points: np.ndarray, path: PathLike) -> None:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    pd.DataFrame(pts, columns=list(POINT_COLUMNS[: pts.shape[1]])).to_csv(path, index=False)


def read_distance_matrix(path: PathLike) -> FiniteMetricSpace:
    """
    Read a square distance matrix CSV. A non-numeric first row is taken as labels.
    """
    raw = _read_csv(path, header=None, dtype=str)
    first = raw.iloc[0].tolist()
    labels: list[str] = []
    try:
        [float(v) for v in first]
        body = raw
    except (TypeError, ValueError):
        labels = [str(v).strip() for v in first]
        body = raw.iloc[1:]
    try:
        dist = body.to_numpy(dtype=float)
    except ValueError as e:
        raise ValidationError(f"Non-numeric distances in {path}") from e
    try:
        return FiniteMetricSpace(labels=labels, dist=dist)
    except pydantic.ValidationError as e:
        raise ValidationError(f"Invalid distance matrix in {path}", details={"error": str(e)}) from e


def _frame_out(df: pd.DataFrame, path: Optional[PathLike]) -> None:
    if path is None:
        df.to_csv(sys.stdout, index=False)
    else:
        df.to_csv(path, index=False)


def curve_frame(curve: MagnitudeCurve) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "R": s.R,
                "value": s.value,
                "n_points": s.n_points,
                "condition_estimate": s.condition_estimate,
            }
            for s in curve.samples
        ],
        columns=CURVE_COLUMNS,
    )


def write_curve_csv(curve: MagnitudeCurve, path: Optional[PathLike] = None) -> None:
    """Write ``R,value,n_points,condition_estimate``; failed samples leave ``value`` empty."""
    _frame_out(curve_frame(curve), path)


def read_curve_csv(path: PathLike) -> MagnitudeCurve:
    df = _read_csv(path)
    missing = [c for c in CURVE_COLUMNS if c not in df.columns]
    if missing:
        raise ValidationError(f"Curve CSV lacks columns: {missing}")
    samples = []
    for row in df.itertuples(index=False):
        value = None if pd.isna(row.value) else float(row.value)
        cond = None if pd.isna(row.condition_estimate) else float(row.condition_estimate)
        samples.append(
            MagnitudeSample(
                R=float(row.R),
                value=value,
                n_points=int(row.n_points),
                condition_estimate=cond,
                failed=value is None,
            )
        )
    try:
        return MagnitudeCurve(samples=samples)
    except pydantic.ValidationError as e:
        raise ValidationError("Invalid magnitude curve", details={"error": str(e)}) from e


def write_experiment_csv(table: ExperimentTable, path: Optional[PathLike] = None) -> None:
    rows = [{c: getattr(r, c) for c in EXPERIMENT_COLUMNS} for r in table.rows]
    _frame_out(pd.DataFrame(rows, columns=EXPERIMENT_COLUMNS), path)


def read_off(path: PathLike) -> SurfaceMesh:
    """Read a triangle mesh in OFF format."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ValidationError(f"File not found: {path}") from e
    tokens = [
        line.split("#", 1)[0].split()
        for line in text.splitlines()
        if line.split("#", 1)[0].strip()
    ]
    if not tokens or tokens[0][0] != "OFF":
        raise ValidationError(f"Missing OFF header in {path}")
    head = tokens[0][1:] or tokens[1]
    body = tokens[1:] if tokens[0][1:] else tokens[2:]
    try:
        nv, nf = int(head[0]), int(head[1])
        verts = np.array([[float(v) for v in row[:3]] for row in body[:nv]])
        faces = []
        for row in body[nv : nv + nf]:
            if int(row[0]) != 3:
                raise ValidationError("Only triangular faces are supported")
            faces.append([int(v) for v in row[1:4]])
    except (IndexError, ValueError) as e:
        raise ValidationError(f"Malformed OFF body in {path}") from e
    if len(verts) != nv or len(faces) != nf:
        raise ValidationError(f"OFF counts do not match the body in {path}")
    try:
        return SurfaceMesh(vertices=verts, triangles=np.array(faces, dtype=np.int64))
    except pydantic.ValidationError as e:
        raise ValidationError(f"Invalid mesh in {path}", details={"error": str(e)}) from e


def write_off(mesh: SurfaceMesh, path: PathLike) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.edges())}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in t) for t in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_model(model: BaseModel, path: Optional[PathLike] = None) -> None:
    """Write a pydantic record as indented JSON (stdout when path is None)."""
    text = model.model_dump_json(indent=2)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def read_model(path: PathLike, model: type[M]) -> M:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ValidationError(f"File not found: {path}") from e
    try:
        return model.model_validate_json(text)
    except pydantic.ValidationError as e:
        raise ValidationError(
            f"Invalid {model.__name__} JSON in {path}", details={"error": str(e)}
        ) from e


def manifest_path(out: PathLike) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(manifest: RunManifest, out: PathLike) -> Path:
    """Write the manifest next to ``out`` as ``<out>.manifest.json``."""
    target = manifest_path(out)
    write_model(manifest, target)
    return target
