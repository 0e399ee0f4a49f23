"""Triangulated boundaries and the discrete curvature estimator."""

import logging
import math
from typing import Any

import numpy as np
import scipy.sparse as sp

from magwill.errors import DegenerateMeshError, UnsupportedDomainError, ValidationError
from magwill.types import (
    BallSpec,
    EllipsoidSpec,
    GeometricFunctionals,
    SolidTorusSpec,
    SurfaceMesh,
)

logger = logging.getLogger(__name__)

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICOSAHEDRON_VERTICES = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)

_ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    tri = vertices[faces]
    normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.einsum("ij,ij->i", normal, tri.mean(axis=1)) < 0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def _subdivide(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split every triangle in four, midpoints projected to the unit sphere."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges, inverse = np.unique(np.sort(e, axis=1), axis=0, return_inverse=True)
    mid = vertices[edges[:, 0]] + vertices[edges[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    nf = len(faces)
    m = inverse.reshape(-1) + len(vertices)
    m01, m12, m20 = m[:nf], m[nf : 2 * nf], m[2 * nf :]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    return np.vstack([vertices, mid]), new_faces


def icosphere(refinement: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit icosphere: 10 * 4**refinement + 2 vertices."""
    v = _ICOSAHEDRON_VERTICES / np.linalg.norm(_ICOSAHEDRON_VERTICES, axis=1, keepdims=True)
    f = _orient_outward(v, _ICOSAHEDRON_FACES)
    for _ in range(refinement):
        v, f = _subdivide(v, f)
    return v, f


def _torus_mesh(spec: SolidTorusSpec, refinement: int) -> SurfaceMesh:
    n_u, n_v = 12 * 2**refinement, 6 * 2**refinement
    u = 2.0 * np.pi * np.arange(n_u) / n_u
    v = 2.0 * np.pi * np.arange(n_v) / n_v
    U, V = np.meshgrid(u, v, indexing="ij")
    ring = spec.R0 + spec.r0 * np.cos(V)
    verts = np.stack([ring * np.cos(U), ring * np.sin(U), spec.r0 * np.sin(V)], axis=-1)
    normals = np.stack([np.cos(V) * np.cos(U), np.cos(V) * np.sin(U), np.sin(V)], axis=-1)

    i, j = np.meshgrid(np.arange(n_u), np.arange(n_v), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ip, jp = (i + 1) % n_u, (j + 1) % n_v
    idx = lambda a, b: a * n_v + b  # noqa: E731
    tris = np.concatenate(
        [
            np.stack([idx(i, j), idx(ip, j), idx(ip, jp)], axis=1),
            np.stack([idx(i, j), idx(ip, jp), idx(i, jp)], axis=1),
        ]
    )
    return SurfaceMesh(
        vertices=verts.reshape(-1, 3), triangles=tris, normals=normals.reshape(-1, 3)
    )


def mesh_domain(spec: Any, refinement: int = 3) -> SurfaceMesh:
    """
    Triangulate the boundary of a smooth 3D domain.

    Balls and ellipsoids start from the icosahedron (12 vertices) and grow
    about 4x per level; the torus uses a (12 * 2**r) x (6 * 2**r) grid.
    Analytic outward normals are attached.

    Raises:
        UnsupportedDomainError: Not a ball, ellipsoid or solid torus
    """
    if refinement < 0:
        raise ValidationError("refinement must be nonnegative", details={"refinement": refinement})
    if isinstance(spec, (BallSpec, EllipsoidSpec)):
        v, f = icosphere(refinement)
        axes = spec.semi_axes
        normals = v / axes
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        mesh = SurfaceMesh(vertices=v * axes, triangles=f, normals=normals)
    elif isinstance(spec, SolidTorusSpec):
        mesh = _torus_mesh(spec, refinement)
    else:
        raise UnsupportedDomainError(
            "Meshing needs a ball, ellipsoid or solid torus",
            details={"kind": getattr(spec, "kind", type(spec).__name__)},
        )
    logger.debug(
        "meshed %s at refinement %d: V=%d F=%d",
        spec.kind, refinement, mesh.n_vertices, mesh.n_triangles,
    )
    return mesh


def _face_geometry(mesh: SurfaceMesh) -> tuple[np.ndarray, np.ndarray]:
    tri = mesh.vertices[mesh.triangles]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1), cross


def enclosed_volume(mesh: SurfaceMesh) -> float:
    """Signed volume by the divergence theorem (positive for outward orientation)."""
    tri = mesh.vertices[mesh.triangles]
    return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


def validate_mesh(mesh: SurfaceMesh, area_tol: float = 1e-14) -> None:
    """
    Check the mesh is a closed, consistently outward-oriented manifold.

    Raises:
        DegenerateMeshError: Zero-area triangle, non-manifold edge, open boundary,
            inconsistent or inward orientation
    """
    t = mesh.triangles
    if t.size == 0:
        raise DegenerateMeshError("Mesh has no triangles")
    if t.min() < 0 or t.max() >= mesh.n_vertices:
        raise DegenerateMeshError("Triangle index out of range")

    areas, _ = _face_geometry(mesh)
    scale = float(np.ptp(mesh.vertices, axis=0).max()) ** 2
    tiny = np.nonzero(areas <= area_tol * scale)[0]
    if tiny.size:
        raise DegenerateMeshError(
            "Zero-area triangle", details={"triangle": int(tiny[0]), "count": int(tiny.size)}
        )

    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    undirected, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    if np.any(counts != 2):
        bad = undirected[counts != 2][0]
        raise DegenerateMeshError(
            "Non-manifold or boundary edge",
            details={"edge": f"{bad[0]}-{bad[1]}", "count": int(counts[counts != 2][0])},
        )
    _, dcounts = np.unique(directed, axis=0, return_counts=True)
    if np.any(dcounts != 1):
        raise DegenerateMeshError("Inconsistent triangle orientation")
    if enclosed_volume(mesh) <= 0:
        raise DegenerateMeshError("Mesh is oriented inward (nonpositive enclosed volume)")


def _neighborhoods(mesh: SurfaceMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """2-ring and 3-ring adjacency (vertex itself excluded)."""
    e = mesh.edges()
    n = mesh.n_vertices
    data = np.ones(2 * len(e))
    A = sp.coo_matrix(
        (data, (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    A2 = A @ A
    rings = []
    for ring in (A + A2, A + A2 + A2 @ A):
        ring = ring.tocsr()
        ring.setdiag(0)
        ring.eliminate_zeros()
        rings.append(ring)
    return rings[0], rings[1]


def _vertex_normals(mesh: SurfaceMesh, face_cross: np.ndarray) -> np.ndarray:
    if mesh.normals is not None:
        return mesh.normals / np.linalg.norm(mesh.normals, axis=1, keepdims=True)
    normals = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(normals, mesh.triangles[:, k], face_cross)
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def _local_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def _height_design(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Monomials of degree 1..4 in the tangent coordinates, second order first."""
    return np.stack(
        [
            x * x, x * y, y * y, x, y,
            x**3, x * x * y, x * y * y, y**3,
            x**4, x**3 * y, x * x * y * y, x * y**3, y**4,
        ],
        axis=1,
    )


_FIT_TERMS = 14
_MIN_FIT_POINTS = _FIT_TERMS + 2


def vertex_mean_curvature(mesh: SurfaceMesh) -> np.ndarray:
    """
    Per-vertex mean curvature from a quartic height-field fit.

    In the tangent frame with outward normal the neighbors are fitted by
    z = a x^2 + b xy + c y^2 + d x + e y + (cubic and quartic terms); the
    unit sphere gives H = +1. The 2-ring is used when it holds enough
    points, otherwise the 3-ring.
    """
    _, cross = _face_geometry(mesh)
    normals = _vertex_normals(mesh, cross)
    two, three = _neighborhoods(mesh)
    H = np.empty(mesh.n_vertices)
    for i in range(mesh.n_vertices):
        nbrs = two.indices[two.indptr[i] : two.indptr[i + 1]]
        if nbrs.size < _MIN_FIT_POINTS:
            nbrs = three.indices[three.indptr[i] : three.indptr[i + 1]]
        if nbrs.size < _FIT_TERMS:
            raise DegenerateMeshError("Too few neighbors for a height-field fit", details={"vertex": i})
        n = normals[i]
        t1, t2 = _local_frame(n)
        rel = mesh.vertices[nbrs] - mesh.vertices[i]
        x, y, z = rel @ t1, rel @ t2, rel @ n
        s = math.sqrt(float(np.max(x * x + y * y)))
        coef, *_ = np.linalg.lstsq(_height_design(x / s, y / s), z / s, rcond=None)
        a, b, c = coef[:3] / s
        d, e = coef[3:5]
        H[i] = -((1 + e * e) * 2 * a - 2 * d * e * b + (1 + d * d) * 2 * c) / (
            2.0 * (1 + d * d + e * e) ** 1.5
        )
    return H


def vertex_areas(mesh: SurfaceMesh) -> np.ndarray:
    """
    Mixed Voronoi vertex areas.

    Non-obtuse triangles contribute their Voronoi regions; an obtuse triangle
    gives half its area to the obtuse corner and a quarter to each other one.
    """
    tri = mesh.vertices[mesh.triangles]
    areas, _ = _face_geometry(mesh)
    opposite = [tri[:, 2] - tri[:, 1], tri[:, 0] - tri[:, 2], tri[:, 1] - tri[:, 0]]
    sq = [np.einsum("ij,ij->i", v, v) for v in opposite]
    twice = 2.0 * areas
    cot = [
        -np.einsum("ij,ij->i", opposite[(k + 2) % 3], opposite[(k + 1) % 3]) / twice
        for k in range(3)
    ]
    obtuse = np.stack([c < 0 for c in cot])
    any_obtuse = obtuse.any(axis=0)
    out = np.zeros(mesh.n_vertices)
    for k in range(3):
        j, l = (k + 1) % 3, (k + 2) % 3
        voronoi = (sq[j] * cot[j] + sq[l] * cot[l]) / 8.0
        share = np.where(any_obtuse, np.where(obtuse[k], areas / 2.0, areas / 4.0), voronoi)
        np.add.at(out, mesh.triangles[:, k], share)
    return out


def functionals_mesh(mesh: SurfaceMesh) -> GeometricFunctionals:
    """
    Discrete volume, area, mean-curvature integral and Willmore energy.

    Raises:
        DegenerateMeshError: From ``validate_mesh`` or the curvature fit
    """
    validate_mesh(mesh)
    areas, _ = _face_geometry(mesh)
    H = vertex_mean_curvature(mesh)
    A = vertex_areas(mesh)
    result = GeometricFunctionals(
        volume=enclosed_volume(mesh),
        area=float(areas.sum()),
        mean_curvature_integral=float(np.dot(H, A)),
        willmore=float(np.dot(H * H, A)),
    )
    logger.debug("mesh functionals V=%d: %s", mesh.n_vertices, result)
    return result
