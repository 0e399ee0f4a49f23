"""Tests for boundary functionals and intrinsic volumes."""

import math

import numpy as np
import pytest

from magwill.errors import NonConvexSpecError, UnsupportedDomainError, ValidationError
from magwill.geometry import (
    functionals_quadrature,
    interval_functionals,
    intrinsic_volumes,
    torus_willmore_exact,
)
from magwill.mesh import functionals_mesh, mesh_domain
from magwill.types import BallSpec, EllipsoidSpec, SolidTorusSpec


def test_unit_ball_quadrature(unit_ball):
    """V = 4 pi / 3, A = 4 pi, int H = 4 pi, W = 4 pi."""
    g = functionals_quadrature(unit_ball)
    assert g.volume == pytest.approx(4 * math.pi / 3, rel=1e-10)
    assert g.area == pytest.approx(4 * math.pi, rel=1e-10)
    assert g.mean_curvature_integral == pytest.approx(4 * math.pi, rel=1e-10)
    assert g.willmore == pytest.approx(4 * math.pi, rel=1e-10)


def test_willmore_is_scale_invariant():
    small = functionals_quadrature(BallSpec(radius=0.5), quad_order=32)
    large = functionals_quadrature(BallSpec(radius=3.0), quad_order=32)
    assert small.willmore == pytest.approx(large.willmore, rel=1e-10)
    assert large.area == pytest.approx(36 * small.area, rel=1e-10)


def test_sqrt2_torus_quadrature(sqrt2_torus):
    """The Clifford-ratio torus: W = 2 pi^2, area 4 pi^2 R0 r0, int H = 2 pi^2 R0."""
    g = functionals_quadrature(sqrt2_torus)
    R0, r0 = sqrt2_torus.R0, sqrt2_torus.r0
    assert g.willmore == pytest.approx(2 * math.pi**2, abs=1e-6)
    assert torus_willmore_exact(R0, r0) == pytest.approx(2 * math.pi**2)
    assert g.area == pytest.approx(4 * math.pi**2 * R0 * r0, rel=1e-10)
    assert g.mean_curvature_integral == pytest.approx(2 * math.pi**2 * R0, rel=1e-10)
    assert g.volume == pytest.approx(2 * math.pi**2 * R0 * r0**2, rel=1e-10)


def test_torus_willmore_matches_closed_form():
    spec = SolidTorusSpec(R0=3.0, r0=1.0)
    g = functionals_quadrature(spec, quad_order=64)
    assert g.willmore == pytest.approx(torus_willmore_exact(3.0, 1.0), rel=1e-9)
    with pytest.raises(ValidationError):
        torus_willmore_exact(1.0, 2.0)


def test_flattened_ellipsoids_gain_willmore_energy():
    """W(X_a) grows as the ellipsoid flattens; the ball bound 4 pi holds."""
    ws = [functionals_quadrature(EllipsoidSpec(a=a), quad_order=96).willmore
          for a in (1.0, 0.5, 0.25, 0.125)]
    assert ws[0] == pytest.approx(4 * math.pi, rel=1e-10)
    assert all(b > a for a, b in zip(ws, ws[1:]))
    assert min(ws) >= 4 * math.pi - 1e-9


def test_interval_functionals():
    g = interval_functionals(2.0)
    assert (g.volume, g.area, g.mean_curvature_integral, g.willmore) == (2.0, 2.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        interval_functionals(0.0)


def test_quadrature_rejects_point_clouds(cloud_csv):
    from magwill.types import PointCloudSpec

    with pytest.raises(UnsupportedDomainError):
        functionals_quadrature(PointCloudSpec(path=str(cloud_csv)))
    with pytest.raises(ValidationError):
        functionals_quadrature(BallSpec(), quad_order=2)


def test_mesh_agrees_with_quadrature(half_ellipsoid):
    """The discrete estimator converges to the quadrature values."""
    exact = functionals_quadrature(half_ellipsoid)
    approx = functionals_mesh(mesh_domain(half_ellipsoid, refinement=4))
    assert approx.area == pytest.approx(exact.area, rel=5e-3)
    assert approx.mean_curvature_integral == pytest.approx(exact.mean_curvature_integral, rel=1e-2)
    assert approx.willmore == pytest.approx(exact.willmore, rel=1e-2)


def test_ball_intrinsic_volumes(unit_ball):
    """Steiner fit recovers (1, 4, 2 pi, 4 pi / 3) for the unit ball."""
    iv = intrinsic_volumes(unit_ball, N_mc=200_000, seed=1)
    expected = [1.0, 4.0, 2 * math.pi, 4 * math.pi / 3]
    assert np.allclose(iv.V, expected, rtol=5e-2)
    assert iv.residual < 1e-2
    assert iv.t_grid[0] == 0.0
    assert len(iv.volumes) == len(iv.t_grid)


def test_intrinsic_volumes_are_seeded(half_ellipsoid):
    a = intrinsic_volumes(half_ellipsoid, N_mc=30_000, seed=5)
    b = intrinsic_volumes(half_ellipsoid, N_mc=30_000, seed=5)
    assert a.V == b.V


def test_intrinsic_volumes_refuse_nonconvex(sqrt2_torus):
    with pytest.raises(NonConvexSpecError):
        intrinsic_volumes(sqrt2_torus)


def test_intrinsic_volumes_validate_inputs(unit_ball):
    with pytest.raises(ValidationError):
        intrinsic_volumes(unit_ball, t_grid=[0.5, 1.0])
    with pytest.raises(ValidationError):
        intrinsic_volumes(unit_ball, N_mc=10)
