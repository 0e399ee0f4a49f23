"""Shared fixtures."""

import numpy as np
import pytest

from magwill.io import write_point_cloud
from magwill.types import BallSpec, EllipsoidSpec, FiniteMetricSpace, IntervalSpec, SolidTorusSpec


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def two_points() -> FiniteMetricSpace:
    return FiniteMetricSpace.from_points([[0.0], [1.5]])


@pytest.fixture
def interval() -> IntervalSpec:
    return IntervalSpec(length=2.0)


@pytest.fixture
def unit_ball() -> BallSpec:
    return BallSpec(radius=1.0)


@pytest.fixture
def half_ellipsoid() -> EllipsoidSpec:
    return EllipsoidSpec(a=0.5)


@pytest.fixture
def sqrt2_torus() -> SolidTorusSpec:
    return SolidTorusSpec(R0=np.sqrt(2.0), r0=1.0)


@pytest.fixture
def cloud_csv(tmp_path, rng):
    """A 40-point planar cloud written as x,y CSV."""
    path = tmp_path / "cloud.csv"
    write_point_cloud(rng.uniform(0.0, 1.0, size=(40, 2)), path)
    return path
