"""Tests for the finite-space magnitude solver."""

import math

import mpmath
import numpy as np
import pytest

from magwill.errors import NotPositiveDefiniteError, ValidationError
from magwill.metric import magnitude, magnitude_curve, similarity_matrix, weighting
from magwill.types import FiniteMetricSpace


def _equilateral(n: int, d: float) -> FiniteMetricSpace:
    dist = np.full((n, n), d)
    np.fill_diagonal(dist, 0.0)
    return FiniteMetricSpace(dist=dist)


def _bipartite_k32() -> FiniteMetricSpace:
    """Graph metric of K_{3,2}: not positive definite for small R."""
    part = [0, 0, 0, 1, 1]
    dist = np.array([[0.0 if i == j else (1.0 if part[i] != part[j] else 2.0)
                      for j in range(5)] for i in range(5)])
    return FiniteMetricSpace(dist=dist)


def test_one_point_has_magnitude_one():
    """The one-point space has magnitude 1 at every scale."""
    space = FiniteMetricSpace.from_points([[0.3, 0.1]])
    for R in (0.1, 1.0, 50.0):
        assert magnitude(space, R) == pytest.approx(1.0, abs=1e-15)


def test_two_point_closed_form(two_points):
    """Two points at distance d: 2 / (1 + exp(-R d))."""
    for R in (0.2, 1.0, 7.5):
        expected = 2.0 / (1.0 + math.exp(-R * 1.5))
        assert magnitude(two_points, R) == pytest.approx(expected, rel=1e-12)


def test_equilateral_closed_form():
    """N equidistant points: N / (1 + (N - 1) exp(-R d))."""
    space = _equilateral(6, 0.8)
    for R in (0.5, 2.0):
        expected = 6.0 / (1.0 + 5.0 * math.exp(-R * 0.8))
        assert magnitude(space, R) == pytest.approx(expected, rel=1e-12)


def test_similarity_matrix_properties(rng):
    """Unit diagonal, symmetric, entries in (0, 1]."""
    space = FiniteMetricSpace.from_points(rng.normal(size=(7, 3)))
    Z = similarity_matrix(space, 1.3)
    assert np.allclose(np.diag(Z), 1.0)
    assert np.allclose(Z, Z.T)
    assert np.all((Z > 0) & (Z <= 1))


def test_random_euclidean_kernel_positive_definite(rng):
    """A random 4-point Euclidean set has a positive definite kernel."""
    space = FiniteMetricSpace.from_points(rng.normal(size=(4, 3)))
    Z = similarity_matrix(space, 0.7)
    eig = mpmath.eigsy(mpmath.matrix(Z.tolist()))[0]
    assert all(float(e) > 0 for e in eig)


def test_matches_high_precision_solve(rng):
    """A random 5-point set agrees with an mpmath solve to 1e-10 relative."""
    mpmath.mp.dps = 40
    space = FiniteMetricSpace.from_points(rng.normal(size=(5, 2)))
    R = 0.9
    Z = mpmath.matrix([[mpmath.e ** (-R * mpmath.mpf(d)) for d in row] for row in space.dist])
    w = mpmath.lu_solve(Z, mpmath.matrix([1] * 5))
    expected = float(sum(w))
    assert magnitude(space, R) == pytest.approx(expected, rel=1e-10)


def test_weighting_residual_and_condition(rng):
    """The weighting solves Z w = 1 within the residual contract."""
    space = FiniteMetricSpace.from_points(rng.uniform(size=(30, 3)))
    wv = weighting(space, 4.0)
    Z = similarity_matrix(space, 4.0)
    assert np.max(np.abs(Z @ wv.w - 1.0)) <= 1e-9
    assert wv.residual <= 1e-9
    assert wv.condition_estimate >= 1.0


def test_permutation_invariance(rng):
    """Relabeling points does not change the magnitude."""
    space = FiniteMetricSpace.from_points(rng.normal(size=(12, 2)))
    order = rng.permutation(12)
    assert magnitude(space.permuted(order), 2.0) == pytest.approx(magnitude(space, 2.0), rel=1e-12)


def test_monotone_under_insertion(rng):
    """200 random nested Euclidean pairs (up to 200 points) have nondecreasing magnitude."""
    for _ in range(200):
        pts = rng.normal(size=(int(rng.integers(3, 201)), int(rng.integers(1, 4))))
        R = float(rng.uniform(0.3, 5.0))
        full = FiniteMetricSpace.from_points(pts)
        k = int(rng.integers(1, len(pts)))
        sub = full.subspace(np.arange(k))
        assert magnitude(sub, R) <= magnitude(full, R) + 1e-9
        assert magnitude(sub, R) >= 1.0 - 1e-9


def test_not_positive_definite_is_reported():
    """K_{3,2} at small R has a negative eigenvalue and the solve refuses it."""
    with pytest.raises(NotPositiveDefiniteError) as exc:
        weighting(_bipartite_k32(), 0.1)
    assert exc.value.exit_code == 3


def test_near_duplicate_points_refused():
    """Points 1e-15 apart exceed the condition limit."""
    space = FiniteMetricSpace.from_points([[0.0], [1e-15]])
    with pytest.raises(NotPositiveDefiniteError):
        weighting(space, 1.0)


def test_invalid_scale(two_points):
    """R must be a positive real."""
    with pytest.raises(ValidationError):
        magnitude(two_points, 0.0)
    with pytest.raises(ValidationError):
        magnitude(two_points, float("nan"))


def test_curve_records_failures():
    """Failed grid points are recorded on the curve instead of raised."""
    curve = magnitude_curve(_bipartite_k32(), [0.1, 3.0])
    first, second = curve.samples
    assert first.failed and first.value is None
    assert not second.failed and second.value is not None


def test_curve_thread_count_does_not_change_output(rng):
    """Output is identical for any thread count and ordered by R."""
    space = FiniteMetricSpace.from_points(rng.normal(size=(20, 3)))
    grid = np.linspace(0.5, 6.0, 9)
    serial = magnitude_curve(space, grid)
    threaded = magnitude_curve(space, grid, threads=4)
    assert [s.R for s in threaded.samples] == [s.R for s in serial.samples]
    assert np.allclose(threaded.values, serial.values, rtol=0, atol=1e-12)


def test_curve_rejects_unsorted_grid(two_points):
    with pytest.raises(ValidationError):
        magnitude_curve(two_points, [2.0, 1.0])
