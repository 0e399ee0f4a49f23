"""Tests for utility functions."""

import math

import numpy as np
import pytest

from magwill.errors import RankDeficientError, UnsupportedDomainError, ValidationError
from magwill.types import BallSpec, EllipsoidSpec, IntervalSpec
from magwill.utils import (
    expansion_norm,
    make_rng,
    parse_domain,
    parse_grid,
    unit_ball_volume,
    validate_grid,
    weighted_lstsq,
)


def test_unit_ball_volume():
    """omega_0..omega_3 = 1, 2, pi, 4 pi / 3."""
    assert [unit_ball_volume(k) for k in range(4)] == pytest.approx(
        [1.0, 2.0, math.pi, 4 * math.pi / 3]
    )
    with pytest.raises(ValidationError):
        unit_ball_volume(-1)


def test_expansion_norm():
    assert expansion_norm(1) == pytest.approx(2.0)
    assert expansion_norm(3) == pytest.approx(8 * math.pi)


def test_parse_grid():
    """Colon form is a linspace; comma form is a list."""
    assert parse_grid("2:6:5") == [2.0, 3.0, 4.0, 5.0, 6.0]
    assert parse_grid("1, 0.5,0.25") == [1.0, 0.5, 0.25]
    for bad in ("1:2", "a,b", "1:2:0"):
        with pytest.raises(ValidationError):
            parse_grid(bad)


def test_validate_grid():
    assert validate_grid([1, 2, 3]).tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValidationError):
        validate_grid([])
    with pytest.raises(ValidationError):
        validate_grid([1.0, 1.0])
    with pytest.raises(ValidationError):
        validate_grid([0.0, 1.0])
    with pytest.raises(ValidationError):
        validate_grid([1.0, float("inf")])
    assert validate_grid([-1.0, 0.0], positive=False).tolist() == [-1.0, 0.0]


def test_parse_domain():
    """JSON, dicts and bare kind names."""
    assert parse_domain("ball") == BallSpec(radius=1.0)
    assert parse_domain('{"kind": "interval", "length": 2}') == IntervalSpec(length=2.0)
    assert parse_domain({"kind": "ellipsoid", "a": 0.5}) == EllipsoidSpec(a=0.5)
    with pytest.raises(ValidationError):
        parse_domain('{"kind": "interval"')
    with pytest.raises(ValidationError):
        parse_domain("interval")
    with pytest.raises(ValidationError):
        parse_domain({"kind": "ball", "radius": -1})


def test_parse_domain_unknown_kind_is_a_validation_error():
    with pytest.raises(ValidationError) as exc:
        parse_domain("disc")
    assert not isinstance(exc.value, UnsupportedDomainError)


def test_make_rng_is_keyed():
    """Streams depend on (seed, keys) only."""
    a = make_rng(3, 1).random(4)
    assert np.array_equal(a, make_rng(3, 1).random(4))
    assert not np.array_equal(a, make_rng(3, 2).random(4))


def test_weighted_lstsq_recovers_line():
    x = np.linspace(0.0, 1.0, 8)
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, err, residual = weighted_lstsq(A, 2.0 + 3.0 * x, np.ones_like(x))
    assert coef == pytest.approx([2.0, 3.0])
    assert residual == pytest.approx(0.0, abs=1e-12)
    assert np.all(err > 0)


def test_weighted_lstsq_rank_deficient():
    A = np.ones((5, 2))
    with pytest.raises(RankDeficientError):
        weighted_lstsq(A, np.ones(5), np.ones(5))
