"""Tests for expectation expansions, two-variable reduction and parity."""

import math

import pytest
import sympy as sp

from magwill.errors import (
    CutoffTooLowError,
    JetTooShallowError,
    SymbolFormatError,
    UnboundScalarError,
    ValidationError,
)
from magwill.reduction import (
    CircleManifold,
    Torus2Manifold,
    TwoVariableSymbol,
    direct_expectation,
    expansion_value,
    expectation_expansion,
    parity_vanishing_check,
    reduce_two_variable,
)
from magwill.symbols import R, PolyhomSymbol, is_zero, symbols_equal

S_11 = sp.Symbol("S_11", real=True)
circle = CircleManifold(radius=1.0)


def test_radial_symbols_on_circle():
    """rho^2 and rho both integrate to 2 pi at the base point, nothing below."""
    for text, order in (("rho**2", 2), ("rho", 1)):
        coeffs = expectation_expansion(PolyhomSymbol.build(order, [text]), circle, k_max=2)
        assert coeffs[0] == pytest.approx(2 * math.pi)
        assert coeffs[1:] == [0, 0]


def test_bound_coefficient():
    """f R^2 with f = cos^2 integrates to pi."""
    sym = PolyhomSymbol.build(2, ["f(x1)*R**2"])
    (a0,) = expectation_expansion(sym, circle, k_max=0, bindings={"f": "cos(x1)**2"})
    assert a0 == pytest.approx(math.pi)
    plain = PolyhomSymbol.build(0, ["kappa"])
    (b0,) = expectation_expansion(plain, circle, k_max=0, bindings={"kappa": "3"})
    assert b0 == pytest.approx(6 * math.pi)


def test_circle_radius_scales_density():
    sym = PolyhomSymbol.build(0, ["1"])
    (a0,) = expectation_expansion(sym, CircleManifold(radius=2.5), k_max=0)
    assert a0 == pytest.approx(5 * math.pi)


def test_torus_expectation():
    sym = PolyhomSymbol.build(0, ["1 + cos(x1)*cos(x2)"], dim=2)
    (a0,) = expectation_expansion(sym, Torus2Manifold(r1=1.0, r2=2.0), k_max=0)
    assert a0 == pytest.approx(8 * math.pi**2)


def test_unbound_coefficient_raises():
    with pytest.raises(UnboundScalarError) as exc:
        expectation_expansion(PolyhomSymbol.build(0, ["g(x1)"]), circle, k_max=0)
    assert "g" in exc.value.details["unbound"]


def test_expectation_validation():
    with pytest.raises(ValidationError):
        expectation_expansion(PolyhomSymbol.build(0, ["1"], dim=2), circle, k_max=0)
    truncated = PolyhomSymbol.build(2, ["rho**2", "R"], cutoff=1)
    with pytest.raises(CutoffTooLowError):
        expectation_expansion(truncated, circle, k_max=3)
    with pytest.raises(ValidationError):
        direct_expectation("R", circle, R_value=0.0)


def test_x_independent_expansion_is_exact():
    """The finite expansion of an x-independent polynomial symbol is its value."""
    full = "R**2 + xi1**2 + 3*R + 2"
    sym = PolyhomSymbol.from_full_symbol(full, order=2, levels=3)
    coeffs = expectation_expansion(sym, circle, k_max=3)
    assert coeffs == pytest.approx([2 * math.pi, 6 * math.pi, 4 * math.pi, 0.0])
    for R_value in (1.0, 8.0, 16.0):
        assert expansion_value(coeffs, 2, R_value) == pytest.approx(
            direct_expectation(full, circle, R_value), rel=1e-12
        )


def test_remainder_decays_for_x_dependent_symbol():
    """sqrt(R^2 + xi^2 + f): after four terms the remainder falls like R^-3."""
    full = "sqrt(R**2 + xi1**2 + f)"
    bindings = {"f": "2 + cos(x1)"}
    sym = PolyhomSymbol.from_full_symbol(full, order=1, levels=3)
    coeffs = expectation_expansion(sym, circle, k_max=3, bindings=bindings)
    assert coeffs[0] == pytest.approx(2 * math.pi)
    assert coeffs[2] == pytest.approx(2 * math.pi)
    remainders = [
        abs(direct_expectation(full, circle, Rv, bindings) - expansion_value(coeffs, 1, Rv))
        for Rv in (8.0, 16.0, 32.0)
    ]
    for coarse, fine in zip(remainders, remainders[1:]):
        assert fine <= 1.25 * coarse / 8.0


def test_y_independent_symbol_is_unchanged():
    sym = TwoVariableSymbol.build(2, ["rho**2", "xi1", "1"])
    reduced = reduce_two_variable(sym, target_degree=0)
    assert symbols_equal(reduced, PolyhomSymbol.build(2, ["rho**2", "xi1", "1"], cutoff=0))


def test_two_variable_coefficients_are_checked():
    """Only x, y, xi, R and the graph S(y) may appear in a two-variable symbol."""
    with pytest.raises(SymbolFormatError):
        TwoVariableSymbol.build(0, ["T(y1)*xi1/rho"])
    with pytest.raises(SymbolFormatError):
        TwoVariableSymbol.build(0, ["S(x1)*xi1/rho"])
    with pytest.raises(SymbolFormatError):
        TwoVariableSymbol.build(0, ["q*xi1/rho"])
    with pytest.raises(SymbolFormatError):
        TwoVariableSymbol.build(0, [[["1", "0"], ["0", "1"]]])
    sym = TwoVariableSymbol.build(0, ["x1*S(y1)*xi1/rho"])
    assert isinstance(sym, TwoVariableSymbol)


def test_quadratic_graph_correction():
    """xi . grad S(y) / rho^2 with S = (3 z1^2 + 5 z2^2) / 2 leaves -i sum S_ll d_xi_l(xi_l / rho^2)."""
    sym = TwoVariableSymbol.build(
        -1,
        ["(xi1*Derivative(S(y1, y2), y1) + xi2*Derivative(S(y1, y2), y2))/rho**2"],
        dim=2,
    )
    reduced = reduce_two_variable(sym, target_degree=-2, S="(3*z1**2 + 5*z2**2)/2")
    expected = PolyhomSymbol.build(
        -1,
        [0, "-I*(8/rho**2 - (6*xi1**2 + 10*xi2**2)/rho**4)"],
        dim=2,
        cutoff=-2,
    )
    assert is_zero(reduced.scalar(0), 2)
    assert symbols_equal(reduced, expected)


def test_formal_jet_correction():
    """With a formal jet the second derivative of S becomes S_11."""
    sym = TwoVariableSymbol.build(-1, ["xi1*Derivative(S(y1), y1)/rho**2"])
    reduced = reduce_two_variable(sym, target_degree=-2)
    rho = sp.Symbol("rho", positive=True)
    xi1 = sp.Symbol("xi1", real=True)
    expected = -sp.I * S_11 * (1 / rho**2 - 2 * xi1**2 / rho**4)
    assert is_zero(reduced.scalar(1) - expected, 1)


def test_second_order_correction_of_graph_value():
    """S(y) / rho^2: only the half second-derivative term survives at the base point."""
    sym = TwoVariableSymbol.build(-2, ["S(y1)/rho**2"])
    reduced = reduce_two_variable(sym, target_degree=-4)
    rho = sp.Symbol("rho", positive=True)
    xi1 = sp.Symbol("xi1", real=True)
    assert is_zero(reduced.scalar(0), 1)
    assert is_zero(reduced.scalar(1), 1)
    assert is_zero(reduced.scalar(2) - (S_11 / rho**4 - 4 * S_11 * xi1**2 / rho**6), 1)


def test_reduction_is_linear():
    text = "xi1*Derivative(S(y1), y1)/rho**2"
    one = reduce_two_variable(TwoVariableSymbol.build(-1, [text]), target_degree=-2)
    three = reduce_two_variable(TwoVariableSymbol.build(-1, [f"3*({text})"]), target_degree=-2)
    assert is_zero(three.scalar(1) - 3 * one.scalar(1), 1)


def test_third_derivatives_need_a_deeper_jet():
    sym = TwoVariableSymbol.build(0, ["xi1**2*Derivative(S(y1), y1, y1)/rho**2"])
    assert reduce_two_variable(sym, target_degree=0).scalar(0) != 0
    with pytest.raises(JetTooShallowError):
        reduce_two_variable(sym, target_degree=-1)


def test_reduction_validation():
    truncated = TwoVariableSymbol.build(2, ["rho**2", "xi1"], cutoff=1)
    with pytest.raises(CutoffTooLowError):
        reduce_two_variable(truncated, target_degree=-1)
    with pytest.raises(ValidationError):
        reduce_two_variable(TwoVariableSymbol.build(0, ["1"]), target_degree=1)
    sym = TwoVariableSymbol.build(-1, ["xi1*Derivative(S(y1), y1)/rho**2"])
    with pytest.raises(ValidationError):
        reduce_two_variable(sym, target_degree=-2, S="z1 + z1**2")


def test_parity_of_odd_term():
    report = parity_vanishing_check(PolyhomSymbol.build(-1, ["xi1/rho**2"]))
    (term,) = report.terms
    assert term.parity == "odd"
    assert term.value_at_zero == "0"
    assert report.odd_terms_vanish
    assert report.survivors == []


@pytest.mark.parametrize("p", [1, 3])
def test_parity_of_radial_power(p):
    """rho^p is even and survives as R^p."""
    report = parity_vanishing_check(PolyhomSymbol.build(p, [f"rho**{p}"]))
    assert all(t.parity == "even" for t in report.terms)
    (survivor,) = report.survivors
    assert sp.sympify(survivor.value_at_zero, locals={"R": R}) == R**p


def test_parity_after_reduction():
    """Odd terms of the reduced quadratic-graph symbol vanish; the trace survivor is -8 i / R^2."""
    sym = TwoVariableSymbol.build(
        -1,
        ["(xi1*Derivative(S(y1, y2), y1) + xi2*Derivative(S(y1, y2), y2))/rho**2"],
        dim=2,
    )
    reduced = reduce_two_variable(sym, target_degree=-2, S="(3*z1**2 + 5*z2**2)/2")
    report = parity_vanishing_check(reduced)
    assert report.odd_terms_vanish
    (survivor,) = report.survivors
    assert survivor.degree == -2
    assert sp.sympify(survivor.value_at_zero, locals={"R": R}) == -8 * sp.I / R**2
