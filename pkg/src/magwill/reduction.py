"""Expectation-value expansions, two-variable reduction and the parity argument."""

import logging
import math
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
import sympy as sp
from pydantic import BaseModel, Field, model_validator
from sympy.core.function import AppliedUndef

from magwill.errors import (
    CutoffTooLowError,
    JetTooShallowError,
    SymbolFormatError,
    UnboundScalarError,
    ValidationError,
)
from magwill.symbols import (
    RHO,
    R,
    S_FUNCTION,
    ExprLike,
    PolyhomSymbol,
    d_xi,
    from_radical,
    parse_expr,
    to_radical,
    x_symbols,
    xi_symbols,
    y_symbols,
)

logger = logging.getLogger(__name__)

DEFAULT_QUAD_NODES = 256


class CircleManifold(BaseModel):
    """Circle of the given radius, coordinate x1 = angle in [0, 2 pi)."""

    kind: Literal["circle"] = "circle"
    radius: float = Field(default=1.0, gt=0)

    @property
    def dim(self) -> int:
        return 1

    @property
    def density(self) -> float:
        return self.radius

    @property
    def volume(self) -> float:
        return 2.0 * math.pi * self.radius


class Torus2Manifold(BaseModel):
    """Flat torus of circumferences 2 pi r1 and 2 pi r2, coordinates (x1, x2) angles."""

    kind: Literal["torus2"] = "torus2"
    r1: float = Field(default=1.0, gt=0)
    r2: float = Field(default=1.0, gt=0)

    @property
    def dim(self) -> int:
        return 2

    @property
    def density(self) -> float:
        return self.r1 * self.r2

    @property
    def volume(self) -> float:
        return 4.0 * math.pi**2 * self.r1 * self.r2


Manifold = Annotated[Union[CircleManifold, Torus2Manifold], Field(discriminator="kind")]


class TwoVariableSymbol(PolyhomSymbol):
    """
    Symbol a(x, y, xi, R) whose coefficients involve both points.

    Coefficients use x1.., y1.. and the graph function ``S``, e.g.
    ``S(y1, y2)`` or ``Derivative(S(y1, y2), y1)``. The graph is always
    applied to the full y point and no other formal function may appear.
    """

    @model_validator(mode="after")
    def check_two_variable(self) -> "TwoVariableSymbol":
        if not self.is_scalar:
            raise SymbolFormatError("Two-variable symbols are scalar")
        y = y_symbols(self.dim)
        allowed = (
            set(xi_symbols(self.dim)) | set(x_symbols(self.dim)) | set(y) | {R, RHO}
        )
        for level in self.components:
            expr = level[0, 0]
            for f in expr.atoms(AppliedUndef):
                if f.func != S_FUNCTION:
                    raise SymbolFormatError(
                        "Only the graph function S may appear", details={"function": str(f.func)}
                    )
                if f.args != y:
                    raise SymbolFormatError(
                        "The graph function takes the y point", details={"term": str(f)}
                    )
            foreign = {
                s for s in expr.free_symbols
                if s not in allowed and not str(s).startswith("S_")
            }
            if foreign:
                raise SymbolFormatError(
                    "Unknown symbols in a two-variable coefficient",
                    details={"symbols": ", ".join(sorted(map(str, foreign)))},
                )
        return self


Bindings = dict[str, ExprLike]


def _bind(expr: sp.Expr, bindings: Optional[Bindings], dim: int) -> sp.Expr:
    """Replace formal scalars by their bound expressions in x1..xd."""
    bindings = bindings or {}
    x = x_symbols(dim)
    for name, body in bindings.items():
        value = parse_expr(body, dim)
        func = sp.Function(name)
        if expr.has(func):
            expr = expr.subs(func, sp.Lambda(x, value)).doit()
        expr = expr.subs({s: value for s in expr.free_symbols if str(s) == name})
    unbound = sorted(
        {str(a.func) for a in expr.atoms(AppliedUndef)}
        | {str(s) for s in expr.free_symbols if s not in x}
    )
    if unbound:
        raise UnboundScalarError(
            "Formal coefficients lack a binding", details={"unbound": ", ".join(unbound)}
        )
    return expr


def _integrate(expr: sp.Expr, manifold: Any, n_quad: int) -> complex:
    """Periodic trapezoid rule over the manifold's angle coordinates."""
    dim = manifold.dim
    x = x_symbols(dim)
    nodes = 2.0 * np.pi * np.arange(n_quad) / n_quad
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    f = sp.lambdify(x, expr, modules="numpy")
    values = np.broadcast_to(np.asarray(f(*grids), dtype=complex), grids[0].shape)
    cell = (2.0 * np.pi / n_quad) ** dim * manifold.density
    return complex(np.sum(values) * cell)


def _as_number(value: complex) -> complex:
    if abs(value.imag) <= 1e-14 * max(abs(value.real), 1.0):
        return complex(value.real, 0.0)
    return value


def _check_manifold(sym: PolyhomSymbol, manifold: Any) -> None:
    if not sym.is_scalar:
        raise ValidationError("Expectation values are taken of scalar symbols")
    if sym.dim != manifold.dim:
        raise ValidationError(
            "Symbol dimension does not match the manifold",
            details={"symbol": sym.dim, "manifold": manifold.dim},
        )


def expectation_expansion(
    sym: PolyhomSymbol,
    manifold: Any,
    k_max: int,
    bindings: Optional[Bindings] = None,
    n_quad: int = DEFAULT_QUAD_NODES,
) -> list[complex]:
    """
    Coefficients a_k = integral over M of sigma_{s-k}(x, 0, 1), k = 0..k_max.

    The trace of the operator then behaves like sum_k a_k R^(s-k) for large R.

    Args:
        sym: Scalar symbol of the same dimension as the manifold
        manifold: CircleManifold or Torus2Manifold
        k_max: Deepest level
        bindings: Formal scalar name -> expression in x1..xd (e.g. {"f": "cos(x1)**2"})
        n_quad: Trapezoid nodes per coordinate

    Raises:
        UnboundScalarError: A formal coefficient has no binding
        CutoffTooLowError: sym is truncated above level k_max
    """
    _check_manifold(sym, manifold)
    if k_max < 0:
        raise ValidationError("k_max must be nonnegative")
    known = sym.known_levels()
    if known is not None and k_max > known:
        raise CutoffTooLowError(
            "Symbol does not determine the requested levels",
            details={"k_max": k_max, "known_levels": known},
        )
    at_base = {**{s: 0 for s in xi_symbols(sym.dim)}, RHO: 1, R: 1}
    coeffs = []
    for k in range(k_max + 1):
        sigma = sym.scalar(k).subs(at_base)
        coeffs.append(_as_number(_integrate(_bind(sigma, bindings, sym.dim), manifold, n_quad)))
    logger.debug("expectation coefficients on %s: %s", manifold.kind, coeffs)
    return coeffs


def direct_expectation(
    full_symbol: ExprLike,
    manifold: Any,
    R_value: float,
    bindings: Optional[Bindings] = None,
    n_quad: int = DEFAULT_QUAD_NODES,
) -> complex:
    """Integral over M of the full (non-homogeneous) symbol a(x, 0, R) at a numeric R."""
    if R_value <= 0:
        raise ValidationError("R must be positive", details={"R": R_value})
    dim = manifold.dim
    expr = from_radical(parse_expr(full_symbol, dim), dim)
    expr = expr.subs({**{s: 0 for s in xi_symbols(dim)}, R: sp.Float(R_value, 30)})
    return _as_number(_integrate(_bind(expr, bindings, dim), manifold, n_quad))


def expansion_value(coeffs: list[complex], order: int, R_value: float) -> complex:
    """sum_k a_k R^(s-k)."""
    return sum(a * R_value ** (order - k) for k, a in enumerate(coeffs))


def _jet_symbol(l: int, s: int) -> sp.Symbol:
    i, j = sorted((l, s))
    return sp.Symbol(f"S_{i + 1}{j + 1}", real=True)


def _formal_jet(expr: sp.Expr) -> sp.Expr:
    """S(0) = 0, grad S(0) = 0, second derivatives -> S_ls, deeper -> error."""
    reps: dict[sp.Basic, sp.Expr] = {}
    for d in expr.atoms(sp.Derivative):
        if d.expr.func != S_FUNCTION:
            continue
        args = list(d.expr.args)
        idx: list[int] = []
        for var, count in d.variable_count:
            idx += [args.index(var)] * int(count)
        if len(idx) == 1:
            reps[d] = sp.S.Zero
        elif len(idx) == 2:
            reps[d] = _jet_symbol(idx[0], idx[1])
        else:
            raise JetTooShallowError(
                "Symbol needs derivatives of S beyond the second-order jet",
                details={"derivative": str(d)},
            )
    expr = expr.xreplace(reps)
    return expr.xreplace({a: sp.S.Zero for a in expr.atoms(AppliedUndef) if a.func == S_FUNCTION})


def _base_point(expr: sp.Expr, dim: int, S_expr: Optional[sp.Expr]) -> sp.Expr:
    if S_expr is not None:
        z = sp.symbols(f"z1:{dim + 1}", real=True)
        expr = expr.subs(S_FUNCTION, sp.Lambda(z, S_expr)).doit()
    else:
        expr = _formal_jet(expr.doit())
    return expr.subs({s: 0 for s in (*x_symbols(dim), *y_symbols(dim))})


def _parse_graph(S: Optional[ExprLike], dim: int) -> Optional[sp.Expr]:
    """Explicit graph function in z1..zd; must vanish to second order at 0."""
    if S is None:
        return None
    z = sp.symbols(f"z1:{dim + 1}", real=True)
    S_expr = sp.sympify(S, locals={str(v): v for v in z})
    at_zero = {v: 0 for v in z}
    if S_expr.subs(at_zero) != 0 or any(sp.diff(S_expr, v).subs(at_zero) != 0 for v in z):
        raise ValidationError("S must satisfy S(0) = 0 and grad S(0) = 0", details={"S": str(S)})
    return S_expr


def reduce_two_variable(
    sym: PolyhomSymbol,
    target_degree: int,
    S: Optional[ExprLike] = None,
) -> PolyhomSymbol:
    """
    One-variable symbol at the base point x = y = 0:

        a - i sum_l d^2 a / d xi_l d y_l - 1/2 sum_{l,s} d^4 a / d xi_l d xi_s d y_l d y_s

    The first correction lowers the degree by one and the second by two.
    Without an explicit ``S`` the jet is formal: S and grad S vanish and
    second derivatives become the symbols S_ls.

    Args:
        sym: Two-variable symbol (coefficients in x, y and S)
        target_degree: Lowest retained degree
        S: Optional explicit graph function in z1..zd

    Raises:
        JetTooShallowError: Third or higher derivatives of S are needed with a formal jet
        CutoffTooLowError: sym is truncated above target_degree
    """
    if not sym.is_scalar:
        raise ValidationError("Two-variable reduction is implemented for scalar symbols")
    dim = sym.dim
    deepest = sym.order - target_degree
    if deepest < 0:
        raise ValidationError("target_degree lies above the symbol order")
    known = sym.known_levels()
    if known is not None and deepest > known:
        raise CutoffTooLowError(
            "Symbol does not determine the target degree",
            details={"target_degree": target_degree, "known_levels": known},
        )
    S_expr = _parse_graph(S, dim)
    y = y_symbols(dim)

    def first(e: sp.Expr) -> sp.Expr:
        return sum((d_xi(sp.diff(e, y[l]), l, dim) for l in range(dim)), sp.S.Zero)

    def second(e: sp.Expr) -> sp.Expr:
        total = sp.S.Zero
        for l in range(dim):
            for s in range(dim):
                total += d_xi(d_xi(sp.diff(e, y[l], y[s]), l, dim), s, dim)
        return total

    levels = []
    for K in range(deepest + 1):
        term = sym.scalar(K)
        if K >= 1:
            term -= sp.I * first(sym.scalar(K - 1))
        if K >= 2:
            term -= sp.Rational(1, 2) * second(sym.scalar(K - 2))
        levels.append(_base_point(term, dim, S_expr))
    logger.debug("two-variable reduction of order %d down to degree %d", sym.order, target_degree)
    return PolyhomSymbol.build(sym.order, levels, dim, cutoff=target_degree)


class ParityTerm(BaseModel):
    level: int
    degree: int
    term: str
    parity: Literal["even", "odd", "mixed"]
    value_at_zero: str


class ParityReport(BaseModel):
    terms: list[ParityTerm] = Field(default_factory=list)
    odd_terms_vanish: bool = True

    @property
    def survivors(self) -> list[ParityTerm]:
        """Terms with a nonzero value at xi = 0."""
        return [t for t in self.terms if t.value_at_zero != "0"]


def parity_vanishing_check(sym: PolyhomSymbol) -> ParityReport:
    """
    Classify every term under xi -> -xi and evaluate it at xi = 0 (rho = R).

    Odd terms must vanish at xi = 0; the report lists what survives.
    """
    dim = sym.dim
    xi = xi_symbols(dim)
    reflect = {s: -s for s in xi}
    at_zero = {**{s: 0 for s in xi}, RHO: R}
    terms: list[ParityTerm] = []
    for k, M in enumerate(sym.components):
        for i in range(sym.shape[0]):
            for j in range(sym.shape[1]):
                entry = M[i, j]
                if entry == 0:
                    continue
                for term in sp.Add.make_args(sp.expand(entry)):
                    mirrored = term.xreplace(reflect)
                    if sp.expand(mirrored - term) == 0:
                        parity: Literal["even", "odd", "mixed"] = "even"
                    elif sp.expand(mirrored + term) == 0:
                        parity = "odd"
                    else:
                        parity = "mixed"
                    value = sp.simplify(to_radical(term.subs(at_zero), dim))
                    terms.append(
                        ParityTerm(
                            level=k,
                            degree=sym.entry_degree(k, i, j),
                            term=str(term),
                            parity=parity,
                            value_at_zero=str(value),
                        )
                    )
    odd_ok = all(t.value_at_zero == "0" for t in terms if t.parity == "odd")
    if not odd_ok:
        logger.warning("odd terms survive evaluation at xi = 0")
    return ParityReport(terms=terms, odd_terms_vanish=odd_ok)
