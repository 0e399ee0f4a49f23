"""
Parameter-dependent polyhomogeneous symbols.

A symbol of order s is stored as its homogeneous components a_{s-k}, one
(rows x cols) sympy matrix per level k. Entry (i, j) of level k is
homogeneous of degree s - k + r_i + c_j in (xi, R), where r and c are the
Douglis-Nirenberg row and column offsets (all zero for scalars).

The radical (R^2 + |xi|^2)^(1/2) is the positive symbol ``rho`` with
d rho / d xi_l = xi_l / rho and d rho / d R = R / rho. Coefficients are
exact: rationals, powers of I and formal scalars such as ``f(x1)`` or ``S_11``.
"""

import json
import logging
import math
from collections.abc import Iterator, Sequence
from functools import lru_cache
from typing import Any, Callable, Optional, Union

import sympy as sp
from pydantic import BaseModel, ConfigDict, Field, model_validator
from sympy.core.function import AppliedUndef

from magwill.errors import (
    CutoffTooLowError,
    NotEllipticError,
    SymbolFormatError,
    ValidationError,
)

logger = logging.getLogger(__name__)

R = sp.Symbol("R", positive=True)
RHO = sp.Symbol("rho", positive=True)
S_FUNCTION = sp.Function("S")

ExprLike = Union[sp.Expr, str, int, float]


@lru_cache(maxsize=None)
def xi_symbols(dim: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"xi{l + 1}", real=True) for l in range(dim))


@lru_cache(maxsize=None)
def x_symbols(dim: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"x{l + 1}", real=True) for l in range(dim))


@lru_cache(maxsize=None)
def y_symbols(dim: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"y{l + 1}", real=True) for l in range(dim))


def radial_square(dim: int) -> sp.Expr:
    """R^2 + |xi|^2."""
    return R**2 + sum(x**2 for x in xi_symbols(dim))


def parse_expr(text: ExprLike, dim: int) -> sp.Expr:
    """Parse an expression in xi1.., x1.., y1.., R, rho and formal functions."""
    if isinstance(text, sp.Basic):
        return sp.sympify(text)
    names: dict[str, Any] = {"R": R, "rho": RHO, "S": S_FUNCTION}
    names.update(
        {f"S_{i}{j}": sp.Symbol(f"S_{i}{j}", real=True)
         for i in range(1, dim + 1) for j in range(i, dim + 1)}
    )
    for syms in (xi_symbols(dim), x_symbols(dim), y_symbols(dim)):
        names.update({str(s): s for s in syms})
    try:
        return sp.sympify(text, locals=names)
    except (sp.SympifyError, SyntaxError, TypeError) as e:
        raise SymbolFormatError(f"Cannot parse symbol expression: {text!r}") from e


def d_xi(expr: sp.Expr, l: int, dim: int) -> sp.Expr:
    """Partial derivative in xi_l, with rho differentiated by the chain rule."""
    xi = xi_symbols(dim)[l]
    return sp.diff(expr, xi) + sp.diff(expr, RHO) * xi / RHO


def d_R(expr: sp.Expr) -> sp.Expr:
    return sp.diff(expr, R) + sp.diff(expr, RHO) * R / RHO


def d_xi_alpha(expr: sp.Expr, alpha: Sequence[int], dim: int) -> sp.Expr:
    for l, count in enumerate(alpha):
        for _ in range(count):
            expr = d_xi(expr, l, dim)
    return expr


def d_x_alpha(expr: sp.Expr, alpha: Sequence[int], dim: int) -> sp.Expr:
    x = x_symbols(dim)
    for l, count in enumerate(alpha):
        if count:
            expr = sp.diff(expr, x[l], count)
    return expr


def _reduce_radical(expr: sp.Expr, dim: int) -> sp.Expr:
    """Rewrite a polynomial in rho modulo rho^2 = R^2 + |xi|^2 (rho degree <= 1)."""
    expanded = sp.expand(expr)
    if not expanded.has(RHO):
        return expanded
    q = radial_square(dim)
    out = sp.S.Zero
    for key, coeff in sp.collect(expanded, RHO, evaluate=False).items():
        _, p = key.as_base_exp() if key != 1 else (key, 0)
        p = int(p)
        out += coeff * q ** (p // 2) * RHO ** (p % 2)
    return sp.expand(out)


def canonical(expr: ExprLike, dim: int) -> sp.Expr:
    """Common-denominator form with the numerator reduced modulo the radical relation."""
    e = parse_expr(expr, dim)
    if e == 0:
        return sp.S.Zero
    num, den = sp.fraction(sp.together(e))
    num = _reduce_radical(num, dim)
    if num == 0:
        return sp.S.Zero
    return num / den


def is_zero(expr: ExprLike, dim: int) -> bool:
    """Exact zero test (no tolerance)."""
    return canonical(expr, dim) == 0


def _is_radial_square(base: sp.Expr, dim: int) -> bool:
    return bool(base.is_Add) and sp.expand(base - radial_square(dim)) == 0


def to_radical(expr: sp.Expr, dim: int) -> sp.Expr:
    """Replace powers of (R^2 + |xi|^2) by powers of rho."""
    return expr.replace(
        lambda e: e.is_Pow and _is_radial_square(e.base, dim),
        lambda e: RHO ** (2 * e.exp),
    )


def from_radical(expr: sp.Expr, dim: int) -> sp.Expr:
    return expr.subs(RHO, sp.sqrt(radial_square(dim)))


def _scalar_atoms(expr: sp.Expr, dim: int) -> set[sp.Basic]:
    """Formal coefficients: undefined functions, their derivatives, extra symbols."""
    known = {R, RHO, *xi_symbols(dim), *x_symbols(dim), *y_symbols(dim)}
    atoms: set[sp.Basic] = set(expr.atoms(AppliedUndef, sp.Derivative, sp.Subs))
    atoms |= {s for s in expr.free_symbols if s not in known}
    return atoms


def _probe_value(expr: sp.Expr, dim: int, xi: Sequence[float], R_value: float) -> complex:
    """Numeric value with every formal coefficient set to 1 and x, y at 0."""
    reps: dict[sp.Basic, Any] = {a: 1 for a in _scalar_atoms(expr, dim)}
    e = expr.xreplace(reps)
    subs: dict[sp.Basic, Any] = {s: 0 for s in (*x_symbols(dim), *y_symbols(dim))}
    subs.update({s: sp.Float(v, 30) for s, v in zip(xi_symbols(dim), xi)})
    subs[R] = sp.Float(R_value, 30)
    subs[RHO] = sp.sqrt(sp.Float(R_value, 30) ** 2 + sum(sp.Float(v, 30) ** 2 for v in xi))
    return complex(sp.N(e.subs(subs), 30))


def _default_probe(dim: int) -> tuple[list[float], float]:
    base = [0.7, -0.4, 0.3, -0.6, 0.5]
    return [base[l % len(base)] * (1 + l // len(base)) for l in range(dim)], 1.3


def _matrix(value: Any, dim: int) -> sp.ImmutableMatrix:
    """Level value (scalar, nested rows or matrix) with every entry parsed."""
    if isinstance(value, sp.MatrixBase):
        return sp.ImmutableMatrix(value.applyfunc(lambda e: parse_expr(e, dim)))
    if isinstance(value, (list, tuple)):
        if value and all(isinstance(row, (list, tuple)) for row in value):
            rows = [[parse_expr(e, dim) for e in row] for row in value]
        else:
            rows = [[parse_expr(e, dim)] for e in value]
        return sp.ImmutableMatrix(rows)
    return sp.ImmutableMatrix([[parse_expr(value, dim)]])


def _zero_matrix(shape: tuple[int, int]) -> sp.ImmutableMatrix:
    return sp.ImmutableMatrix(sp.zeros(*shape))


def _matrix_is_zero(M: sp.MatrixBase) -> bool:
    return all(e == 0 for e in M)


class PolyhomSymbol(BaseModel):
    """Finite truncation of a polyhomogeneous symbol (scalar or matrix valued)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    order: int = Field(..., description="Order s (degree of the principal level)")
    dim: int = Field(..., ge=1, description="Number of xi (and x) variables")
    components: tuple[Any, ...] = Field(..., description="ImmutableMatrix per level k")
    cutoff: Optional[int] = Field(
        default=None, description="Lowest retained degree; None means the sum is exact"
    )
    row_offsets: tuple[int, ...]
    col_offsets: tuple[int, ...]

    @model_validator(mode="after")
    def check_structure(self) -> "PolyhomSymbol":
        if not self.components:
            raise ValueError("A symbol needs at least its principal level")
        shape = self.components[0].shape
        if any(c.shape != shape for c in self.components):
            raise ValueError("All levels must have the same shape")
        if len(self.row_offsets) != shape[0] or len(self.col_offsets) != shape[1]:
            raise ValueError("Offsets must match the matrix shape")
        if self.cutoff is not None:
            if self.cutoff > self.order:
                raise ValueError("cutoff must not exceed the order")
            if len(self.components) > self.order - self.cutoff + 1:
                raise ValueError("Levels stored below the cutoff")
        return self

    @classmethod
    def build(
        cls,
        order: int,
        components: Union[Sequence[Any], dict[int, Any]],
        dim: int = 1,
        cutoff: Optional[int] = None,
        row_offsets: Optional[Sequence[int]] = None,
        col_offsets: Optional[Sequence[int]] = None,
    ) -> "PolyhomSymbol":
        """
        Build a symbol from per-level expressions or matrices.

        Entries are parsed, canonicalized, levels below the cutoff dropped and
        trailing zero levels trimmed.
        """
        items = dict(components) if isinstance(components, dict) else dict(enumerate(components))
        if not items:
            raise ValidationError("A symbol needs at least one level")
        if any(k < 0 for k in items):
            raise ValidationError("Level indices must be nonnegative")
        mats = {
            k: _matrix(v, dim).applyfunc(lambda e: canonical(e, dim))
            for k, v in items.items()
        }
        shape = next(iter(mats.values())).shape
        top = max(mats)
        if cutoff is not None:
            top = min(top, order - cutoff)
        levels = [mats.get(k, _zero_matrix(shape)) for k in range(top + 1)]
        while len(levels) > 1 and _matrix_is_zero(levels[-1]):
            levels.pop()
        if not levels:
            levels = [_zero_matrix(shape)]
        return cls(
            order=order,
            dim=dim,
            components=tuple(sp.ImmutableMatrix(m) for m in levels),
            cutoff=cutoff,
            row_offsets=tuple(row_offsets or (0,) * shape[0]),
            col_offsets=tuple(col_offsets or (0,) * shape[1]),
        )

    @classmethod
    def from_full_symbol(
        cls, expr: ExprLike, order: int, dim: int = 1, levels: int = 4
    ) -> "PolyhomSymbol":
        """
        Homogeneous components of a full (non-homogeneous) scalar symbol.

        a(x, xi / eps, R / eps) * eps^s is expanded in eps; the coefficient of
        eps^k is a_{s-k}. The result is truncated after ``levels`` corrections.
        """
        e = from_radical(parse_expr(expr, dim), dim)
        eps = sp.Symbol("epsilon", positive=True)
        scaled = e.subs({R: R / eps, **{x: x / eps for x in xi_symbols(dim)}}, simultaneous=True)
        series = sp.series(eps**order * scaled, eps, 0, levels + 1).removeO()
        comps = [
            to_radical(sp.expand(series).coeff(eps, k), dim) for k in range(levels + 1)
        ]
        return cls.build(order, comps, dim=dim, cutoff=order - levels)

    @property
    def shape(self) -> tuple[int, int]:
        rows, cols = self.components[0].shape
        return int(rows), int(cols)

    @property
    def is_scalar(self) -> bool:
        return self.shape == (1, 1)

    @property
    def max_level(self) -> int:
        """Deepest level that is known (exact symbols: deepest stored)."""
        if self.cutoff is None:
            return len(self.components) - 1
        return self.order - self.cutoff

    def known_levels(self) -> Optional[int]:
        """Deepest determined level, None when every level is known."""
        return None if self.cutoff is None else self.order - self.cutoff

    def level(self, k: int) -> sp.ImmutableMatrix:
        """Component a_{s-k}; zero beyond the stored levels of an exact symbol."""
        if k < len(self.components):
            return self.components[k]
        known = self.known_levels()
        if known is not None and k > known:
            raise CutoffTooLowError(
                "Level lies below the symbol's truncation",
                details={"level": k, "cutoff": self.cutoff, "order": self.order},
            )
        return _zero_matrix(self.shape)

    def entry_degree(self, k: int, i: int = 0, j: int = 0) -> int:
        return self.order - k + self.row_offsets[i] + self.col_offsets[j]

    def scalar(self, k: int = 0) -> sp.Expr:
        if not self.is_scalar:
            raise ValidationError("Symbol is matrix valued", details={"shape": str(self.shape)})
        return self.level(k)[0, 0]

    def depends_on_x(self) -> bool:
        xs = set(x_symbols(self.dim))
        return any(bool(m.free_symbols & xs) for m in self.components)

    def truncate(self, cutoff: int) -> "PolyhomSymbol":
        known = self.known_levels()
        if known is not None and self.order - cutoff > known:
            raise CutoffTooLowError("Cannot truncate below the existing cutoff")
        levels = self.components[: self.order - cutoff + 1]
        return PolyhomSymbol.build(
            self.order, list(levels), self.dim, cutoff, self.row_offsets, self.col_offsets
        )

    def to_dict(self) -> dict[str, Any]:
        return symbol_to_dict(self)

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(symbol_to_dict(self), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "PolyhomSymbol":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise SymbolFormatError("Symbol JSON is malformed", details={"error": str(e)}) from e
        return symbol_from_dict(data, cls)

    def __str__(self) -> str:
        parts = [f"order={self.order} dim={self.dim} cutoff={self.cutoff} shape={self.shape}"]
        for k, m in enumerate(self.components):
            parts.append(f"  [{self.order - k}] {m.tolist() if not self.is_scalar else m[0, 0]}")
        return "\n".join(parts)


def identity_symbol(size: int = 1, dim: int = 1) -> PolyhomSymbol:
    return PolyhomSymbol.build(0, [sp.eye(size)], dim=dim)


def douglis_nirenberg_diagonal(size: int, dim: int = 1, power: int = 1) -> PolyhomSymbol:
    """
    The matrix diag((R^2 + |xi|^2)^(power * j / 2)), j = 0..size-1.

    Entry j has degree power * j, carried on the rows for power > 0 and on
    the columns for power < 0, so D C D^-1 composes with a constant C.
    """
    if power not in (1, -1):
        raise ValidationError("power must be +1 or -1")
    M = sp.diag(*[RHO ** (power * j) for j in range(size)])
    offsets = tuple(power * j for j in range(size))
    zeros = (0,) * size
    if power > 0:
        return PolyhomSymbol.build(0, [M], dim, row_offsets=offsets, col_offsets=zeros)
    return PolyhomSymbol.build(0, [M], dim, row_offsets=zeros, col_offsets=offsets)


def constant_matrix_symbol(C: Any, dim: int = 1) -> PolyhomSymbol:
    """Order-zero symbol equal to a constant (exact) matrix."""
    M = sp.Matrix(C).applyfunc(sp.nsimplify)
    return PolyhomSymbol.build(0, [M], dim)


def _multi_indices(dim: int, total: int) -> Iterator[tuple[int, ...]]:
    if dim == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _multi_indices(dim - 1, total - first):
            yield (first, *rest)


def _alpha_factor(alpha: Sequence[int]) -> sp.Expr:
    return sp.I ** sum(alpha) / sp.prod([sp.factorial(a) for a in alpha])


def _composition_shift(a: PolyhomSymbol, b: PolyhomSymbol) -> int:
    if a.dim != b.dim:
        raise ValidationError("Symbols live in different dimensions")
    if a.shape[1] != b.shape[0]:
        raise ValidationError(
            "Shapes are not composable", details={"left": str(a.shape), "right": str(b.shape)}
        )
    shifts = {c + r for c, r in zip(a.col_offsets, b.row_offsets)}
    if len(shifts) != 1:
        raise ValidationError("Douglis-Nirenberg offsets are not composable")
    return shifts.pop()


def _level_sum(
    get_a: Callable[[int], sp.MatrixBase],
    get_b: Callable[[int], sp.MatrixBase],
    K: int,
    dim: int,
    shape: tuple[int, int],
    l_limit: Optional[int] = None,
) -> sp.Matrix:
    """Sum over k + l + |alpha| = K of (i^|alpha| / alpha!) d_xi^alpha a_k d_x^alpha b_l."""
    total = sp.zeros(*shape)
    for l in range(K + 1 if l_limit is None else min(K + 1, l_limit)):
        B = get_b(l)
        if _matrix_is_zero(B):
            continue
        for k in range(K - l + 1):
            A = get_a(k)
            if _matrix_is_zero(A):
                continue
            for alpha in _multi_indices(dim, K - k - l):
                dB = B.applyfunc(lambda e: d_x_alpha(e, alpha, dim))
                if _matrix_is_zero(dB):
                    continue
                dA = A.applyfunc(lambda e: d_xi_alpha(e, alpha, dim))
                total += _alpha_factor(alpha) * (dA * dB)
    return total.applyfunc(lambda e: canonical(e, dim))


def symbol_product(a: PolyhomSymbol, b: PolyhomSymbol, cutoff: int) -> PolyhomSymbol:
    """
    Symbol of the composition: sum_alpha (i^|alpha| / alpha!) d_xi^alpha a d_x^alpha b,
    collected by degree and truncated at ``cutoff``.

    Raises:
        CutoffTooLowError: The inputs are truncated above the requested cutoff
    """
    delta = _composition_shift(a, b)
    order = a.order + b.order + delta
    deepest = order - cutoff
    if deepest < 0:
        raise ValidationError("cutoff lies above the product order", details={"order": order})
    limits = [k for k in (a.known_levels(), b.known_levels()) if k is not None]
    if limits and deepest > min(limits):
        raise CutoffTooLowError(
            "Requested cutoff is below what the factors determine",
            details={"cutoff": cutoff, "minimum": order - min(limits)},
        )
    shape = (a.shape[0], b.shape[1])
    levels = [_level_sum(a.level, b.level, K, a.dim, shape) for K in range(deepest + 1)]
    logger.debug("product order %d down to degree %d", order, cutoff)
    return PolyhomSymbol.build(order, levels, a.dim, cutoff, a.row_offsets, b.col_offsets)


_ELLIPTIC_PROBES = ((0.0, 1.0), (1.0, 0.0), (0.6, 0.8), (-1.3, 0.4), (2.0, 1.5))


def _check_elliptic(a: PolyhomSymbol) -> None:
    principal = a.level(0)
    for xi0, R0 in _ELLIPTIC_PROBES:
        xi = [xi0 * (1.0 if l == 0 else 0.5) for l in range(a.dim)]
        vals = [[_probe_value(principal[i, j], a.dim, xi, R0) for j in range(a.shape[1])]
                for i in range(a.shape[0])]
        det = complex(sp.Matrix(vals).det())
        scale = math.prod(max(max(abs(v) for v in row), 1e-300) for row in vals)
        if abs(det) <= 1e-12 * scale:
            raise NotEllipticError(
                "Principal symbol is not invertible at a probe point",
                details={"xi": str(xi), "R": R0},
            )


def parametrix(a: PolyhomSymbol, cutoff: int) -> PolyhomSymbol:
    """
    Parametrix b with b_0 = a_0^-1 and, for j > 0,

        b_j = -a_0^-1 sum_{k + l + |alpha| = j, l < j} (i^|alpha| / alpha!) d_xi^alpha a_k d_x^alpha b_l

    so that the product of a and b is the identity down to ``cutoff``.
    The result has order -s and offsets (-c, -r).

    Raises:
        NotEllipticError: Principal level singular at a probe point
        CutoffTooLowError: a is truncated above what the cutoff needs
    """
    if a.shape[0] != a.shape[1]:
        raise ValidationError("Only square symbols have a parametrix")
    order = -a.order
    deepest = order - cutoff
    if deepest < 0:
        raise ValidationError("cutoff lies above the parametrix order", details={"order": order})
    known = a.known_levels()
    if known is not None and known < deepest:
        raise CutoffTooLowError(
            "Symbol is truncated above what the parametrix cutoff needs",
            details={"cutoff": cutoff, "known_levels": known},
        )
    _check_elliptic(a)
    a0 = sp.Matrix(a.level(0))
    try:
        b0 = (a0.inv() if not a.is_scalar else sp.Matrix([[1 / a0[0, 0]]])).applyfunc(
            lambda e: canonical(e, a.dim)
        )
    except ValueError as e:
        raise NotEllipticError("Principal symbol is not invertible") from e

    levels: list[sp.Matrix] = [b0]
    for j in range(1, deepest + 1):
        rest = _level_sum(a.level, lambda l: levels[l], j, a.dim, a.shape, l_limit=j)
        levels.append((-b0 * rest).applyfunc(lambda e: canonical(e, a.dim)))
    logger.debug("parametrix of order %d with %d corrections", order, deepest)
    return PolyhomSymbol.build(
        order,
        levels,
        a.dim,
        cutoff,
        tuple(-c for c in a.col_offsets),
        tuple(-r for r in a.row_offsets),
    )


def symbols_equal(a: PolyhomSymbol, b: PolyhomSymbol) -> bool:
    """Exact equality over the levels both symbols determine."""
    if (a.order, a.dim, a.shape) != (b.order, b.dim, b.shape):
        return False
    if (a.row_offsets, a.col_offsets) != (b.row_offsets, b.col_offsets):
        return False
    known = [k for k in (a.known_levels(), b.known_levels()) if k is not None]
    deepest = min(known) if known else max(a.max_level, b.max_level)
    for k in range(deepest + 1):
        diff = sp.Matrix(a.level(k)) - sp.Matrix(b.level(k))
        if not all(is_zero(e, a.dim) for e in diff):
            return False
    return True


class TermCheck(BaseModel):
    """Homogeneity of one additive term."""

    level: int
    row: int
    col: int
    term: str
    declared: int
    measured: Optional[float] = None
    passed: bool


class HomogeneityReport(BaseModel):
    checks: list[TermCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[TermCheck]:
        return [c for c in self.checks if not c.passed]


def _additive_terms(expr: sp.Expr) -> tuple[sp.Expr, ...]:
    if expr == 0:
        return ()
    return sp.Add.make_args(sp.expand(expr))


def homogeneity_check(
    sym: PolyhomSymbol,
    t: float = 2.0,
    tol: float = 1e-12,
    probe: Optional[tuple[Sequence[float], float]] = None,
) -> HomogeneityReport:
    """
    Compare every term at (xi, R) and (t xi, t R) against t^degree.

    Formal coefficients are set to 1; the measured exponent is
    log|a(t.)/a(.)| / log t.
    """
    xi, R0 = probe or _default_probe(sym.dim)
    scaled_xi = [t * v for v in xi]
    checks: list[TermCheck] = []
    for k, M in enumerate(sym.components):
        for i in range(sym.shape[0]):
            for j in range(sym.shape[1]):
                declared = sym.entry_degree(k, i, j)
                for term in _additive_terms(M[i, j]):
                    v1 = _probe_value(term, sym.dim, xi, R0)
                    v2 = _probe_value(term, sym.dim, scaled_xi, t * R0)
                    expected = t**declared * v1
                    measured = None
                    if v1 != 0 and v2 != 0:
                        measured = math.log(abs(v2) / abs(v1)) / math.log(t)
                    ok = abs(v2 - expected) <= tol * max(abs(expected), 1e-300)
                    checks.append(
                        TermCheck(level=k, row=i, col=j, term=str(term), declared=declared,
                                  measured=measured, passed=ok)
                    )
    report = HomogeneityReport(checks=checks)
    if not report.passed:
        logger.info("homogeneity check: %d of %d terms fail", len(report.failures), len(checks))
    return report


def _denominator_monomial(den: sp.Expr, dim: int) -> tuple[sp.Expr, int, int]:
    """Split a denominator into constant * R^k * rho^p."""
    const, rest = sp.factor(den).as_coeff_Mul()
    k = p = 0
    for base, e in rest.as_powers_dict().items():
        if base == 1:
            continue
        if base == R:
            k += int(e)
        elif base == RHO:
            p += int(e)
        elif _is_radial_square(base, dim):
            p += 2 * int(e)
        else:
            raise SymbolFormatError(
                "Denominator is not a monomial in R and the radical", details={"factor": str(base)}
            )
    return const, k, p


def _rational_pair(value: sp.Expr) -> list[int]:
    q = sp.Rational(value)
    return [int(q.p), int(q.q)]


def term_records(expr: sp.Expr, dim: int) -> list[dict[str, Any]]:
    """
    Canonical term list of one entry: coeff * xi^alpha * R^k * rho^p * scalars.

    Raises:
        SymbolFormatError: Entry is not a sum of such monomials
    """
    if expr == 0:
        return []
    num, den = sp.fraction(sp.together(expr))
    dconst, dk, dp = _denominator_monomial(den, dim)
    xi = xi_symbols(dim)
    records = []
    for term in sp.Add.make_args(sp.expand(num)):
        c, rest = term.as_coeff_Mul()
        coeff: sp.Expr = c / dconst
        alpha = [0] * dim
        k, p = -dk, -dp
        scalars: dict[str, int] = {}
        for base, e in rest.as_powers_dict().items():
            if base == 1:
                continue
            if not (e.is_Integer if isinstance(e, sp.Basic) else isinstance(e, int)):
                raise SymbolFormatError("Non-integer power in a symbol term", details={"term": str(term)})
            e = int(e)
            if base in xi:
                alpha[xi.index(base)] += e
            elif base == R:
                k += e
            elif base == RHO:
                p += e
            elif base == sp.I:
                coeff *= sp.I**e
            elif base.is_Number:
                coeff *= base**e
            elif isinstance(base, (AppliedUndef, sp.Derivative, sp.Subs, sp.Symbol)):
                scalars[str(base)] = scalars.get(str(base), 0) + e
            else:
                raise SymbolFormatError("Term is not a canonical monomial", details={"term": str(term)})
        if any(a < 0 for a in alpha):
            raise SymbolFormatError("Negative xi power", details={"term": str(term)})
        re, im = sp.expand_complex(coeff).as_real_imag()
        if not (re.is_Rational and im.is_Rational):
            raise SymbolFormatError("Coefficient is not Gaussian rational", details={"term": str(term)})
        records.append(
            {
                "degree": sum(alpha) + k + p,
                "alpha": alpha,
                "k": k,
                "p": p,
                "coeff": {"re": _rational_pair(re), "im": _rational_pair(im)},
                "scalars": dict(sorted(scalars.items())),
            }
        )
    return records


def _record_key(rec: dict[str, Any]) -> tuple[Any, ...]:
    return (
        -rec["degree"],
        tuple(rec["entry"]),
        tuple(rec["alpha"]),
        rec["k"],
        rec["p"],
        tuple(rec["scalars"].items()),
        tuple(rec["coeff"]["re"]),
        tuple(rec["coeff"]["im"]),
    )


def symbol_to_dict(sym: PolyhomSymbol) -> dict[str, Any]:
    """JSON-ready term list, ordered lexicographically by (degree, entry, alpha, k, p, coeff)."""
    terms = []
    for k, M in enumerate(sym.components):
        for i in range(sym.shape[0]):
            for j in range(sym.shape[1]):
                for rec in term_records(M[i, j], sym.dim):
                    rec["entry"] = [i, j]
                    terms.append(rec)
    terms.sort(key=_record_key)
    return {
        "order": sym.order,
        "dim": sym.dim,
        "cutoff": sym.cutoff,
        "shape": list(sym.shape),
        "row_offsets": list(sym.row_offsets),
        "col_offsets": list(sym.col_offsets),
        "terms": terms,
    }


def symbol_from_dict(data: dict[str, Any], cls: type[PolyhomSymbol] = PolyhomSymbol) -> PolyhomSymbol:
    try:
        order, dim = int(data["order"]), int(data["dim"])
        rows, cols = (int(v) for v in data.get("shape", [1, 1]))
        r_off = [int(v) for v in data.get("row_offsets", [0] * rows)]
        c_off = [int(v) for v in data.get("col_offsets", [0] * cols)]
        cutoff = data.get("cutoff")
        xi = xi_symbols(dim)
        levels: dict[int, sp.Matrix] = {}
        for rec in data["terms"]:
            i, j = rec.get("entry", [0, 0])
            alpha = rec["alpha"]
            k = order + r_off[i] + c_off[j] - int(rec["degree"])
            if sum(alpha) + rec["k"] + rec["p"] != rec["degree"] or k < 0:
                raise SymbolFormatError("Term degree is inconsistent", details={"term": str(rec)})
            re, im = rec["coeff"]["re"], rec["coeff"]["im"]
            value = sp.Rational(re[0], re[1]) + sp.I * sp.Rational(im[0], im[1])
            value *= sp.prod([x**a for x, a in zip(xi, alpha)]) * R ** rec["k"] * RHO ** rec["p"]
            for name, power in rec.get("scalars", {}).items():
                value *= parse_expr(name, dim) ** int(power)
            levels.setdefault(k, sp.zeros(rows, cols))[i, j] += value
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise SymbolFormatError("Malformed symbol term list", details={"error": str(e)}) from e
    if not levels:
        levels = {0: sp.zeros(rows, cols)}
    return cls.build(order, levels, dim, cutoff, r_off, c_off)
