"""Jet-polynomial nonlinearities and Adomian polynomial generation.

The nonlinear term N is a polynomial over jet variables (the unknown u and
its spatial partials) with spatial-expression coefficients.  Two expansion
families are provided:

* the partial-sum family ``revised_polynomials``: P_0 = N[u_0] and
  P_m = N[S_m] - sum_{k<m} P_k with S_m the m-th partial sum, so the P_k
  telescope exactly to N of the partial sum;
* the classical family ``classical_polynomials``: the eps**m Taylor
  coefficient of N applied to the formal series sum_k u_k eps**k, computed by
  truncated series arithmetic (exact for polynomial N).

Only polynomial dependence on jets is accepted; anything else (exp(u),
fractional powers of u, jets in denominators) is rejected at lowering time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import (
    InvalidNonlinearity,
    MaxOrderExceeded,
    NonPolynomialNonlinearity,
)
from .parsing import JetSymbol, TotalDerivative, parse_jet_tree
from .spatial import (
    Constant,
    Cos,
    Cosh,
    Exp,
    Power,
    Product,
    Sin,
    Sinh,
    SpatialExpr,
    Sum,
    Var,
    _sort_key,
    differentiate,
    is_constant,
    simplify,
)
from .separable import SeparableFunction

#: Default cap on jet derivative orders (the built-in problems need 5).
DEFAULT_MAX_ORDER = 5

JetId = tuple[int, ...]  # derivative order per spatial variable


@dataclass(frozen=True)
class JetMonomial:
    """``coeff * prod(jet**exponent)`` with a spatial-expression coefficient."""

    coeff: SpatialExpr
    factors: tuple[tuple[JetId, int], ...]  # sorted by jet id

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.factors)


def _canonical_monomials(raw, max_order: int) -> tuple[JetMonomial, ...]:
    buckets: dict[tuple, list] = {}
    for coeff, factors in raw:
        merged: dict[JetId, int] = {}
        for jet, exponent in factors:
            if exponent <= 0:
                raise NonPolynomialNonlinearity("jet exponents must be positive integers")
            if sum(jet) > max_order:
                raise MaxOrderExceeded(
                    f"jet derivative order {sum(jet)} exceeds the maximum {max_order}"
                )
            merged[jet] = merged.get(jet, 0) + exponent
        key = tuple(sorted(merged.items()))
        buckets.setdefault(key, []).append(coeff)
    monomials = []
    for key in sorted(buckets):
        coeff = simplify(Sum(tuple(buckets[key]))) if len(buckets[key]) > 1 else simplify(buckets[key][0])
        if is_constant(coeff, 0.0):
            continue
        monomials.append(JetMonomial(coeff, key))
    return tuple(monomials)


@dataclass(frozen=True)
class JetPolynomial:
    dim: int
    max_order: int
    monomials: tuple[JetMonomial, ...]

    @classmethod
    def from_monomials(cls, dim: int, raw, max_order: int = DEFAULT_MAX_ORDER) -> "JetPolynomial":
        """Build from (coeff, ((jet_id, exponent), ...)) pairs.

        Monomials with no jet factor are rejected: pure source terms belong
        in the problem's source, not its nonlinearity.
        """
        monomials = _canonical_monomials(raw, max_order)
        for m in monomials:
            if not m.factors:
                raise InvalidNonlinearity(
                    "the nonlinearity contains a term with no jet factor; "
                    "move source terms into the source field"
                )
        return cls(dim, max_order, monomials)

    @classmethod
    def parse(
        cls,
        text: str,
        variables: Sequence[str],
        constants=None,
        max_order: int = DEFAULT_MAX_ORDER,
    ) -> "JetPolynomial":
        """Parse a nonlinearity expression (jet symbols and D(...) allowed)."""
        tree = parse_jet_tree(text, variables, constants or {})
        poly = _lower(tree, len(variables), max_order)
        return cls.from_monomials(len(variables), [(m.coeff, m.factors) for m in poly.monomials], max_order)

    @property
    def is_zero(self) -> bool:
        return not self.monomials

    def jet_ids(self) -> set[JetId]:
        ids = set()
        for m in self.monomials:
            for jet, _ in m.factors:
                ids.add(jet)
        return ids

    # -- calculus ----------------------------------------------------------

    def total_derivative(self, var: int) -> "JetPolynomial":
        """Total derivative in variable ``var``: the product rule over jet
        factors (shifting multi-indices) plus the coefficient's own partial."""
        raw = []
        for m in self.monomials:
            dcoeff = differentiate(m.coeff, var)
            if not is_constant(dcoeff, 0.0):
                raw.append((dcoeff, m.factors))
            for i, (jet, exponent) in enumerate(m.factors):
                shifted = tuple(
                    order + (1 if d == var else 0) for d, order in enumerate(jet)
                )
                if sum(shifted) > self.max_order:
                    raise MaxOrderExceeded(
                        f"total derivative raises a jet to order {sum(shifted)}, "
                        f"above the maximum {self.max_order}"
                    )
                factors = list(m.factors)
                if exponent == 1:
                    del factors[i]
                else:
                    factors[i] = (jet, exponent - 1)
                factors.append((shifted, 1))
                coeff = simplify(m.coeff * Constant(float(exponent)))
                raw.append((coeff, tuple(factors)))
        monomials = _canonical_monomials(raw, self.max_order)
        return JetPolynomial(self.dim, self.max_order, monomials)

    def __mul__(self, other: "JetPolynomial") -> "JetPolynomial":
        if not isinstance(other, JetPolynomial):
            return NotImplemented
        raw = [
            (simplify(a.coeff * b.coeff), a.factors + b.factors)
            for a in self.monomials
            for b in other.monomials
        ]
        return JetPolynomial(self.dim, self.max_order, _canonical_monomials(raw, self.max_order))

    def __add__(self, other: "JetPolynomial") -> "JetPolynomial":
        if not isinstance(other, JetPolynomial):
            return NotImplemented
        raw = [(m.coeff, m.factors) for m in self.monomials + other.monomials]
        return JetPolynomial(self.dim, self.max_order, _canonical_monomials(raw, self.max_order))

    # -- evaluation on a separable function ---------------------------------

    def evaluate(self, u: SeparableFunction) -> SeparableFunction:
        """Substitute u's spatial derivatives for the jet variables and
        expand.  Exact: products stay inside the separable class."""
        derivatives = _jet_values(u, sorted(self.jet_ids()))
        total = SeparableFunction.zero(u.dim)
        for m in self.monomials:
            piece = None
            for jet, exponent in m.factors:
                value = derivatives[jet]
                for _ in range(exponent):
                    piece = value if piece is None else piece * value
            assert piece is not None  # monomials always carry a jet factor
            total = total + piece.scale_spatial(m.coeff)
        return total


def _jet_values(u: SeparableFunction, ids: Sequence[JetId]) -> dict[JetId, SeparableFunction]:
    cache: dict[JetId, SeparableFunction] = {tuple(0 for _ in range(u.dim)): u}

    def get(jet: JetId) -> SeparableFunction:
        if jet in cache:
            return cache[jet]
        # step down in the first variable with a nonzero order
        for var, order in enumerate(jet):
            if order > 0:
                parent = tuple(o - (1 if d == var else 0) for d, o in enumerate(jet))
                cache[jet] = get(parent).diff_x(var)
                return cache[jet]
        raise AssertionError("unreachable")

    for jet in ids:
        get(jet)
    return cache


# ---------------------------------------------------------------------------
# lowering of parsed jet trees
# ---------------------------------------------------------------------------


def _lower(node, dim: int, max_order: int) -> JetPolynomial:
    """Lower a parse tree with jet leaves to a jet polynomial.  Monomials
    without jet factors are allowed here (they may cancel); the caller
    rejects any that survive."""
    if isinstance(node, JetSymbol):
        if len(node.orders) != dim:
            raise InvalidNonlinearity("jet symbol dimension mismatch")
        return JetPolynomial(dim, max_order, ((JetMonomial(Constant(1.0), ((node.orders, 1),))),))
    if isinstance(node, TotalDerivative):
        poly = _lower(node.arg, dim, max_order)
        for var in node.variables:
            poly = poly.total_derivative(var)
        return poly
    if isinstance(node, (Constant, Var)):
        return JetPolynomial(dim, max_order, (JetMonomial(simplify(node), ()),))
    if isinstance(node, Sum):
        raw = []
        for child in node.children:
            raw.extend((m.coeff, m.factors) for m in _lower(child, dim, max_order).monomials)
        return JetPolynomial(dim, max_order, _canonical_monomials(raw, max_order))
    if isinstance(node, Product):
        poly = JetPolynomial(dim, max_order, (JetMonomial(Constant(1.0), ()),))
        for child in node.children:
            poly = poly * _lower(child, dim, max_order)
        return poly
    if isinstance(node, Power):
        if not _contains_jets(node.base):
            return JetPolynomial(
                dim, max_order, (JetMonomial(simplify(node), ()),)
            )
        exponent = node.exponent
        if exponent.denominator != 1 or exponent < 0:
            raise NonPolynomialNonlinearity(
                f"jets may only be raised to positive integer powers, got {exponent}"
            )
        base = _lower(node.base, dim, max_order)
        poly = JetPolynomial(dim, max_order, (JetMonomial(Constant(1.0), ()),))
        for _ in range(int(exponent)):
            poly = poly * base
        return poly
    if isinstance(node, (Exp, Sin, Cos, Sinh, Cosh)):
        if _contains_jets(node.arg):
            raise NonPolynomialNonlinearity(
                "transcendental functions of jet variables are not polynomial"
            )
        return JetPolynomial(dim, max_order, (JetMonomial(simplify(node), ()),))
    raise InvalidNonlinearity(f"cannot lower node {type(node).__name__}")


def _contains_jets(node) -> bool:
    if isinstance(node, (JetSymbol, TotalDerivative)):
        return True
    if isinstance(node, (Sum, Product)):
        return any(_contains_jets(c) for c in node.children)
    if isinstance(node, Power):
        return _contains_jets(node.base)
    if isinstance(node, (Exp, Sin, Cos, Sinh, Cosh)):
        return _contains_jets(node.arg)
    return False


# ---------------------------------------------------------------------------
# Adomian polynomial families
# ---------------------------------------------------------------------------


class RevisedExpansion:
    """Incremental generator of the partial-sum Adomian family.

    Caches N[S_m] so each new polynomial is a single evaluation plus one
    subtraction: P_m = N[S_m] - N[S_{m-1}].
    """

    def __init__(self, nonlinearity: JetPolynomial, dim: int):
        self.nonlinearity = nonlinearity
        self.dim = dim
        self.partial = None  # S_m so far
        self.previous_total = None  # N[S_{m-1}]
        self.produced = 0

    def next(self, correction: SeparableFunction) -> SeparableFunction:
        """Feed u_m, get P_m."""
        self.partial = correction if self.partial is None else self.partial + correction
        total = self.nonlinearity.evaluate(self.partial)
        result = total if self.previous_total is None else total - self.previous_total
        self.previous_total = total
        self.produced += 1
        return result


def revised_polynomials(
    nonlinearity: JetPolynomial, corrections: Sequence[SeparableFunction]
) -> list[SeparableFunction]:
    """The partial-sum family P_0..P_m for the given corrections u_0..u_m."""
    if not corrections:
        raise ValueError("at least u_0 is required")
    expansion = RevisedExpansion(nonlinearity, corrections[0].dim)
    return [expansion.next(u) for u in corrections]


@dataclass(frozen=True)
class EpsilonSeries:
    """A formal power series in eps, truncated at a fixed order."""

    coefficients: tuple[SeparableFunction, ...]

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def dim(self) -> int:
        return self.coefficients[0].dim

    def __add__(self, other: "EpsilonSeries") -> "EpsilonSeries":
        assert len(self.coefficients) == len(other.coefficients)
        return EpsilonSeries(tuple(a + b for a, b in zip(self.coefficients, other.coefficients)))

    def __mul__(self, other: "EpsilonSeries") -> "EpsilonSeries":
        assert len(self.coefficients) == len(other.coefficients)
        out = [SeparableFunction.zero(self.dim) for _ in self.coefficients]
        for i, a in enumerate(self.coefficients):
            if a.is_zero:
                continue
            for j, b in enumerate(other.coefficients):
                if i + j > self.order:
                    break
                if b.is_zero:
                    continue
                out[i + j] = out[i + j] + a * b
        return EpsilonSeries(tuple(out))

    def scale_spatial(self, expr: SpatialExpr) -> "EpsilonSeries":
        return EpsilonSeries(tuple(c.scale_spatial(expr) for c in self.coefficients))


def classical_polynomials(
    nonlinearity: JetPolynomial, corrections: Sequence[SeparableFunction]
) -> list[SeparableFunction]:
    """Coefficients A_0..A_m of eps**m in N[sum_k u_k eps**k].

    Computed with exact truncated series arithmetic, so A_m depends only on
    u_0..u_m, matching the formal-series definition for polynomial N.
    """
    if not corrections:
        raise ValueError("at least u_0 is required")
    dim = corrections[0].dim
    order = len(corrections) - 1
    one = EpsilonSeries(
        tuple(
            [SeparableFunction.from_spatial(Constant(1.0), dim)]
            + [SeparableFunction.zero(dim) for _ in range(order)]
        )
    )
    zero = EpsilonSeries(tuple(SeparableFunction.zero(dim) for _ in range(order + 1)))

    jet_series: dict[JetId, EpsilonSeries] = {}
    for jet in nonlinearity.jet_ids():
        derived = []
        for u in corrections:
            value = u
            for var, count in enumerate(jet):
                for _ in range(count):
                    value = value.diff_x(var)
            derived.append(value)
        jet_series[jet] = EpsilonSeries(tuple(derived))

    total = zero
    for m in nonlinearity.monomials:
        piece = one
        for jet, exponent in m.factors:
            for _ in range(exponent):
                piece = piece * jet_series[jet]
        total = total + piece.scale_spatial(m.coeff)
    return list(total.coefficients)
