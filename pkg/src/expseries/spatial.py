"""Symbolic spatial expressions: AST, differentiation, evaluation, light
simplification, and numerically certified zero testing.

The AST is deliberately small: constants, variables, n-ary sums and products,
powers with exact rational exponents, and the analytic functions exp, sin,
cos, sinh, cosh.  Simplification is light by design -- constant folding,
flattening, like-term and like-factor collection -- and never expands
polynomials or applies trigonometric identities.  Nothing downstream depends
on simplification strength for correctness; it only keeps term counts small.

Zero testing is numeric certification over a deterministic low-discrepancy
sample plan, not symbolic proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import DomainEvaluationError, ZeroTestInconclusive

#: Default absolute tolerance for certified zero tests.
DEFAULT_ZERO_TOL = 1e-10

#: Number of low-discrepancy points in a default sample plan.
DEFAULT_PLAN_SIZE = 33

#: Minimum number of evaluable points required for a conclusive zero test.
MIN_USABLE_POINTS = 9


class SpatialExpr:
    """Base class for spatial expression nodes (immutable)."""

    __slots__ = ()

    # operator sugar so algebra code reads naturally
    def __add__(self, other):
        return simplify(Sum((self, _as_expr(other))))

    __radd__ = __add__

    def __neg__(self):
        return simplify(Product((Constant(-1.0), self)))

    def __sub__(self, other):
        return simplify(Sum((self, Product((Constant(-1.0), _as_expr(other))))))

    def __mul__(self, other):
        return simplify(Product((self, _as_expr(other))))

    __rmul__ = __mul__

    def __pow__(self, exponent):
        return simplify(Power(self, Fraction(exponent)))


def _as_expr(value) -> SpatialExpr:
    if isinstance(value, SpatialExpr):
        return value
    if isinstance(value, (int, float)):
        return Constant(float(value))
    raise TypeError(f"cannot interpret {value!r} as a spatial expression")


@dataclass(frozen=True)
class Constant(SpatialExpr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value) + 0.0)
        if not math.isfinite(self.value):
            raise ValueError("non-finite constant")


@dataclass(frozen=True)
class Var(SpatialExpr):
    index: int
    name: str


@dataclass(frozen=True)
class Sum(SpatialExpr):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Product(SpatialExpr):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Power(SpatialExpr):
    base: SpatialExpr
    exponent: Fraction

    def __post_init__(self):
        object.__setattr__(self, "exponent", Fraction(self.exponent))


@dataclass(frozen=True)
class Exp(SpatialExpr):
    arg: SpatialExpr


@dataclass(frozen=True)
class Sin(SpatialExpr):
    arg: SpatialExpr


@dataclass(frozen=True)
class Cos(SpatialExpr):
    arg: SpatialExpr


@dataclass(frozen=True)
class Sinh(SpatialExpr):
    arg: SpatialExpr


@dataclass(frozen=True)
class Cosh(SpatialExpr):
    arg: SpatialExpr


ZERO = Constant(0.0)
ONE = Constant(1.0)

_FUNCTIONS = {
    Exp: (math.exp, "exp"),
    Sin: (math.sin, "sin"),
    Cos: (math.cos, "cos"),
    Sinh: (math.sinh, "sinh"),
    Cosh: (math.cosh, "cosh"),
}

_FUNCTION_BY_NAME = {name: cls for cls, (_, name) in _FUNCTIONS.items()}


def is_constant(e: SpatialExpr, value: float | None = None) -> bool:
    if not isinstance(e, Constant):
        return False
    return True if value is None else e.value == value


# ---------------------------------------------------------------------------
# canonical ordering
# ---------------------------------------------------------------------------


@lru_cache(maxsize=65536)
def _sort_key(e: SpatialExpr) -> str:
    """A deterministic structural string used to order commutative children."""
    if isinstance(e, Constant):
        return f"0c{e.value!r}"
    if isinstance(e, Var):
        return f"1v{e.index:04d}{e.name}"
    if isinstance(e, Power):
        return f"2p({_sort_key(e.base)})^{e.exponent}"
    if type(e) in _FUNCTIONS:
        return f"3f{_FUNCTIONS[type(e)][1]}({_sort_key(e.arg)})"
    if isinstance(e, Product):
        return "4m(" + ",".join(_sort_key(c) for c in e.children) + ")"
    if isinstance(e, Sum):
        return "5s(" + ",".join(_sort_key(c) for c in e.children) + ")"
    raise TypeError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# simplification
# ---------------------------------------------------------------------------


def _split_multiplier(e: SpatialExpr) -> tuple[float, SpatialExpr | None]:
    """Split a simplified node into (constant multiplier, rest)."""
    if isinstance(e, Constant):
        return e.value, None
    if isinstance(e, Product) and isinstance(e.children[0], Constant):
        rest = e.children[1:]
        return e.children[0].value, rest[0] if len(rest) == 1 else Product(rest)
    return 1.0, e


def _rebuild_product(const: float, factors: list[SpatialExpr]) -> SpatialExpr:
    if const == 0.0:
        return ZERO
    factors = sorted(factors, key=_sort_key)
    if const != 1.0:
        factors = [Constant(const)] + factors
    if not factors:
        return ONE
    if len(factors) == 1:
        return factors[0]
    return Product(tuple(factors))


@lru_cache(maxsize=65536)
def simplify(e: SpatialExpr) -> SpatialExpr:
    """Light canonicalization: constant folding, 0/1 identities, flattening,
    like-term collection in sums, like-base power collection in products.
    Idempotent; preserves values everywhere the input is defined."""
    if isinstance(e, (Constant, Var)):
        return Constant(e.value) if isinstance(e, Constant) else e

    if isinstance(e, Sum):
        const = 0.0
        buckets: dict[SpatialExpr, float] = {}
        order: list[SpatialExpr] = []
        stack = [simplify(c) for c in e.children]
        for child in stack:
            parts = child.children if isinstance(child, Sum) else (child,)
            for part in parts:
                mult, rest = _split_multiplier(part)
                if rest is None:
                    const += mult
                else:
                    if rest not in buckets:
                        buckets[rest] = 0.0
                        order.append(rest)
                    buckets[rest] += mult
        terms = []
        for rest in sorted(order, key=_sort_key):
            mult = buckets[rest]
            if mult == 0.0:
                continue
            if mult == 1.0:
                terms.append(rest)
            else:
                factors = list(rest.children) if isinstance(rest, Product) else [rest]
                terms.append(_rebuild_product(mult, factors))
        if const != 0.0 or not terms:
            terms.insert(0, Constant(const))
        if len(terms) == 1:
            return terms[0]
        return Sum(tuple(terms))

    if isinstance(e, Product):
        const = 1.0
        powers: dict[SpatialExpr, Fraction] = {}
        order = []
        for child in (simplify(c) for c in e.children):
            parts = child.children if isinstance(child, Product) else (child,)
            for part in parts:
                if isinstance(part, Constant):
                    const *= part.value
                    continue
                if isinstance(part, Power):
                    base, exp = part.base, part.exponent
                else:
                    base, exp = part, Fraction(1)
                if base not in powers:
                    powers[base] = Fraction(0)
                    order.append(base)
                powers[base] += exp
        if const == 0.0:
            return ZERO
        factors = []
        for base in order:
            exp = powers[base]
            if exp == 0:
                continue
            factor = simplify(Power(base, exp)) if exp != 1 else base
            if isinstance(factor, Constant):
                const *= factor.value
            else:
                factors.append(factor)
        return _rebuild_product(const, factors)

    if isinstance(e, Power):
        base = simplify(e.base)
        exp = Fraction(e.exponent)
        if exp == 0:
            return ONE
        if exp == 1:
            return base
        if isinstance(base, Constant):
            folded = _fold_constant_power(base.value, exp)
            if folded is not None:
                return Constant(folded)
        if isinstance(base, Power) and exp.denominator == 1:
            # (b^p)^q == b^(p*q) is unconditionally safe for integer q
            return simplify(Power(base.base, base.exponent * exp))
        return Power(base, exp)

    if type(e) in _FUNCTIONS:
        arg = simplify(e.arg)
        if isinstance(arg, Constant):
            fn = _FUNCTIONS[type(e)][0]
            try:
                return Constant(fn(arg.value))
            except OverflowError:
                pass
        return type(e)(arg)

    raise TypeError(f"unknown node {type(e).__name__}")


def _fold_constant_power(value: float, exp: Fraction) -> float | None:
    if exp.denominator == 1:
        n = int(exp)
        if value == 0.0 and n < 0:
            return None  # leave for evaluation to reject
        try:
            return float(value**n)
        except (OverflowError, ZeroDivisionError):
            return None
    if value > 0.0:
        try:
            return float(value ** float(exp))
        except OverflowError:
            return None
    return None


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def differentiate(e: SpatialExpr, var: int) -> SpatialExpr:
    """Exact partial derivative with respect to variable index ``var``."""
    return simplify(_diff(simplify(e), var))


def _diff(e: SpatialExpr, var: int) -> SpatialExpr:
    if isinstance(e, Constant):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == var else ZERO
    if isinstance(e, Sum):
        return Sum(tuple(_diff(c, var) for c in e.children))
    if isinstance(e, Product):
        terms = []
        for i, child in enumerate(e.children):
            rest = e.children[:i] + e.children[i + 1 :]
            terms.append(Product(rest + (_diff(child, var),)))
        return Sum(tuple(terms))
    if isinstance(e, Power):
        # p * base^(p-1) * base', valid for rational p
        factor = Power(e.base, e.exponent - 1)
        return Product(
            (Constant(float(e.exponent.numerator) / e.exponent.denominator), factor, _diff(e.base, var))
        )
    if isinstance(e, Exp):
        return Product((e, _diff(e.arg, var)))
    if isinstance(e, Sin):
        return Product((Cos(e.arg), _diff(e.arg, var)))
    if isinstance(e, Cos):
        return Product((Constant(-1.0), Sin(e.arg), _diff(e.arg, var)))
    if isinstance(e, Sinh):
        return Product((Cosh(e.arg), _diff(e.arg, var)))
    if isinstance(e, Cosh):
        return Product((Sinh(e.arg), _diff(e.arg, var)))
    raise TypeError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(e: SpatialExpr, point: Sequence[float]) -> float:
    """Evaluate at a point (one coordinate per variable index).

    Raises DomainEvaluationError for fractional powers of non-positive bases
    and for negative integer powers of zero.
    """
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Var):
        if e.index >= len(point):
            raise DomainEvaluationError(
                f"point has {len(point)} coordinates but variable {e.name!r} has index {e.index}"
            )
        return float(point[e.index])
    if isinstance(e, Sum):
        return sum(evaluate(c, point) for c in e.children)
    if isinstance(e, Product):
        total = 1.0
        for c in e.children:
            total *= evaluate(c, point)
        return total
    if isinstance(e, Power):
        base = evaluate(e.base, point)
        exp = e.exponent
        if exp.denominator == 1:
            n = int(exp)
            if base == 0.0 and n < 0:
                raise DomainEvaluationError("zero base raised to a negative power")
            return base**n
        if base <= 0.0:
            raise DomainEvaluationError(
                f"fractional power {exp} requires a positive base, got {base:g}"
            )
        return base ** float(exp)
    if type(e) in _FUNCTIONS:
        fn = _FUNCTIONS[type(e)][0]
        try:
            return fn(evaluate(e.arg, point))
        except OverflowError as exc:
            raise DomainEvaluationError(f"overflow in {_FUNCTIONS[type(e)][1]}") from exc
    raise TypeError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------------------
# sample plans and certified zero testing
# ---------------------------------------------------------------------------

_HALTON_BASES = (2, 3, 5, 7, 11, 13)


def _halton(index: int, base: int) -> float:
    result = 0.0
    f = 1.0
    i = index
    while i > 0:
        f /= base
        result += f * (i % base)
        i //= base
    return result


@dataclass(frozen=True)
class SamplePlan:
    """A deterministic set of spatial sample points with a zero tolerance."""

    points: tuple[tuple[float, ...], ...]
    tol: float = DEFAULT_ZERO_TOL

    def __post_init__(self):
        if len(self.points) < 17:
            raise ValueError("a sample plan needs at least 17 points")
        if len(set(self.points)) != len(self.points):
            raise ValueError("sample plan points must be pairwise distinct")

    @property
    def dim(self) -> int:
        return len(self.points[0])

    @classmethod
    def halton(
        cls,
        box: Sequence[tuple[float, float]],
        count: int = DEFAULT_PLAN_SIZE,
        tol: float = DEFAULT_ZERO_TOL,
        predicate=None,
        max_draws: int = 10000,
    ) -> "SamplePlan":
        """Build a plan from the Halton sequence mapped into ``box``.

        ``predicate``, when given, filters candidate points (used to restrict
        to the subregion where a problem's expressions are evaluable); the
        sequence is consumed until ``count`` acceptable points are found.
        """
        if len(box) > len(_HALTON_BASES):
            raise ValueError("sample plans support at most 6 spatial dimensions")
        for lo, hi in box:
            if not (lo < hi):
                raise ValueError("domain box intervals must satisfy lo < hi")
        points = []
        index = 1
        while len(points) < count:
            if index > max_draws:
                raise DomainEvaluationError(
                    "could not find enough usable sample points in the domain"
                )
            candidate = tuple(
                lo + (hi - lo) * _halton(index, _HALTON_BASES[d])
                for d, (lo, hi) in enumerate(box)
            )
            index += 1
            if predicate is None or predicate(candidate):
                points.append(candidate)
        return cls(points=tuple(points), tol=tol)


def certify_zero(e: SpatialExpr, plan: SamplePlan, scale: float = 0.0) -> bool:
    """Numerically certify that ``e`` vanishes on the plan.

    True iff |e(p)| <= tol*(1+scale) at every evaluable plan point; points
    where evaluation hits a domain error are skipped, and fewer than
    MIN_USABLE_POINTS usable points raises ZeroTestInconclusive.
    """
    usable = 0
    threshold = plan.tol * (1.0 + scale)
    worst = 0.0
    for p in plan.points:
        try:
            value = evaluate(e, p)
        except DomainEvaluationError:
            continue
        usable += 1
        worst = max(worst, abs(value))
        if worst > threshold:
            # keep scanning only if inconclusiveness is still possible
            if usable >= MIN_USABLE_POINTS:
                return False
    if usable < MIN_USABLE_POINTS:
        raise ZeroTestInconclusive(
            f"only {usable} of {len(plan.points)} plan points were evaluable"
        )
    return worst <= threshold
