"""Separable space-time functions: finite sums of (spatial AST) x (time term).

A :class:`SeparableFunction` stores ``u(X,t) = sum_j F_j(X) * g_j(t)`` keyed
by the time factor ``t**k * exp(lam*t)``.  Each key carries a complex-weighted
combination of real spatial expressions, so conjugate exponential pairs (the
sin/cos and sinh/cosh building blocks) are represented exactly; with real
problem data the imaginary parts cancel at evaluation time, and
:meth:`SeparableFunction.eval` enforces that cancellation via an imaginary
residue check.

The class is closed under sums, products, spatial and time differentiation,
which is everything the correction recursion needs.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import TermBudgetExceeded, ToleranceViolation
from .spatial import (
    ONE,
    Constant,
    SamplePlan,
    SpatialExpr,
    Sum,
    _sort_key,
    _split_multiplier,
    evaluate,
    is_constant,
    simplify,
)
from .timealg import EXPONENT_MERGE_TOL, ExpPoly, _clean_complex

#: Hard cap on the number of (time key, spatial part) entries in one value.
DEFAULT_TERM_BUDGET = 10000

_budget = [DEFAULT_TERM_BUDGET]

#: Relative imaginary residue allowed when evaluating to a real number.
IMAG_RESIDUE_TOL = 1e-10

#: Pruning drops a time key only when its coefficient is zero to roundoff,
#: judged relative to the cancellation mass at each plan point.  This is
#: deliberately far below certification tolerances so pruning never changes
#: values beyond double-precision noise.
PRUNE_MASS_REL = 1e-13


@contextlib.contextmanager
def term_budget(limit: int):
    """Temporarily override the term budget (used by the solve driver)."""
    _budget.append(int(limit))
    try:
        yield
    finally:
        _budget.pop()


def current_term_budget() -> int:
    return _budget[-1]


@dataclass(frozen=True)
class SeparableTerm:
    """All parts sharing one time factor ``t**power * exp(exponent*t)``."""

    power: int
    exponent: complex
    parts: tuple[tuple[complex, SpatialExpr], ...]


def _normalized_parts(weight: complex, expr: SpatialExpr):
    """Split an expression into (weight, monic atom) parts: top-level sums
    are distributed and constant multipliers move into the complex weight, so
    proportional coefficients share one structural key and merge."""
    expr = simplify(expr)
    pieces = expr.children if isinstance(expr, Sum) else (expr,)
    for piece in pieces:
        mult, rest = _split_multiplier(piece)
        yield (weight * mult, ONE if rest is None else rest)


def _canonical_terms(raw) -> tuple[SeparableTerm, ...]:
    # raw: iterable of (power, exponent, weight, spatial) entries
    entries = []
    for power, exponent, weight, expr in raw:
        exponent = _clean_complex(complex(exponent))
        if abs(exponent) <= EXPONENT_MERGE_TOL:
            exponent = 0j
        for part_weight, atom in _normalized_parts(complex(weight), expr):
            entries.append((int(power), exponent, _clean_complex(part_weight), atom))
    entries.sort(key=lambda e: (e[0], e[1].real, e[1].imag, _sort_key(e[3]), e[2].real, e[2].imag))

    groups: list[list] = []  # [power, exponent, {expr: [weight_sum, abs_sum]}, order]
    for power, exponent, weight, expr in entries:
        for g in groups:
            if g[0] == power and abs(g[1] - exponent) <= EXPONENT_MERGE_TOL:
                bucket = g[2]
                break
        else:
            bucket = {}
            groups.append([power, exponent, bucket])
        if expr not in bucket:
            bucket[expr] = [0j, 0.0]
        bucket[expr][0] += weight
        bucket[expr][1] += abs(weight)

    terms = []
    for power, exponent, bucket in groups:
        parts = []
        for expr in sorted(bucket, key=_sort_key):
            weight, mass = bucket[expr]
            # merge-time cancellation threshold, relative to the merged mass
            if abs(weight) <= 1e-14 * mass:
                continue
            parts.append((_clean_complex(weight), expr))
        if parts:
            terms.append(SeparableTerm(power, exponent, tuple(parts)))
    return tuple(terms)


@dataclass(frozen=True)
class SeparableFunction:
    dim: int
    terms: tuple[SeparableTerm, ...]

    def __post_init__(self):
        size = sum(len(t.parts) for t in self.terms)
        if size > current_term_budget():
            raise TermBudgetExceeded(
                f"separable representation has {size} terms; budget is {current_term_budget()}"
            )

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "SeparableFunction":
        return cls(dim, ())

    @classmethod
    def from_spatial(cls, expr: SpatialExpr, dim: int) -> "SeparableFunction":
        return cls.from_parts(expr, ExpPoly.constant(1.0), dim)

    @classmethod
    def from_time(cls, time: ExpPoly, dim: int) -> "SeparableFunction":
        return cls.from_parts(Constant(1.0), time, dim)

    @classmethod
    def from_parts(cls, expr: SpatialExpr, time: ExpPoly, dim: int) -> "SeparableFunction":
        expr = simplify(expr)
        if is_constant(expr, 0.0) or time.is_zero:
            return cls.zero(dim)
        raw = [(t.power, t.exponent, t.coeff, expr) for t in time]
        return cls(dim, _canonical_terms(raw))

    # -- structure ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def term_count(self) -> int:
        return sum(len(t.parts) for t in self.terms)

    def _raw(self):
        for t in self.terms:
            for weight, expr in t.parts:
                yield (t.power, t.exponent, weight, expr)

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "SeparableFunction") -> "SeparableFunction":
        if not isinstance(other, SeparableFunction):
            return NotImplemented
        if self.dim != other.dim:
            raise ValueError("cannot add separable functions of different dimensions")
        return SeparableFunction(self.dim, _canonical_terms(list(self._raw()) + list(other._raw())))

    def __sub__(self, other: "SeparableFunction") -> "SeparableFunction":
        return self + other.scale(-1.0)

    def __neg__(self) -> "SeparableFunction":
        return self.scale(-1.0)

    def scale(self, factor: complex) -> "SeparableFunction":
        if factor == 0:
            return SeparableFunction.zero(self.dim)
        raw = [(p, e, w * factor, x) for (p, e, w, x) in self._raw()]
        return SeparableFunction(self.dim, _canonical_terms(raw))

    def scale_spatial(self, expr: SpatialExpr) -> "SeparableFunction":
        expr = simplify(expr)
        if is_constant(expr, 0.0):
            return SeparableFunction.zero(self.dim)
        raw = [(p, e, w, simplify(x * expr)) for (p, e, w, x) in self._raw()]
        return SeparableFunction(self.dim, _canonical_terms(raw))

    def scale_time(self, time: ExpPoly) -> "SeparableFunction":
        raw = [
            (p + t.power, e + t.exponent, w * t.coeff, x)
            for (p, e, w, x) in self._raw()
            for t in time
        ]
        return SeparableFunction(self.dim, _canonical_terms(raw))

    def __mul__(self, other: "SeparableFunction") -> "SeparableFunction":
        if not isinstance(other, SeparableFunction):
            return NotImplemented
        if self.dim != other.dim:
            raise ValueError("cannot multiply separable functions of different dimensions")
        raw = []
        for p1, e1, w1, x1 in self._raw():
            for p2, e2, w2, x2 in other._raw():
                raw.append((p1 + p2, e1 + e2, w1 * w2, simplify(x1 * x2)))
        return SeparableFunction(self.dim, _canonical_terms(raw))

    def diff_x(self, var: int) -> "SeparableFunction":
        from .spatial import differentiate

        raw = [(p, e, w, differentiate(x, var)) for (p, e, w, x) in self._raw()]
        return SeparableFunction(self.dim, _canonical_terms(raw))

    def diff_t(self) -> "SeparableFunction":
        raw = []
        for p, e, w, x in self._raw():
            if e != 0:
                raw.append((p, e, w * e, x))
            if p > 0:
                raw.append((p - 1, e, w * p, x))
        return SeparableFunction(self.dim, _canonical_terms(raw))

    def transform_time(self, fn) -> "SeparableFunction":
        """Apply ``fn: ExpPoly -> ExpPoly`` to each time key (used by the
        inverse-operator kernels)."""
        raw = []
        for t in self.terms:
            image = fn(ExpPoly.term(1.0, t.power, t.exponent))
            for out in image:
                for weight, expr in t.parts:
                    raw.append((out.power, out.exponent, weight * out.coeff, expr))
        return SeparableFunction(self.dim, _canonical_terms(raw))

    # -- evaluation --------------------------------------------------------

    def eval_complex(self, point: Sequence[float], t: float) -> complex:
        total = 0j
        for term in self.terms:
            time_value = ExpPoly.term(1.0, term.power, term.exponent)(t)
            spatial = sum(w * evaluate(x, point) for w, x in term.parts)
            total += spatial * time_value
        return total

    def eval(self, point: Sequence[float], t: float) -> float:
        """Real value at (point, t); complains if conjugate structure is
        inconsistent (imaginary residue above tolerance)."""
        value = self.eval_complex(point, t)
        if abs(value.imag) > IMAG_RESIDUE_TOL * (1.0 + abs(value.real)):
            raise ToleranceViolation(
                f"imaginary residue {value.imag:.3e} at t={t:g} "
                "(complex exponents are not in conjugate pairs)"
            )
        return value.real

    def abs_mass(self, point: Sequence[float], t: float) -> float:
        """Sum of part magnitudes: the cancellation scale of eval()."""
        total = 0.0
        for term in self.terms:
            time_mass = abs(t) ** term.power * math.exp(term.exponent.real * t)
            total += time_mass * sum(abs(w) * abs(evaluate(x, point)) for w, x in term.parts)
        return total

    # -- pruning -----------------------------------------------------------

    def prune(self, plan: SamplePlan) -> "SeparableFunction":
        """Drop time keys whose spatial coefficient vanishes to roundoff on
        the plan: |coeff(p)| <= PRUNE_MASS_REL * (1 + mass(p)) at every usable
        point, with mass the sum of part magnitudes there.  Judging residue
        against the cancelled mass removes exact cancellations while leaving
        genuinely small coefficients untouched, so pruning never changes
        values beyond double-precision noise."""
        from .errors import DomainEvaluationError, ZeroTestInconclusive
        from .spatial import MIN_USABLE_POINTS

        kept = []
        for term in self.terms:
            usable = 0
            vanished = True
            for p in plan.points:
                try:
                    value = 0j
                    mass = 0.0
                    for w, x in term.parts:
                        v = evaluate(x, p)
                        value += w * v
                        mass += abs(w) * abs(v)
                except DomainEvaluationError:
                    continue
                usable += 1
                if abs(value) > PRUNE_MASS_REL * (1.0 + mass):
                    vanished = False
                    break
            if not vanished:
                kept.append(term)
                continue
            if usable < MIN_USABLE_POINTS:
                raise ZeroTestInconclusive(
                    f"only {usable} of {len(plan.points)} plan points were evaluable"
                )
        return SeparableFunction(self.dim, tuple(kept))

    # -- misc ---------------------------------------------------------------

    def conjugate_weights_ok(self, tol: float = 1e-9) -> bool:
        """True when every complex-exponent key has a conjugate partner with
        conjugate weights (a structural sanity check used by reports)."""
        index = {}
        for t in self.terms:
            index[(t.power, t.exponent.real, t.exponent.imag)] = t
        for t in self.terms:
            if abs(t.exponent.imag) <= EXPONENT_MERGE_TOL:
                continue
            partner = index.get((t.power, t.exponent.real, -t.exponent.imag))
            if partner is None or len(partner.parts) != len(t.parts):
                return False
            for (w1, x1), (w2, x2) in zip(t.parts, partner.parts):
                if x1 != x2 or abs(w1 - w2.conjugate()) > tol * (1.0 + abs(w1)):
                    return False
        return True


def build(
    dim: int, pieces: Iterable[tuple[SpatialExpr, ExpPoly]]
) -> SeparableFunction:
    """Assemble a separable function from (spatial, time) product pieces."""
    total = SeparableFunction.zero(dim)
    for expr, time in pieces:
        total = total + SeparableFunction.from_parts(expr, time, dim)
    return total
