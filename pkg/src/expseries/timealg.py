"""Exact algebra for exponential-polynomial functions of time.

An :class:`ExpPoly` is a finite sum of terms ``c * t**k * exp(lam*t)`` with
complex ``c`` and ``lam``.  The class is closed under addition,
multiplication, differentiation and definite integration from a fixed lower
limit, which is what makes the solver's inverse-operator kernels exact:
integrating against ``exp`` kernels never leaves the class.

Values are immutable and every operation returns a canonical form: terms are
keyed by ``(power, exponent)``, exponents closer than ``EXPONENT_MERGE_TOL``
share a key, and coefficients below a relative prune threshold are dropped.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import ExponentOverflow

#: Exponents within this distance (complex modulus) share a canonical key.
EXPONENT_MERGE_TOL = 1e-12

#: Terms with |coeff| <= COEFF_PRUNE_REL * (1 + max |coeff|) are dropped.
COEFF_PRUNE_REL = 1e-14

#: Guard for exp() evaluation, in natural-log units.
EXP_ARG_LIMIT = 700.0


def _clean_complex(z: complex) -> complex:
    # normalize -0.0 components so canonical forms hash/compare predictably
    re = z.real + 0.0 if z.real != 0.0 else 0.0
    im = z.imag + 0.0 if z.imag != 0.0 else 0.0
    return complex(re, im)


@dataclass(frozen=True)
class ExpPolyTerm:
    """One term ``coeff * t**power * exp(exponent*t)``."""

    coeff: complex
    power: int
    exponent: complex

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("term power must be a nonnegative integer")
        for z in (self.coeff, self.exponent):
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ValueError("non-finite value in exponential-polynomial term")


def _canonical(raw: Iterable[tuple[complex, int, complex]]) -> tuple[ExpPolyTerm, ...]:
    triples = []
    for coeff, power, exponent in raw:
        coeff = _clean_complex(complex(coeff))
        exponent = _clean_complex(complex(exponent))
        if abs(exponent) <= EXPONENT_MERGE_TOL:
            exponent = 0j
        triples.append((int(power), exponent, coeff))
    # sorting first makes accumulation order (hence the result) independent
    # of the order terms were supplied in
    triples.sort(key=lambda t: (t[0], t[1].real, t[1].imag, t[2].real, t[2].imag))

    groups: list[list] = []  # [power, exponent, coeff]
    for power, exponent, coeff in triples:
        for g in groups:
            if g[0] == power and abs(g[1] - exponent) <= EXPONENT_MERGE_TOL:
                g[2] += coeff
                break
        else:
            groups.append([power, exponent, coeff])
    if not groups:
        return ()
    ceiling = max(abs(g[2]) for g in groups)
    threshold = COEFF_PRUNE_REL * (1.0 + ceiling)
    return tuple(
        ExpPolyTerm(_clean_complex(g[2]), g[0], g[1])
        for g in groups
        if abs(g[2]) > threshold
    )


class ExpPoly:
    """A finite sum of ``c * t**k * exp(lam*t)`` terms in canonical form."""

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable = ()):
        raw = []
        for item in terms:
            if isinstance(item, ExpPolyTerm):
                raw.append((item.coeff, item.power, item.exponent))
            else:
                coeff, power, exponent = item
                raw.append((coeff, power, exponent))
        object.__setattr__(self, "terms", _canonical(raw))

    def __setattr__(self, name, value):
        raise AttributeError("ExpPoly values are immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "ExpPoly":
        return cls(())

    @classmethod
    def term(cls, coeff: complex = 1.0, power: int = 0, exponent: complex = 0.0) -> "ExpPoly":
        return cls(((coeff, power, exponent),))

    @classmethod
    def constant(cls, value: complex) -> "ExpPoly":
        return cls(((value, 0, 0.0),))

    @classmethod
    def exponential(cls, exponent: complex, coeff: complex = 1.0) -> "ExpPoly":
        return cls(((coeff, 0, exponent),))

    # -- structure ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpPoly) and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __repr__(self) -> str:
        if self.is_zero:
            return "ExpPoly(0)"
        bits = [f"({t.coeff})*t^{t.power}*e^({t.exponent})t" for t in self.terms]
        return "ExpPoly(" + " + ".join(bits) + ")"

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return ExpPoly(
            [(t.coeff, t.power, t.exponent) for t in self.terms]
            + [(t.coeff, t.power, t.exponent) for t in other.terms]
        )

    def __neg__(self) -> "ExpPoly":
        return ExpPoly([(-t.coeff, t.power, t.exponent) for t in self.terms])

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: Union["ExpPoly", complex, float, int]) -> "ExpPoly":
        if isinstance(other, ExpPoly):
            return ExpPoly(
                [
                    (a.coeff * b.coeff, a.power + b.power, a.exponent + b.exponent)
                    for a in self.terms
                    for b in other.terms
                ]
            )
        if isinstance(other, (int, float, complex)):
            return ExpPoly([(t.coeff * other, t.power, t.exponent) for t in self.terms])
        return NotImplemented

    __rmul__ = __mul__

    def differentiate(self) -> "ExpPoly":
        """d/dt, term-wise: (c,k,lam) -> (c*lam,k,lam) + (c*k,k-1,lam)."""
        raw = []
        for t in self.terms:
            if t.exponent != 0:
                raw.append((t.coeff * t.exponent, t.power, t.exponent))
            if t.power > 0:
                raw.append((t.coeff * t.power, t.power - 1, t.exponent))
        return ExpPoly(raw)

    def integrate(self, lower: float) -> "ExpPoly":
        """Definite integral from ``lower`` to ``t``, as an ExpPoly in ``t``.

        Exponents within EXPONENT_MERGE_TOL of zero take the polynomial
        branch ``s**k -> t**(k+1)/(k+1)``; all others use the finite
        integration-by-parts expansion.  The value of the antiderivative at
        the lower limit is folded into the ``(k=0, exponent=0)`` term.
        """
        raw = []
        constant = 0j
        for t in self.terms:
            mu = t.exponent
            if abs(mu) <= EXPONENT_MERGE_TOL:
                coeff = t.coeff / (t.power + 1)
                raw.append((coeff, t.power + 1, 0.0))
                constant -= coeff * lower ** (t.power + 1)
            else:
                k = t.power
                sign = 1.0
                fall = 1.0  # k!/(k-j)!
                for j in range(k + 1):
                    coeff = t.coeff * sign * fall / mu ** (j + 1)
                    raw.append((coeff, k - j, mu))
                    constant -= coeff * lower ** (k - j) * cmath.exp(mu * lower)
                    sign = -sign
                    fall *= k - j
        raw.append((constant, 0, 0.0))
        return ExpPoly(raw)

    # -- evaluation --------------------------------------------------------

    def __call__(self, t: float) -> complex:
        """Evaluate at real ``t``; raises ExponentOverflow past the guard."""
        total = 0j
        for term in self.terms:
            arg = term.exponent * t
            if abs(arg) > EXP_ARG_LIMIT:
                raise ExponentOverflow(
                    f"|exponent*t| = {abs(arg):.3g} exceeds the guard {EXP_ARG_LIMIT:g}"
                )
            total += term.coeff * t ** term.power * cmath.exp(arg)
        return total

    def abs_mass(self, t: float) -> float:
        """Sum of term magnitudes at ``t``; the cancellation scale of a call."""
        total = 0.0
        for term in self.terms:
            arg = term.exponent.real * t
            if arg > EXP_ARG_LIMIT:
                raise ExponentOverflow(
                    f"|exponent*t| = {abs(arg):.3g} exceeds the guard {EXP_ARG_LIMIT:g}"
                )
            total += abs(term.coeff) * abs(t) ** term.power * math.exp(arg)
        return total
