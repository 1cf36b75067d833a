"""The factorized linear time operator, its exact inverse, and the
initial-condition-bearing leading term.

Order 2 is ``(d/dt - r2)(d/dt - r1)`` for roots r1, r2; order 1 is
``d/dt - r1``.  The inverse is realized as iterated definite integrals with
exponential kernels, computed in closed form through the exponential-
polynomial algebra -- the by-parts expansion in ExpPoly.integrate is exact,
so no quadrature is ever involved.

Confluent roots (|r1 - r2| below CONFLUENT_TOL) are snapped together; the
exact integral route then produces the t*exp(r*t) limit terms automatically,
and the leading term uses the explicit limit formula.  Zero roots degenerate
to the plain double integral and polynomial leading term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ToleranceViolation
from .separable import SeparableFunction
from .spatial import SpatialExpr, simplify
from .timealg import ExpPoly, _clean_complex

#: Roots closer than this are treated as a double root.
CONFLUENT_TOL = 1e-9


@dataclass(frozen=True)
class LinearOperatorSpec:
    """Roots and base time of the factorized operator."""

    order: int
    roots: tuple[complex, ...]
    base_time: float = 0.0

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("operator order must be 1 or 2")
        roots = tuple(_clean_complex(complex(r)) for r in self.roots)
        if len(roots) != self.order:
            raise ValueError(f"an order-{self.order} operator needs exactly {self.order} roots")
        for r in roots:
            if not (math.isfinite(r.real) and math.isfinite(r.imag)):
                raise ValueError("operator roots must be finite")
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "base_time", float(self.base_time))

    @classmethod
    def first_order(cls, root: complex, base_time: float = 0.0) -> "LinearOperatorSpec":
        return cls(1, (root,), base_time)

    @classmethod
    def second_order(cls, root1: complex, root2: complex, base_time: float = 0.0) -> "LinearOperatorSpec":
        return cls(2, (root1, root2), base_time)

    @classmethod
    def from_coefficients(cls, c1: float, c0: float, base_time: float = 0.0) -> "LinearOperatorSpec":
        """Roots of ``u_tt + c1*u_t + c0*u`` (i.e. r**2 + c1*r + c0 = 0)."""
        import cmath

        disc = cmath.sqrt(complex(c1) * c1 - 4.0 * complex(c0))
        return cls(2, ((-c1 + disc) / 2.0, (-c1 - disc) / 2.0), base_time)

    @property
    def is_confluent(self) -> bool:
        return self.order == 2 and abs(self.roots[0] - self.roots[1]) <= CONFLUENT_TOL

    def effective_roots(self) -> tuple[complex, ...]:
        """Roots with confluent pairs snapped exactly equal, so the exact
        integration never manufactures 1/(r1-r2) blow-ups."""
        if self.is_confluent:
            return (self.roots[0], self.roots[0])
        return self.roots


@dataclass(frozen=True)
class InitialData:
    """u at the base time, and u_t at the base time for order-2 operators."""

    a0: SpatialExpr
    a1: SpatialExpr | None = None

    def __post_init__(self):
        object.__setattr__(self, "a0", simplify(self.a0))
        if self.a1 is not None:
            object.__setattr__(self, "a1", simplify(self.a1))


def apply(spec: LinearOperatorSpec, f: SeparableFunction) -> SeparableFunction:
    """Forward operator: f_tt - (r1+r2) f_t + r1 r2 f, or f_t - r1 f."""
    if spec.order == 1:
        (r1,) = spec.roots
        return f.diff_t() - f.scale(r1)
    r1, r2 = spec.roots
    ft = f.diff_t()
    return ft.diff_t() - ft.scale(r1 + r2) + f.scale(r1 * r2)


def inverse_apply(spec: LinearOperatorSpec, f: SeparableFunction) -> SeparableFunction:
    """Exact inverse with zero Cauchy data at the base time.

    Order 2: exp(r1 t) * int_a^t exp((r2-r1) s) int_a^s exp(-r2 w) f(w) dw ds
    (the confluent case is the same formula with r2 snapped to r1).
    Order 1: exp(r1 t) * int_a^t exp(-r1 s) f(s) ds.
    """
    a = spec.base_time
    if spec.order == 1:
        (r1,) = spec.roots

        def kernel(g: ExpPoly) -> ExpPoly:
            inner = (ExpPoly.exponential(-r1) * g).integrate(a)
            return ExpPoly.exponential(r1) * inner

        return f.transform_time(kernel)

    r1, r2 = spec.effective_roots()

    def kernel(g: ExpPoly) -> ExpPoly:
        inner = (ExpPoly.exponential(-r2) * g).integrate(a)
        middle = (ExpPoly.exponential(r2 - r1) * inner).integrate(a)
        return ExpPoly.exponential(r1) * middle

    return f.transform_time(kernel)


def _shifted_exponential(root: complex, a: float) -> ExpPoly:
    """exp(root*(t-a)) as an ExpPoly in t."""
    import cmath

    return ExpPoly.exponential(root, cmath.exp(-root * a))


def leading_term(
    spec: LinearOperatorSpec,
    init: InitialData,
    source: SeparableFunction | None = None,
    dim: int | None = None,
) -> SeparableFunction:
    """The solution of the full linear problem with the given initial data,
    plus the inverted source.

    Distinct roots:  a0*e1 + (a1 - r1*a0)/(r2-r1) * (e2 - e1)
    Double root r:   a0*e + (a1 - r*a0) * (t-a)*e
    Order 1:         a0*e1
    with e_i = exp(r_i (t-a)); each case adds inverse_apply(source).
    """
    a = spec.base_time
    if dim is None:
        dim = _leading_dim(init, source)
    sf_a0 = SeparableFunction.from_spatial(init.a0, dim)

    if spec.order == 1:
        if init.a1 is not None:
            raise ValueError("order-1 operators take only u at the base time")
        result = sf_a0.scale_time(_shifted_exponential(spec.roots[0], a))
    else:
        if init.a1 is None:
            raise ValueError("order-2 operators need u_t at the base time")
        sf_a1 = SeparableFunction.from_spatial(init.a1, dim)
        r1, r2 = spec.effective_roots()
        velocity = sf_a1 - sf_a0.scale(r1)  # a1 - r1*a0
        e1 = _shifted_exponential(r1, a)
        if spec.is_confluent:
            # limit of (e2 - e1)/(r2 - r1) as r2 -> r1
            import cmath

            ramp = ExpPoly(
                [
                    (cmath.exp(-r1 * a), 1, r1),
                    (-a * cmath.exp(-r1 * a), 0, r1),
                ]
            )
            result = sf_a0.scale_time(e1) + velocity.scale_time(ramp)
        else:
            e2 = _shifted_exponential(r2, a)
            result = sf_a0.scale_time(e1) + velocity.scale(1.0 / (r2 - r1)).scale_time(e2 - e1)

    if source is not None and not source.is_zero:
        result = result + inverse_apply(spec, source)
    return result


def _leading_dim(init: InitialData, source: SeparableFunction | None) -> int:
    if source is not None:
        return source.dim
    # fall back to the highest variable index referenced by the initial data
    from .spatial import Constant, Power, Product, Sum, Var

    def max_index(e) -> int:
        if isinstance(e, Var):
            return e.index
        if isinstance(e, (Sum, Product)):
            return max((max_index(c) for c in e.children), default=-1)
        if isinstance(e, Power):
            return max_index(e.base)
        if isinstance(e, Constant):
            return -1
        return max_index(e.arg)

    indices = [max_index(init.a0)]
    if init.a1 is not None:
        indices.append(max_index(init.a1))
    return max(max(indices) + 1, 1)


def kernel_mass_exact(spec: LinearOperatorSpec, horizon: float) -> complex:
    """The inverse operator applied to the constant 1, evaluated at the
    horizon: the closed-form kernel mass (may be negative-signed for complex
    roots with positive real part; analysis decides how to report that)."""
    one = SeparableFunction.from_time(ExpPoly.constant(1.0), 1)
    value = inverse_apply(spec, one).eval_complex((0.0,), horizon)
    return value


def kernel_mass(spec: LinearOperatorSpec, horizon: float) -> float:
    """Real kernel mass; raises ToleranceViolation if the closed form has a
    non-negligible imaginary part (conjugate roots always pass)."""
    if spec.order != 2:
        raise ValueError("kernel mass is defined for order-2 operators")
    value = kernel_mass_exact(spec, horizon)
    if abs(value.imag) > 1e-10 * (1.0 + abs(value.real)):
        raise ToleranceViolation(
            f"kernel mass has imaginary residue {value.imag:.3e}; "
            "roots are not a real or conjugate pair"
        )
    return value.real
