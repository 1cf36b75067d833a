"""Convergence diagnostics: contraction constant, truncation bounds, kernel
mass, Lipschitz estimation, and empirical error tables.

The contraction constant is ``alpha = L1 * kernel_mass`` where the kernel
mass is the inverse operator applied to the constant 1 at the horizon.  With
``alpha < 1`` the series converges and the tail after q+1 terms is bounded by
``M * alpha**(q+1) / (L1 * (1 - alpha))`` with M the maximum magnitude of the
first expansion polynomial over the sampled region.

For conjugate root pairs with positive real part the closed-form mass can
come out negative (the kernel changes sign before the horizon); in that case
the absolute value is used and the report flags the discrepancy instead of
silently reinterpreting the formula.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import linop
from .errors import MissingExact, NotContractive
from .jets import JetPolynomial
from .linop import LinearOperatorSpec
from .separable import SeparableFunction
from .spatial import Constant, Sum, Var, simplify


def kernel_mass(spec: LinearOperatorSpec, horizon: float) -> float:
    """Kernel mass at the horizon; negative closed forms are reported by
    their absolute value (see kernel_mass_detail)."""
    mass, _ = kernel_mass_detail(spec, horizon)
    return mass


def kernel_mass_detail(spec: LinearOperatorSpec, horizon: float) -> tuple[float, bool]:
    """(mass, closed_form_was_negative)."""
    raw = linop.kernel_mass(spec, horizon)
    if raw < 0.0:
        return -raw, True
    return raw, False


def contraction_alpha(lipschitz: float, spec: LinearOperatorSpec, horizon: float) -> float:
    """alpha = L1 * kernel mass."""
    if not lipschitz > 0.0:
        raise ValueError("the Lipschitz constant must be positive")
    return lipschitz * kernel_mass(spec, horizon)


def truncation_bound(m_max: float, lipschitz: float, alpha: float, q: int) -> float:
    """Tail bound after the q-th partial sum: M * alpha**(q+1) / (L1*(1-alpha))."""
    if m_max < 0.0:
        raise ValueError("M must be nonnegative")
    if not lipschitz > 0.0:
        raise ValueError("the Lipschitz constant must be positive")
    if q < 0:
        raise ValueError("q must be nonnegative")
    if not 0.0 < alpha < 1.0:
        raise NotContractive(f"alpha = {alpha:g} is not in (0, 1); the bound is meaningless")
    return m_max * alpha ** (q + 1) / (lipschitz * (1.0 - alpha))


def estimate_lipschitz(
    nonlinearity: JetPolynomial,
    box: Sequence[tuple[float, float]],
    radius: float,
    samples: int = 200,
    seed: int = 20260809,
) -> float:
    """Sampling lower estimate of the reduced Lipschitz constant.

    Draws pairs of low-degree random polynomial functions with sup-norm at
    most ``radius`` over the box (including near-extreme constant pairs) and
    maximizes |N[u] - N[v]| / max|u - v| over the sampled points.  This is a
    heuristic lower estimate and is flagged as such in reports; it never
    silently substitutes for a user-supplied constant.
    """
    if samples < 100:
        raise ValueError("use at least 100 samples for the Lipschitz estimate")
    if not radius > 0.0:
        raise ValueError("the function-ball radius must be positive")
    rng = random.Random(seed)
    dim = nonlinearity.dim
    eval_points = _estimation_grid(box)

    best = 0.0
    for trial in range(samples):
        if trial % 4 == 0:
            # near-extreme constant pairs: these realize the worst ratio for
            # u-only nonlinearities like powers of u
            sign = -1.0 if (trial // 4) % 2 else 1.0
            level = radius * (1.0 - 0.05 * rng.random())
            u = _constant_fn(sign * level, dim)
            v = _constant_fn(sign * (level - radius * 0.02 * (1.0 + rng.random())), dim)
        else:
            u = _random_poly(rng, box, radius, dim)
            v = _random_poly(rng, box, radius, dim)
        nu = nonlinearity.evaluate(u)
        nv = nonlinearity.evaluate(v)
        gap = max(abs(u.eval(p, 0.0) - v.eval(p, 0.0)) for p in eval_points)
        if gap <= 1e-12 * radius:
            continue
        spread = max(abs(nu.eval(p, 0.0) - nv.eval(p, 0.0)) for p in eval_points)
        best = max(best, spread / gap)
    return best


def _estimation_grid(box) -> list[tuple[float, ...]]:
    if len(box) == 1:
        lo, hi = box[0]
        return [(lo + (hi - lo) * i / 10.0,) for i in range(11)]
    axes = [[lo + (hi - lo) * i / 4.0 for i in range(5)] for lo, hi in box]
    points = [()]
    for axis in axes:
        points = [p + (v,) for p in points for v in axis]
    return points


def _constant_fn(value: float, dim: int) -> SeparableFunction:
    return SeparableFunction.from_spatial(Constant(value), dim)


def _random_poly(rng: random.Random, box, radius: float, dim: int) -> SeparableFunction:
    degree = rng.randint(0, 3)
    terms = [Constant(rng.uniform(-1.0, 1.0))]
    for k in range(1, degree + 1):
        idx = rng.randrange(dim)
        var = Var(idx, f"x{idx}") if dim > 1 else Var(0, "x")
        terms.append(Constant(rng.uniform(-1.0, 1.0)) * var**k)
    expr = simplify(Sum(tuple(terms)))
    fn = SeparableFunction.from_spatial(expr, dim)
    peak = max(abs(fn.eval(p, 0.0)) for p in _estimation_grid(box))
    if peak == 0.0:
        return _constant_fn(0.0, dim)
    return fn.scale(rng.uniform(0.2, 1.0) * radius / peak)


@dataclass(frozen=True)
class ErrorTable:
    """Pointwise absolute errors |exact - partial sum| on a grid."""

    rows: tuple[tuple[tuple[float, ...], float, float], ...]  # (point, t, error)
    n: int

    def max_error(self) -> float:
        return max((row[2] for row in self.rows), default=0.0)


def error_table(
    solution,
    exact: Callable[[Sequence[float], float], float] | SeparableFunction,
    points: Sequence[Sequence[float]],
    times: Sequence[float],
    n: int,
) -> ErrorTable:
    """E_n(x, t) = |exact(x, t) - S_n(x, t)| over the grid, point-major."""
    if exact is None:
        raise MissingExact("no exact solution is available for error tables")
    partial = solution.partial_sum(n)
    reference = exact.eval if isinstance(exact, SeparableFunction) else exact
    rows = []
    for p in points:
        p = tuple(float(c) for c in p)
        for t in times:
            rows.append((p, float(t), abs(reference(p, t) - partial.eval(p, t))))
    return ErrorTable(tuple(rows), n)


@dataclass(frozen=True)
class ConvergenceReport:
    alpha: float
    kernel_mass: float
    lipschitz: float
    lipschitz_estimated: bool
    m_max: float
    bounds: tuple[float, ...]  # indexed by q = 0..q_max; empty if not contractive
    contractive: bool
    notes: tuple[str, ...] = field(default=())


def build_report(
    problem,
    lipschitz: float | None = None,
    q_max: int = 4,
    lipschitz_radius: float | None = None,
) -> ConvergenceReport:
    """Assemble the convergence report for an order-2 problem.

    M is the maximum magnitude of the first expansion polynomial N[u_0] over
    the plan and the certification time samples (a sampled maximum, noted as
    such).  When no Lipschitz constant is supplied the sampling estimator is
    used and clearly flagged.
    """
    from .jets import RevisedExpansion

    spec = problem.operator
    if spec.order != 2:
        raise ValueError("convergence reports require an order-2 operator")
    notes = ["M is a sampled maximum over the plan and time samples"]

    mass, negative = kernel_mass_detail(spec, problem.horizon)
    if negative:
        notes.append(
            "closed-form kernel mass was negative (sign-changing kernel); "
            "its absolute value is reported"
        )

    u0 = linop.leading_term(spec, problem.init, problem.source, dim=problem.dim).prune(
        problem.plan
    )
    first = RevisedExpansion(problem.nonlinearity, problem.dim).next(u0)
    m_max = 0.0
    for p in problem.plan.points:
        for t in problem.certification_times():
            m_max = max(m_max, abs(first.eval_complex(p, t)))

    estimated = lipschitz is None
    if estimated:
        radius = lipschitz_radius
        if radius is None:
            radius = 2.0 * max(
                abs(u0.eval_complex(p, t))
                for p in problem.plan.points
                for t in problem.certification_times()
            )
            radius = max(radius, 1e-6)
        lipschitz = estimate_lipschitz(problem.nonlinearity, problem.domain, radius)
        notes.append(
            f"Lipschitz constant is a sampling lower estimate over radius {radius:g}"
        )
        if lipschitz <= 0.0:
            lipschitz = 1e-12  # a zero nonlinearity: any tiny constant works
    alpha = lipschitz * mass
    contractive = 0.0 < alpha < 1.0
    if contractive:
        bounds = tuple(truncation_bound(m_max, lipschitz, alpha, q) for q in range(q_max + 1))
    else:
        bounds = ()
    return ConvergenceReport(
        alpha=alpha,
        kernel_mass=mass,
        lipschitz=lipschitz,
        lipschitz_estimated=estimated,
        m_max=m_max,
        bounds=bounds,
        contractive=contractive,
        notes=tuple(notes),
    )
