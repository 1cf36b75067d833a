"""Series-solution driver: leading term, correction recursion, partial sums,
early stopping on certified-zero corrections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import linop
from .errors import DomainEvaluationError
from .jets import JetPolynomial, RevisedExpansion
from .linop import InitialData, LinearOperatorSpec
from .separable import DEFAULT_TERM_BUDGET, SeparableFunction, term_budget
from .spatial import MIN_USABLE_POINTS, SamplePlan

#: Number of time samples used alongside the spatial plan for certification.
TIME_SAMPLE_COUNT = 9

#: Default iteration count (a 6-term partial sum).
DEFAULT_MAX_CORRECTIONS = 6


def time_samples(start: float, stop: float, count: int = TIME_SAMPLE_COUNT) -> tuple[float, ...]:
    """Chebyshev-spaced samples on [start, stop], endpoints included."""
    if count < 2:
        raise ValueError("need at least two time samples")
    mid = (start + stop) / 2.0
    half = (stop - start) / 2.0
    return tuple(mid - half * math.cos(math.pi * j / (count - 1)) for j in range(count))


@dataclass(frozen=True)
class ProblemSpec:
    """Everything a solve needs: operator, nonlinearity, data, domain,
    horizon, sampling plan, and budgets."""

    operator: LinearOperatorSpec
    nonlinearity: JetPolynomial
    source: SeparableFunction
    init: InitialData
    dim: int
    domain: tuple[tuple[float, float], ...]
    horizon: float
    plan: SamplePlan
    exact: Callable[[Sequence[float], float], float] | None = None
    n_max: int = DEFAULT_MAX_CORRECTIONS
    term_budget: int = DEFAULT_TERM_BUDGET

    def __post_init__(self):
        if not self.horizon > self.operator.base_time:
            raise ValueError("the horizon must lie after the base time")
        if len(self.domain) != self.dim:
            raise ValueError("domain box must list one interval per variable")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError("domain intervals must satisfy lo < hi")
        if self.plan.dim != self.dim:
            raise ValueError("sample plan dimension does not match the problem")
        if self.nonlinearity.dim != self.dim:
            raise ValueError("nonlinearity dimension does not match the problem")

    def certification_times(self) -> tuple[float, ...]:
        return time_samples(self.operator.base_time, self.horizon)


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    polynomial_terms: int
    correction_terms: int
    vanished: bool


@dataclass(frozen=True)
class SeriesSolution:
    corrections: tuple[SeparableFunction, ...]
    vanished_at: int | None
    diagnostics: tuple[StepDiagnostics, ...] = field(default=())

    def partial_sum(self, n: int) -> SeparableFunction:
        """S_n = u_0 + ... + u_n."""
        if n < 0 or n >= len(self.corrections):
            raise ValueError(f"partial sum index {n} outside computed range")
        total = self.corrections[0]
        for u in self.corrections[1 : n + 1]:
            total = total + u
        return total


def certify_zero(
    f: SeparableFunction,
    plan: SamplePlan,
    times: Sequence[float],
    tol: float | None = None,
) -> bool:
    """Certify that f vanishes on plan x times.

    Each sample must satisfy |f(p,t)| <= tol * (1 + mass(p,t)) where mass is
    the sum of term magnitudes: cancellation residue is judged against the
    size of what cancelled.  Points that are not evaluable are skipped; fewer
    than MIN_USABLE_POINTS usable spatial points is inconclusive.
    """
    from .errors import ZeroTestInconclusive

    if f.is_zero:
        return True
    tol = plan.tol if tol is None else tol
    usable = 0
    for p in plan.points:
        try:
            values = [(abs(f.eval_complex(p, t)), f.abs_mass(p, t)) for t in times]
        except DomainEvaluationError:
            continue
        usable += 1
        for value, mass in values:
            if value > tol * (1.0 + mass):
                return False
    if usable < MIN_USABLE_POINTS:
        raise ZeroTestInconclusive(
            f"only {usable} of {len(plan.points)} plan points were evaluable"
        )
    return True


def solve(problem: ProblemSpec, n_max: int | None = None) -> SeriesSolution:
    """Run the correction recursion up to ``n_max`` corrections.

    u_0 is the leading term; u_{n+1} = O^{-1}[P_n] with P_n the partial-sum
    Adomian polynomial of the nonlinearity.  When P_n is certified zero the
    recursion stops and the remaining corrections are exact zeros.
    """
    n_max = problem.n_max if n_max is None else n_max
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    plan = problem.plan
    times = problem.certification_times()

    with term_budget(problem.term_budget):
        u0 = linop.leading_term(
            problem.operator, problem.init, problem.source, dim=problem.dim
        ).prune(plan)
        corrections = [u0]
        diagnostics = []
        vanished_at = None
        expansion = RevisedExpansion(problem.nonlinearity, problem.dim)
        for n in range(n_max):
            polynomial = expansion.next(corrections[-1]).prune(plan)
            if certify_zero(polynomial, plan, times):
                vanished_at = n + 1
                diagnostics.append(StepDiagnostics(n, polynomial.term_count(), 0, True))
                break
            nxt = linop.inverse_apply(problem.operator, polynomial).prune(plan)
            corrections.append(nxt)
            diagnostics.append(
                StepDiagnostics(n, polynomial.term_count(), nxt.term_count(), False)
            )
        while len(corrections) < n_max + 1:
            corrections.append(SeparableFunction.zero(problem.dim))

    return SeriesSolution(tuple(corrections), vanished_at, tuple(diagnostics))


def residual(problem: ProblemSpec, f: SeparableFunction) -> SeparableFunction:
    """Defect of f in the governing equation: O[f] - N[f] - S."""
    with term_budget(problem.term_budget):
        value = linop.apply(problem.operator, f) - problem.nonlinearity.evaluate(f)
        if not problem.source.is_zero:
            value = value - problem.source
    return value
