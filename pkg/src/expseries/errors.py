"""Exception types shared across the package."""


class ExpSeriesError(Exception):
    """Base class for all package errors."""


class ParseError(ExpSeriesError):
    """Raised on malformed expression or config text.

    Carries the 1-based line/column of the offending token and the set of
    token descriptions that would have been acceptable there.
    """

    def __init__(self, message, line=None, column=None, expected=()):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        location = f" at line {line}, column {column}" if line is not None else ""
        hint = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message}{location}{hint}")


class DomainEvaluationError(ExpSeriesError):
    """An expression was evaluated outside its real domain."""


class ZeroTestInconclusive(ExpSeriesError):
    """Too few sample points were evaluable to certify anything."""


class ToleranceViolation(ExpSeriesError):
    """A value that must be real (or a residue that must be small) was not."""


class TermBudgetExceeded(ExpSeriesError):
    """A separable representation grew past the configured term budget."""


class MaxOrderExceeded(ExpSeriesError):
    """A jet derivative order exceeded the declared maximum."""


class NonPolynomialNonlinearity(ExpSeriesError):
    """The nonlinear term is not polynomial in the jet variables."""


class InvalidNonlinearity(ExpSeriesError):
    """The nonlinear term violates a structural requirement (e.g. a pure
    source monomial with no jet factor, which belongs in the source term)."""


class NotContractive(ExpSeriesError):
    """A truncation bound was requested for a non-contractive setup."""


class MissingExact(ExpSeriesError):
    """An error table was requested but no exact solution is configured."""


class ExponentOverflow(ExpSeriesError):
    """An exponential evaluation exceeded the overflow guard."""


class ConfigError(ExpSeriesError):
    """A problem configuration is malformed or inconsistent."""
