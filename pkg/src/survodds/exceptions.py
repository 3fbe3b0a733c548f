"""Exception hierarchy shared by every module."""


class SurvivalError(ValueError):
    """Base class for all errors raised by the package."""


class SchemaError(SurvivalError):
    """The input file does not match the cohort schema (missing column etc.)."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(SurvivalError):
    """A cell could not be parsed and strict mode forbids skipping the row."""


class ConfigurationError(SurvivalError):
    """Invalid user configuration: unknown covariate, single group, bad spec."""


class DomainError(SurvivalError):
    """An argument lies outside the domain of the operation."""


class DegenerateDataError(SurvivalError):
    """The data cannot support the requested estimate (no events, constant column...)."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class SeparationError(DegenerateDataError):
    """Coefficients diverge: monotone likelihood or perfect separation."""


class NotConvergedError(SurvivalError):
    """An operation that requires a converged fit received an unconverged one."""
