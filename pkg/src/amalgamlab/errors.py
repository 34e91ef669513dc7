"""Exception types shared across the package."""


class AmalgamLabError(Exception):
    """Base class for all package-specific errors."""


class ParseError(AmalgamLabError):
    """Syntax error in the presentation DSL, with source location."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DuplicateGeneratorError(ParseError):
    pass


class ExponentOverflowError(ParseError):
    """Eager exponent expansion would exceed the letter cap."""


class BudgetExceeded(AmalgamLabError):
    """Coset enumeration hit the max_cosets cap; index may be infinite."""


class EnumerationTooLarge(AmalgamLabError):
    """Finite-group element enumeration exceeded its budget."""


class SubgroupNotContained(AmalgamLabError):
    """A subgroup generator lands outside the expected subgroup image."""


class RelationViolated(AmalgamLabError):
    """A homomorphism candidate fails a defining relation."""


class SourceMismatch(AmalgamLabError):
    """Two representations disagree about their source group."""


class SchreierElementOutsideSubgroup(AmalgamLabError):
    """Internal consistency failure: a coset table is broken."""


class BallBudgetExceeded(AmalgamLabError):
    """Ball enumeration exceeded its element budget."""


class CoefficientBoundViolated(AmalgamLabError):
    """A polynomial coefficient exceeds the certification bound."""


class ConfigError(AmalgamLabError):
    """An experiment config fails validation.  The message names the
    offending field by its path."""


class ComputationError(AmalgamLabError):
    """A grid cell failed while running; the message carries the cell
    coordinates."""
