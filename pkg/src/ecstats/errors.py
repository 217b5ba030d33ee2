"""Exceptions shared across modules; the CLI maps these to exit status 1."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class BudgetExceeded(DomainError):
    """An enumeration would exceed its configured size limit."""


class Unstabilized(DomainError):
    """A limit was requested below the level where it is known to be constant."""


class InfeasibleLevel(DomainError):
    """Neither brute force nor a closed formula can handle this level."""
