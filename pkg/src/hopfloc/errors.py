"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inputs are inconsistent (atlas mismatch, bad grid, invalid scenario field)."""


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


class LemmaViolation(AssertionError):
    """A numerically checked structural statement turned out false at some point."""


class NumericalFailure(RuntimeError):
    """A quadrature or rounding step could not reach its own acceptance threshold."""
