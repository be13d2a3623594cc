"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class CutoffError(RuntimeError):
    """The truncated Fock space was too small for the requested evolution."""

    def __init__(self, message, n_max=None, top_population=None):
        super().__init__(message)
        self.n_max = n_max
        self.top_population = top_population


class ConvergenceError(RuntimeError):
    """Step halving failed to reach the requested tolerance."""


class ConfigError(ValueError):
    """A run configuration document is malformed."""
