"""Exception types shared across the package.

Exit-code mapping in the CLI: NumericalFailure -> 1, ConfigError -> 2.
ContractViolation signals misuse of an operation's preconditions and is
a programming error, not a runtime condition to recover from.
"""


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


class NumericalFailure(RuntimeError):
    """A computation produced non-finite values or failed to converge."""

    def __init__(self, message, partial_log=None, best_residual=None):
        super().__init__(message)
        self.partial_log = partial_log
        self.best_residual = best_residual


class ConfigError(ValueError):
    """A configuration file or CLI invocation is invalid."""
