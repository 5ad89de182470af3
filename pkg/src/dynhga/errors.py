"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed argument: wrong length, empty vector, non-finite value."""


class ContractViolation(RuntimeError):
    """A caller broke an operation's precondition."""


class BudgetExhausted(Exception):
    """The environment refused an evaluation past its hard budget."""


class NumericFailure(ArithmeticError):
    """Non-finite objective or gradient met during a local search.

    ``best_x`` and ``best_f`` hold the best point seen before the failure.
    """

    def __init__(self, message, best_x=None, best_f=None):
        super().__init__(message)
        self.best_x = best_x
        self.best_f = best_f


class ConfigError(ValueError):
    """Bad experiment configuration; the message names the offending field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
