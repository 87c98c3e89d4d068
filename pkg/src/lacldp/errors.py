"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Malformed user input: bad builtin name, bad JSON spec, bad CLI config."""


class ConvergenceError(RuntimeError):
    """An iterative scheme exhausted its budget.

    Carries the last achieved tolerance/residual so callers can report how
    far the computation got.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BudgetExceededError(ValueError):
    """A computation would exceed its enumeration or quadrature budget.

    ``max_feasible_n`` names the largest problem size that fits the budget.
    """

    def __init__(self, message, max_feasible_n=None):
        super().__init__(message)
        self.max_feasible_n = max_feasible_n
