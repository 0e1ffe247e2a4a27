"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid arguments or configuration (CLI exit code 2)."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed; ``residual`` carries the best value reached."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
