"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit 2,
numerical failures exit 3, I/O failures (plain OSError) exit 4.
"""


class NtkesError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(NtkesError, ValueError):
    """Invalid configuration or arguments (bad key, odd width, eta out of range...)."""


class DatasetError(NtkesError, ValueError):
    """Invalid dataset: duplicate covariates, dimension mismatch, empty input."""


class NumericalError(NtkesError, ArithmeticError):
    """Numerical failure: divergence, eigensolver non-convergence, degenerate spectrum.

    Carries optional diagnostics so callers can report what went wrong.
    """

    def __init__(self, message, *, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual
