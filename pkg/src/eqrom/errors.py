"""Exception hierarchy shared by the library and the CLI."""


class EqromError(Exception):
    """Base class for all package errors."""


class DimensionError(EqromError, ValueError):
    """Operands live on different grids or have inconsistent shapes."""


class NumericError(EqromError, ArithmeticError):
    """Non-finite values or a failed numerical sanity check."""


class ModelError(EqromError, ValueError):
    """Invalid model parameters or operator symbols."""


class SolverError(NumericError):
    """An iterative solver did not converge."""


class SolvabilityError(NumericError):
    """A step matrix that must be nonsingular could not be factorized."""


class AssemblyError(NumericError):
    """Reduced operators violate a structural property (e.g. SPD)."""


class ConfigError(EqromError, ValueError):
    """Invalid run configuration."""


class FormatError(EqromError, IOError):
    """Malformed or truncated binary/CSV file."""
