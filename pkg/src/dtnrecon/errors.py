"""Exception hierarchy.

Validation problems (bad input, bad geometry, bad coefficients) derive from
:class:`ValidationError`; failures of the numerics themselves derive from
:class:`NumericalError`.  The CLI maps these to exit codes 2 and 3.
"""


class DtnError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DtnError, ValueError):
    pass


class InvalidArgument(ValidationError):
    pass


class MeshFormatError(ValidationError):
    """Malformed mesh file; ``lineno`` is 1-based (0 when not line specific)."""

    def __init__(self, message, lineno=0):
        self.lineno = lineno
        if lineno:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class MeshValidationError(ValidationError):
    pass


class ExpressionSyntaxError(ValidationError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class EvaluationError(ValidationError):
    pass


class EllipticityError(ValidationError):
    def __init__(self, message, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at point ({point[0]:.6g}, {point[1]:.6g})"
        super().__init__(message)


class GaugeError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NumericalError(DtnError, ArithmeticError):
    pass


class NearEigenvalueError(NumericalError):
    """The spectral parameter is (numerically) an eigenvalue of the Dirichlet pencil."""

    def __init__(self, lam, condition):
        self.lam = complex(lam)
        self.condition = float(condition)
        super().__init__(
            f"spectral parameter {self.lam} too close to an eigenvalue "
            f"(condition estimate {self.condition:.3e})"
        )


class ConvergenceError(NumericalError):
    pass


class UniqueContinuationError(NumericalError):
    pass
