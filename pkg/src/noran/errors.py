"""Exception types shared across the package."""


class NoValidPrecoderError(ValueError):
    """The channel admits no unit precoder with a nonzero projection."""


class NoNullSpaceError(ValueError):
    """The channel matrix has a trivial kernel, so orthogonal AN is impossible."""


class ConstraintViolationError(ValueError):
    """A power allocation violates one of the power-split constraints.

    ``constraint`` is one of ``"budget"``, ``"noise_nonneg"`` or
    ``"signal_nonneg"``.
    """

    def __init__(self, constraint, message):
        super().__init__(message)
        self.constraint = constraint


class NumericalFailureError(ArithmeticError):
    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (CCP iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class CodebookError(Exception):
    pass


class CodebookCollisionError(CodebookError):
    pass


class UnsupportedVersionError(CodebookError):
    pass


class CodebookFormatError(CodebookError):
    """Malformed or schema-invalid codebook file.

    ``line`` and ``column`` are set when the failure has a location in the
    source text.
    """

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigError(ValueError):
    """Configuration rejected; ``fields`` lists the offending keys."""

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)
