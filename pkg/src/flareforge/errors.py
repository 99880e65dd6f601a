"""Exception types shared across the package."""


class FlareForgeError(Exception):
    """Base class for all errors raised by flareforge."""


class InvalidArgument(FlareForgeError, ValueError):
    pass


class DegenerateInput(FlareForgeError, ValueError):
    """Input is well-formed but carries no usable signal (empty mask, zero aperture)."""


class NumericDegenerate(FlareForgeError, ArithmeticError):
    """A computation hit a singular or zero quantity it cannot divide by."""


class FlowFormatError(FlareForgeError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
