"""Exception types shared across the package."""


class QuantaError(Exception):
    """Base class for all package errors."""


class DomainError(QuantaError):
    """An input value is outside the mathematically valid domain."""


class UnidentifiableError(DomainError):
    """Bit density at or below the read-noise floor: no finite exposure fits."""


class ShapeError(QuantaError):
    """Mismatched dimensions between paired objects."""


class DecodeError(QuantaError):
    """Malformed binary file.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IntegrationError(QuantaError):
    """ODE step-count cap exceeded; ``last_theta`` is the last accepted point."""

    def __init__(self, message, last_theta):
        super().__init__(f"{message} (last accepted theta_tilde = {last_theta})")
        self.last_theta = last_theta
