"""Exceptions shared across modules."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ShapeError(ValueError):
    """Tensor dimensions do not line up."""


class FormatError(ValueError):
    """Malformed binary dataset file; the message names the byte offset
    where parsing failed."""
