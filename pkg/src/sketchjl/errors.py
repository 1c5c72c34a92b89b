"""Exception hierarchy shared by every module."""


class SketchJLError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(SketchJLError, ValueError):
    pass


class UnsupportedParametersError(SketchJLError, ValueError):
    pass


class InvalidSeedError(SketchJLError, ValueError):
    pass


class OutOfDomainError(SketchJLError, IndexError):
    """An evaluation point lies outside the family's domain.

    ``position`` is the offending index within a batch, or ``None`` for a
    single-point evaluation.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class WrongRangeError(SketchJLError, ValueError):
    pass


class ShapeError(SketchJLError, ValueError):
    pass


class DomainOverflowError(SketchJLError, ValueError):
    pass


class CapacityError(SketchJLError, ValueError):
    pass


class InvalidInputError(SketchJLError, ValueError):
    pass
