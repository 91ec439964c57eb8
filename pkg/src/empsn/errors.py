class InvalidInputError(ValueError):
    pass


class DegenerateGeometryError(ArithmeticError):
    """Raised when a face or simplex spans fewer dimensions than it should."""


class InvalidAdjacencyError(ValueError):
    pass


class UsageError(RuntimeError):
    """An API was called in the wrong order or on the wrong kind of object."""
