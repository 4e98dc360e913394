class InvalidArgument(ValueError):
    """A parameter is outside its documented domain."""


class InsufficientData(ValueError):
    """Too few events or too short a window to form an estimate."""
