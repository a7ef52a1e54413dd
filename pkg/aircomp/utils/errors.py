"""Exception types raised across the package"""


class DomainError(ValueError):
    """Argument lies outside the mathematical domain of an operation"""


class DimensionError(ValueError):
    """Array shapes are inconsistent with each other or with a config"""


class StructureError(ValueError):
    """A structural precondition (symmetry, definiteness, ...) failed"""


class UnsupportedFrameError(ValueError):
    """No builtin frame exists for the requested shape"""


class LineSearchStalled(RuntimeError):
    """No step on the backtracking ladder satisfied the Armijo criterion"""
