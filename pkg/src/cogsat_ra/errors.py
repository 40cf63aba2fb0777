"""Exception types shared across the package."""


class CogSatError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(CogSatError, ValueError):
    """A configuration value or dimension violates a precondition."""


class InvalidInputError(CogSatError, ValueError):
    """Array shapes or numeric inputs are inconsistent."""


class CoincidentNodesError(CogSatError):
    """An SU sits exactly on a PU, so the path-loss gain is singular.

    Raised as a regeneration signal: callers redraw the scenario.
    """


class OracleSizeError(CogSatError, ValueError):
    """Instance exceeds the exhaustive oracle's cost guard."""
