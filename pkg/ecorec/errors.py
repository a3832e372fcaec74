"""
Exceptions raised by the ecorec package.

Solver outcomes such as an infeasible or unbounded LP are reported through status values, not exceptions; the classes
here are for callers that cannot continue.
"""


class EcorecError(Exception):
    pass


class InputError(EcorecError, ValueError):
    """Invalid arguments, malformed input files or configuration."""
    pass


class LimitExceededError(InputError):
    """An enumeration would exceed its configured cap."""
    pass


class InfeasibleError(EcorecError):
    """A provider set cannot be kept viable, proven before any LP is solved."""
    pass


class SolverError(EcorecError, RuntimeError):
    """The LP core failed numerically where an optimum was required."""
    pass
