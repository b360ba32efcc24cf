"""Exception types shared across the toolkit.

Invalid arguments (bad shapes, out-of-range parameters, malformed input
files) raise plain ``ValueError``; the classes below mark failures of the
numerical machinery itself.
"""


class UvcError(Exception):
    """Base class for toolkit-specific failures."""


class NoDesignError(UvcError):
    """No feasible controller exists for the requested problem data.

    ``report`` carries whatever diagnostic object was available at the
    failure site (an `SdpSolution`, or a per-mu grid report).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IllConditionedError(UvcError):
    """A matrix inversion exceeded the configured condition-number cap."""


class NumericalFailureError(UvcError):
    """An iteration produced non-finite or otherwise unusable numbers."""
