"""Exception hierarchy.

Refusal errors (ConditionUnverified, EarlyExitPossible, AssumptionViolated,
Unclassified) mean the library declines to assert optimality for the given
inputs; they map to CLI exit code 2.  Hard errors (ConfigurationError,
NumericsError) map to exit code 1.
"""


class StakeoptError(Exception):
    """Base class for all library errors."""


class ConditionUnverified(StakeoptError):
    """A sufficient optimality condition failed at some time point."""

    def __init__(self, message, failing_time=None):
        super().__init__(message)
        self.failing_time = failing_time


class EarlyExitPossible(StakeoptError):
    """The capacity condition fails: the state could hit 0 or N(t) before T."""


class AssumptionViolated(StakeoptError):
    """A standing assumption of a classification (e.g. monotonicity) fails."""


class Unclassified(StakeoptError):
    """Inputs fall in a gap not covered by any proven case."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigurationError(StakeoptError):
    """Invalid configuration: bad field values, mismatched variants, caps."""


class NumericsError(StakeoptError):
    """Non-finite values or solver breakdown; carries the failing time."""

    def __init__(self, message, failing_time=None):
        super().__init__(message)
        self.failing_time = failing_time


# Errors that signal a refusal to classify rather than a malfunction.
REFUSAL_ERRORS = (ConditionUnverified, EarlyExitPossible, AssumptionViolated, Unclassified)
