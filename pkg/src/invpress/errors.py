"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class InvPressError(Exception):
    exit_code = 5


class InputError(InvPressError, ValueError):
    """Malformed input: wrong shapes, non-finite entries, bad files."""

    exit_code = 2


class HypothesisError(InvPressError):
    """A mathematical precondition of an operation does not hold.

    ``reason`` is a short machine-readable tag, e.g. ``"non_hyperbolic"``.
    """

    exit_code = 3

    def __init__(self, reason, message=None):
        self.reason = reason
        super().__init__(message or reason)


class InfeasibleError(InvPressError):
    """Some grid point is covered by no control of the discretized problem."""

    exit_code = 4

    def __init__(self, message, uncovered=()):
        self.uncovered = tuple(uncovered)
        super().__init__(message)


class InvariantError(InvPressError):
    """An internal invariant was violated (a bug or a numerical breakdown)."""

    exit_code = 5


class NumericsError(InvariantError):
    pass
