"""Exception types shared across the library."""


class DecoptError(Exception):
    """Base class for all decopt errors."""


class TopologyError(DecoptError, ValueError):
    """Invalid graph construction, or a graph unfit for the requested mixing rule."""


class ConfigError(DecoptError, ValueError):
    """Inconsistent or incomplete configuration."""


class NumericalError(DecoptError, RuntimeError):
    """Non-finite state or numerical blow-up during a run.

    Carries the iteration index at which the problem was detected.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration

    def __reduce__(self):
        return type(self), (self.args[0], self.iteration)


class InvariantViolation(NumericalError):
    """A per-step runtime invariant failed while checking was enabled."""

    def __init__(self, invariant, algorithm, iteration, slack):
        super().__init__(
            f"invariant '{invariant}' violated by {algorithm} at iteration "
            f"{iteration} (slack {slack:.3e})",
            iteration=iteration,
        )
        self.invariant = invariant
        self.algorithm = algorithm
        self.slack = slack

    def __reduce__(self):
        return type(self), (self.invariant, self.algorithm, self.iteration, self.slack)
