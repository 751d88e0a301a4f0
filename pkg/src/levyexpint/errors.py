"""Exception types shared across the package."""


class UnsupportedError(ValueError):
    """Requested operation has no closed form / implementation for this input."""


class TruncationError(RuntimeError):
    """Series truncation would need more terms than the policy allows.

    Attributes
    ----------
    achieved_bound : float
        Bias bound reached with the maximal number of terms.
    """

    def __init__(self, message, achieved_bound):
        super().__init__(message)
        self.achieved_bound = achieved_bound


class NotConvergentError(RuntimeError):
    """Simulation refused because the convergence check did not return Converges."""

    def __init__(self, verdict):
        super().__init__(f"model not certified convergent: {verdict.outcome.value} ({verdict.reason})")
        self.verdict = verdict
