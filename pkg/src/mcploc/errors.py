"""Exception types shared across the package."""


class McplocError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(McplocError):
    """Invalid or inconsistent configuration (bad flags, mismatched sizes)."""


class ScoreError(McplocError):
    """Score evaluation failed; carries the location when known.

    ``t``, ``r`` and ``j`` are 1-based indices into the candidate split,
    the rank step and the scored point, any of which may be None.
    """

    def __init__(self, message, t=None, r=None, j=None):
        self.t = t
        self.r = r
        self.j = j
        loc = ", ".join(
            f"{k}={v}" for k, v in (("t", t), ("r", r), ("j", j)) if v is not None
        )
        super().__init__(f"{message} [{loc}]" if loc else message)


class DegenerateDataError(McplocError):
    """Data carries no usable signal (e.g. all points identical)."""


class IsolationError(McplocError):
    """A changepoint isolation window is too short to analyze."""
