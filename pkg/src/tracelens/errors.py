"""Exception types shared across the package."""


class TraceLensError(Exception):
    """Base class for all package-specific errors."""


class FitError(TraceLensError):
    """A distribution fit could not be computed (pathological data)."""


class DegenerateDataError(TraceLensError, ValueError):
    """Input has no exploitable structure (e.g. all points identical)."""


class ContractError(TraceLensError, RuntimeError):
    """An internal invariant was violated; indicates a bug, not bad input."""


class SpecError(TraceLensError, ValueError):
    """A synthesis spec failed validation; carries the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
