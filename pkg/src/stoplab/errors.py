"""Exception hierarchy shared across the package."""


class StoplabError(Exception):
    """Base class for all package-specific errors."""


class OutOfRange(StoplabError):
    """Evaluation requested outside the supported domain."""


class OutOfDomain(StoplabError):
    """Payoff evaluated at a non-positive state."""


class GridTooCoarse(StoplabError):
    """A grid does not meet the resolution required by the operation."""


class NonFinite(StoplabError):
    """A simulated sample overflowed (drift violates linear growth)."""


class InvalidThreshold(StoplabError):
    """A stopping policy emitted a threshold outside [y1, zeta]."""


class EmptyWindow(StoplabError):
    """No grid point falls inside the search window [y1, zeta]."""


class BadParameters(StoplabError):
    """Parameter constraints of a construction are violated."""


class NegativeRegret(StoplabError):
    """Simple regret negative beyond grid tolerance."""


class DegenerateDesign(StoplabError):
    """Regression design is rank-deficient or otherwise unusable."""


class TooFewRecords(StoplabError):
    """Not enough replications for the requested empirical check."""


class EmptyInput(StoplabError):
    """An operation received an empty record set."""


class ConfigError(StoplabError):
    """Config file fails schema validation."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
