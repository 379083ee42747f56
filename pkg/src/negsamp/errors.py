"""Exception taxonomy.

Contract violations (bad shapes, bad probabilities) and configuration mistakes
are distinct from numerical failures so the CLI can map them to different exit
codes.
"""


class NegsampError(Exception):
    """Base class for every error raised by this package."""


class ContractError(NegsampError):
    """An argument violates a documented precondition (shape, range, dtype)."""


class UnsupportedOperationError(NegsampError):
    """The operation is not defined for this model kind."""


class ConfigError(NegsampError):
    """A plan or run configuration is invalid or incomplete."""


class DataFormatError(NegsampError):
    """A file could not be parsed; the message carries path and line number."""


class DegenerateInputError(NegsampError):
    """Input is structurally unusable (empty class, all-zero scores)."""


class EstimabilityError(NegsampError):
    """The fit cannot identify the parameters (single class, rank deficiency)."""


class SeparationError(NegsampError):
    """The likelihood is maximized at infinity (complete separation guard)."""


class FitError(NegsampError):
    """A required fit failed outright."""


class ConditioningError(NegsampError):
    """A plug-in matrix is numerically singular."""
