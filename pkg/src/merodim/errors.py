"""Exception taxonomy shared by all modules.

Exit-code mapping used by the CLI: ValidationError -> 2,
NumericalError -> 3, OSError -> 4.
"""


class ValidationError(ValueError):
    """Input rejected before any computation (bad argument, bad config)."""


class NumericalError(RuntimeError):
    """Computation ran but produced an unusable result (non-monotone
    classification, insufficient data for a fit, overflow where a finite
    value was required)."""
