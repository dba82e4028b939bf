"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class AdequacyError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AdequacyError):
    """Invalid configuration: bad flag combination, missing seed, bad paths."""


class DataError(AdequacyError):
    """Malformed or inconsistent input data (CSV rows, gaps, duplicates)."""


class NumericalError(AdequacyError):
    """Numerical failure: non-convergence, degenerate sample, support violation."""
