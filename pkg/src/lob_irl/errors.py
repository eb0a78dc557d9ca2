"""Exception types shared across the package.

Argument and validation problems raise plain ValueError (or the subclasses
below when callers need to tell the cases apart). Numerical breakdowns get
their own RuntimeError subclass so optimizers can surface diagnostics without
masking genuine bugs.
"""


class NumericalError(RuntimeError):
    """A numerical routine failed beyond recovery (e.g. Cholesky after the
    full jitter schedule, or a non-finite objective during fitting)."""


class DemoFormatError(ValueError):
    """A demonstration file is malformed or truncated."""


class DemoCompatibilityError(ValueError):
    """A demonstration file was produced under a different environment
    configuration than the one it is being used with."""


class ConfigValidationError(ValueError):
    """An experiment configuration violates an invariant; the message names
    the offending field."""


class ConfigParseError(ValueError):
    """An experiment configuration file is not valid JSON; the message carries
    the line and column of the failure."""
