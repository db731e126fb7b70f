"""Exception hierarchy shared by all modules.

Every error raised on bad physics or bad numbers derives from
:class:`DomainError`; malformed input documents derive from
:class:`InputError`. The CLI maps the two families to exit codes 3 and 2.
"""


class DomainError(ValueError):
    """A value lies outside the range where the model is defined."""


class AboveThresholdError(DomainError):
    """Pump power at or above the OPA oscillation threshold."""


class NonPhysicalTraceError(DomainError):
    """Measured or vacuum power does not exceed the dark-noise level."""


class InstabilityError(DomainError):
    """Resonator has no stable Gaussian eigenmode."""

    def __init__(self, message, stability):
        super().__init__(message)
        self.stability = stability


class IllConditionedError(DomainError):
    """Dataset cannot constrain the requested fit parameters."""


class InputError(ValueError):
    """Malformed configuration, layout or data file."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class LayoutError(InputError):
    """Cavity element list is not a valid standing-wave resonator."""
