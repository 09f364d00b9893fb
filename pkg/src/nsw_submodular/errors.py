"""Exception types shared across the package."""


class NSWError(Exception):
    """Base class for all errors raised by this package."""


class InstanceFormatError(NSWError, ValueError):
    """Malformed oracle parameters or instance file."""


class PropertyViolation(InstanceFormatError):
    """An explicit valuation table is not monotone submodular."""


class SupportTooLarge(NSWError):
    """Exact multilinear evaluation would need an enumeration that is too large."""


class SizeLimitExceeded(NSWError):
    """Brute-force enumeration exceeds the configured budget."""


class InvariantViolation(NSWError, RuntimeError):
    """An internal invariant failed; usually means estimator collapse.

    ``partial`` carries whatever partial result was available (a trace or a
    report dict) when the failure happened.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
