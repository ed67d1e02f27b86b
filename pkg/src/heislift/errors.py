"""Exception types shared across the package."""


class HeisliftError(ValueError):
    """Base class for all argument / precondition failures."""


class DomainError(HeisliftError):
    """Input outside the operation's domain (non-finite, wrong shape, bad range)."""


class OnCurveError(DomainError):
    """Query point lies on (or within snapping tolerance of) the curve."""


class MarginError(DomainError):
    """Query point too close to a sampled boundary image for a safe degree."""


class PreconditionError(DomainError):
    """A documented operation precondition does not hold for these inputs."""


class UnsupportedOrderError(DomainError):
    """Holder order outside the range the operation is valid for."""
