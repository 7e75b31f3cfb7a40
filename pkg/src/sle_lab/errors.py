"""Exception hierarchy shared by all sle_lab modules."""


class SleLabError(Exception):
    """Base class for every error raised by this package."""


class PointSwallowed(SleLabError):
    """A point being evolved hit (or came within tolerance of) the hull."""


class CurveNotSimple(SleLabError):
    """A polyline handed to the zipper backtracked into its own hull."""


class NotACrosscutStart(SleLabError):
    """A polyline meant to start on the real axis does not."""


class StepTooLarge(SleLabError):
    """Time step exceeds the stability guard for the requested geometry."""


class NeverExits(SleLabError):
    """A path ended before leaving the hull it was supposed to exit."""


class NeverAbsorbed(SleLabError):
    """A radial path exhausted its step budget without hitting zero."""


class DomainCollision(SleLabError):
    """Two chains assumed disjoint touched during an ensemble computation."""


class NonPositiveGap(SleLabError):
    """The gap between the two image points degenerated to <= 0."""


class OutsideDomain(SleLabError):
    """A weight evaluation was requested outside the defined region."""


class InsufficientSamples(SleLabError):
    """Too many Monte Carlo replicas were rejected to trust the estimate."""


class KappaOutOfRange(SleLabError, ValueError):
    """kappa violates the precondition of the requested experiment."""


class ConfigError(SleLabError, ValueError):
    """Malformed run configuration (unknown key, bad type, bad value)."""
