"""Exception hierarchy shared across the package."""


class KappafitError(Exception):
    """Base class for all package errors."""


class ConfigError(KappafitError):
    """Invalid strategy/fitness/run configuration."""


class DataError(KappafitError):
    """Input file missing, malformed, or referencing unknown specimens."""


class ChainInfeasibleError(KappafitError):
    """The stress/strain substitution chain has no real solution at this point.

    Raised for concrete crushing (sigma2 > f2max), negative radicands and
    non-finite intermediates. Callers treat it as "no solution here", never
    as a fatal error.
    """


class EpsMaxError(KappafitError):
    """Apparent-yield-strain fixed point diverged or left the physical range."""


class CandidateRejected(KappafitError):
    """Search point cannot be decoded into a usable degradation model."""
