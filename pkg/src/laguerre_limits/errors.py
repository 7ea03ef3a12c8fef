"""Exception types shared across the package."""


class LaguerreError(Exception):
    """Base class for all package errors."""


class CoincidentSites(LaguerreError):
    """Two weighted points share a spatial location; no radical line exists."""


class DegenerateSites(LaguerreError):
    """Spatial coordinates are (numerically) collinear."""


class DegenerateConfiguration(LaguerreError):
    """A configuration cannot be triangulated (too few or all collinear points)."""


class NearTieWarning(UserWarning):
    """A power-circle certificate was resolved by id-order tie-breaking."""


class DivergentIntegral(LaguerreError):
    """A fractional integral does not converge for the requested arguments."""


class ZeroMass(LaguerreError):
    """A density has zero mass where a positive mass is required."""


class InfiniteMass(LaguerreError):
    """A Poisson intensity has infinite mass on the requested region."""


class InvalidDensity(LaguerreError, ValueError):
    """Density parameters violate the family's constraints."""


class ScheduleStall(LaguerreError):
    """No index up to ``n_max`` reaches the requested defect target."""


class EmptyConfiguration(LaguerreError):
    """An event was evaluated on a configuration without points."""


class OutOfRange(LaguerreError, ValueError):
    """Parameters lie outside the validity range of an analytic bound."""


class RegionMismatch(LaguerreError):
    """Two skeletons were restricted to different regions."""


class UncertifiedWindow(UserWarning):
    """Stabilization certificates failed in too many replicates."""
