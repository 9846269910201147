"""Error taxonomy.

Every failure mode named by the public operation contracts maps to one of
these classes so callers (and the CLI exit-code table) can dispatch on type.
"""


class HadwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(HadwaveError):
    """Malformed or incomplete run configuration (CLI exit code 2)."""


class OutOfChart(HadwaveError):
    """A point lies outside the declared chart box."""


class StencilOutOfChart(OutOfChart):
    """A finite-difference stencil would leave the chart box."""


class SignatureError(HadwaveError):
    """Metric eigenvalues do not realize the (+,-,...,-) signature."""


class StepFailure(HadwaveError):
    """An adaptive integrator underflowed its step size."""


class NoConvergence(HadwaveError):
    """An iterative solve (shooting, Newton, extrapolation) failed."""


class ConjugatePointSuspected(NoConvergence):
    """Shooting Jacobian is near-singular; endpoint may be conjugate."""


class ZeroCovector(HadwaveError):
    """A covector argument that must be nonzero is zero."""


class NonNullInput(HadwaveError):
    """A covector required to be null (and oriented) is not."""


class UnsupportedDimension(HadwaveError):
    """Requested dimension outside the implemented range."""


class FanTooNarrow(HadwaveError):
    """Transverse stencil of a geodesic fan leaves the chart."""


class BadParity(HadwaveError):
    """Series branch requested for the wrong parity of the dimension."""


class BranchCutHit(HadwaveError):
    """Kernel argument landed exactly on the branch cut."""


class NonConvergent(HadwaveError):
    """An epsilon or lambda sequence failed its Cauchy criterion."""


class GridTooCoarse(HadwaveError):
    """Sample grid cannot support the requested stencil or window."""


class WindowClipped(GridTooCoarse):
    """Estimator window exceeds the sample grid."""


class NeedsDerivatives(HadwaveError):
    """Descent requested for a probe lacking derivative data."""


class NonNullSeed(NonNullInput):
    """A singularity-set seed covector is not past-null."""


class EmptyPrediction(HadwaveError):
    """A verdict was requested against an empty predicted set."""


class SupportEscape(HadwaveError):
    """Dilated section support would leave the chart image."""
