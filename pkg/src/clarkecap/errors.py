"""Exception types shared across the package.

Every failure mode that callers are expected to catch has its own class;
plain ValueError is reserved for programming errors (bad shapes, bad enum
values) that indicate a bug in the caller rather than a numerical event.
"""


class ClarkecapError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(ClarkecapError):
    """Point or matrix dimension does not match the body's 2n."""


class SingularMatrix(ClarkecapError):
    """A transform matrix is numerically singular."""


class OriginNotInterior(ClarkecapError):
    """A transformed body would not contain the origin in its interior."""


class NewtonDivergence(ClarkecapError):
    """Damped Newton failed to reach tolerance within the iteration budget."""


class GridTooCoarse(ClarkecapError):
    """Synthesis grid violates the anti-aliasing requirement grid >= 4*l_max."""


class EtaInSpectrum(ClarkecapError):
    """Requested slope at infinity is too close to a detected action value."""


class InfeasibleConditions(ClarkecapError):
    """No admissible profile found; carries the failing condition report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BracketFailure(ClarkecapError):
    """The scalar equation for the smoothed conjugate left its bracket."""


class NonpositiveAction(ClarkecapError):
    """Ratio functional evaluated outside the positive-action cone."""


class ThresholdViolated(ClarkecapError):
    """Saddle-point reduction requested below the convexity threshold."""


class NoConvergence(ClarkecapError):
    """An inner minimization did not converge."""


class AsymmetryTooLarge(ClarkecapError):
    """Assembled Hessian is too asymmetric; the reduction is unresolved."""


class SeedNonpositiveAction(ClarkecapError):
    """Solver seed has nonpositive action."""


class CollapsedToZero(ClarkecapError):
    """Free-route iterate collapsed to the trivial critical point."""


class ValueOutOfBand(ClarkecapError):
    """Free-route critical value violates the (eps, eta) band."""


class DegenerateCircle(ClarkecapError):
    """Critical circle has nullity > 1; index must come from an oracle."""


class MissingIndexData(ClarkecapError):
    """Capacity assembly requested but circles carry no index labels."""


class OddIndexPresent(ClarkecapError):
    """A transverse index with odd parity was passed to capacity assembly."""


class InsufficientCapacities(ClarkecapError):
    """Not enough capacity values to run a Besse/Zoll test."""
