"""Exception types raised by the simulation modules."""


class BihjError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BihjError):
    """Invalid scenario configuration; message lists every violated constraint."""


class PreconditionError(BihjError):
    """An operation was called with arguments violating its contract."""


class UnsupportedAnalyticError(BihjError):
    """No closed form is available for the requested initial state."""


class BoundaryBreachError(BihjError):
    """Density reached the grid boundary during propagation."""

    def __init__(self, time, ratio):
        self.time = time
        self.ratio = ratio
        super().__init__(
            f"boundary density ratio {ratio:.3e} exceeded tolerance at t={time:.6g}; "
            "enlarge the spatial domain"
        )


class InstabilityError(BihjError):
    """Non-finite values appeared during propagation."""


class DegenerateStateError(BihjError):
    """Every grid point is below the density threshold."""


class UnwrapError(BihjError):
    """Phase jump between adjacent valid points is too large to unwrap."""


class DomainError(BihjError):
    """A sampled field was queried outside its valid region."""

    def __init__(self, x, t, message=None):
        self.x = x
        self.t = t
        super().__init__(message or f"query at (x={x:.6g}, t={t:.6g}) is outside the valid region")


class TrajectoryExitError(BihjError):
    """A trajectory left the valid region of its driving field."""

    def __init__(self, label, time):
        self.label = label
        self.time = time
        super().__init__(f"trajectory with label {label:.6g} left the valid region at t={time:.6g}")


class FocalPointError(BihjError):
    """A non-positive expansion factor was detected (focal point)."""


class CongruenceCrossingError(BihjError):
    """Trajectory positions are no longer monotone in the label (paths crossed)."""


class HullOverlapError(BihjError):
    """The two congruences no longer overlap enough to evaluate coupling terms."""


class ExtrapolationError(BihjError):
    """A query point lies outside the congruence hull."""


class SpanExhaustionError(BihjError):
    """A label-generator curve left the label span of the host congruence."""
