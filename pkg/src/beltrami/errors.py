"""Exception hierarchy shared by the solver stack."""


class BeltramiError(Exception):
    """Base class for all library errors."""


class GridSpecError(BeltramiError, ValueError):
    """Invalid grid geometry."""


class SpecMismatchError(BeltramiError, ValueError):
    """Two grids (or a grid and an operator table) disagree on geometry."""


class EllipticityError(BeltramiError, ValueError):
    """A structure function or coefficient pair violates k < 1 ellipticity."""


class NonConvergenceError(BeltramiError, RuntimeError):
    """Fixed-point iteration hit its iteration cap.

    Attributes
    ----------
    iterations : int
    last_ratio : float
        Last measured contraction ratio of successive iterate distances.
    last_distance : float
    """

    def __init__(self, message, iterations=0, last_ratio=float("nan"), last_distance=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.last_ratio = last_ratio
        self.last_distance = last_distance


class NewtonStallError(BeltramiError, RuntimeError):
    """Newton iteration on a 2x2 real system stalled or met a singular Jacobian."""

    def __init__(self, message, w=None):
        super().__init__(message)
        self.w = w


class DegenerateWronskianError(BeltramiError, ValueError):
    """The null-Lagrangian denominator vanished at some grid samples."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = list(points)


class OutsideChartError(BeltramiError, ValueError):
    """Requested gradient value lies outside the region covered by a chart."""


class ConfigError(BeltramiError, ValueError):
    """Malformed command-line or file configuration."""
