"""Exception and warning types raised across the package."""


class KoiterDGError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(KoiterDGError, ValueError):
    """Invalid study configuration."""


class DegenerateChart(KoiterDGError, ValueError):
    """The chart is not regular at a queried point."""


class InsufficientSmoothness(KoiterDGError, ArithmeticError):
    """Finite-difference derivatives failed to settle under Richardson extrapolation."""


class MeshError(KoiterDGError, ValueError):
    """Malformed mesh input."""


class NonconformingMesh(MeshError):
    """Hanging node or an edge shared by more than two triangles."""


class UnmarkedBoundary(MeshError):
    """A boundary edge carries no D/S/F marker."""


class DuplicateTriangle(MeshError):
    """The same vertex triple appears twice."""


class UnsupportedDegree(KoiterDGError, ValueError):
    """Requested quadrature degree is outside the supported range."""


class SingularMomentMatrix(KoiterDGError, ArithmeticError):
    """A local moment or Gram system is numerically singular."""


class SingularSystem(KoiterDGError, ArithmeticError):
    """Sparse factorization of the saddle-point system broke down."""


class NoConvergence(KoiterDGError, ArithmeticError):
    """An iterative eigenvalue computation hit its iteration cap."""


class DifferentiationToleranceExceeded(KoiterDGError, ArithmeticError):
    """A manufactured case failed its strong-form self-check."""


class CoercivityWarning(UserWarning):
    """The penalty did not make the form coercive on the discrete space."""
