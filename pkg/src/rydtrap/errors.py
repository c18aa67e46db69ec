"""Exception hierarchy shared across the package."""


class RydtrapError(Exception):
    """Base class for all package errors."""


class GeometryError(RydtrapError):
    """Invalid electrode geometry (overlap, out of bounds, bad mesh)."""


class SolverError(RydtrapError):
    """Elliptic solve failed to converge; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CalibrationError(RydtrapError):
    """Degenerate basis made the eta calibration singular."""


class OutOfDomainError(RydtrapError):
    """Field requested outside the solved mesh domain."""


class FieldRangeError(RydtrapError):
    """Electric field outside a model's validity range."""


class LevelTrackingError(RydtrapError):
    """Eigenvector continuation became ambiguous (overlap < 0.5)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class BasisError(RydtrapError):
    """Dressing basis too small to contain the required levels."""


class OptimizationError(RydtrapError):
    """Dressing optimizer found no feasible flattening in the search box."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class UnstableTrapError(RydtrapError):
    """Test trajectory unbounded; no confinement for these drives."""


class IntegratorError(RydtrapError):
    """Adaptive step-size underflow or other ODE failure."""


class DiagnosticError(RydtrapError):
    """Statistical result inconsistent beyond noise (e.g. non-monotone retention)."""


class EmptyEnsembleError(RydtrapError):
    """All trajectories lost; no surviving atoms to average."""


class ConfigError(RydtrapError):
    """Config document rejected; message carries the offending key path."""
