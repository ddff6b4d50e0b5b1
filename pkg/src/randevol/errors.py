"""Exception types shared across the package."""


class RandevolError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(RandevolError):
    """Operands live on incompatible grids or have wrong shapes."""


class UnsupportedSystemError(RandevolError):
    """Generator has spatially varying coefficients; use rk4_propagate."""


class InstabilityError(RandevolError):
    """Time stepping produced non-finite values."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class RescaleOverflowError(RandevolError):
    """Requested exponential factor would overflow double precision."""


class StructureError(RandevolError):
    """Matrix fails the skew-symmetry required of a Hamiltonian structure."""


class UnsupportedDensityError(RandevolError):
    """Density is not one of the registered quadratic forms."""


class NotRescalableError(RandevolError):
    """Spatially varying jump intensity admits no exponential rescaling."""


class LatticeMismatchError(RandevolError):
    """Velocity times step is not a whole number of lattice sites."""


class ModelError(RandevolError):
    """Model parameters violate a structural constraint."""
