"""Linear operators on periodic grids.

All operators here are real and time-independent.  Two representations are
supported and kept consistent:

* a Fourier symbol, for operators diagonal in the Fourier basis
  (spectral derivatives and anything built from them by shifting,
  scaling, and composition);
* a dense matrix acting on the flattened grid values, available for every
  operator and mandatory for the two non-diagonal kinds (abstract dense
  operators and pointwise multiplication by a varying field).

Adjoints are taken in the discrete inner product with uniform quadrature
weights, where the adjoint of a real matrix is its transpose.  Each operator
declares an adjointness flag (selfadjoint, skewadjoint, or none) that can be
verified numerically on any grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .errors import GridMismatchError
from .fields import Field, PeriodicGrid

SELFADJOINT = "selfadjoint"
SKEWADJOINT = "skewadjoint"
NONE = "none"


class LinearOperator:
    """Base interface: apply to fields, expose symbol / dense matrix."""

    adjointness: str = NONE

    def apply(self, f: Field) -> Field:
        raise NotImplementedError

    def symbol(self, grid: PeriodicGrid) -> Optional[np.ndarray]:
        """Fourier multiplier (grid-shaped complex array), or None if not diagonal."""
        return None

    def matrix(self, grid: PeriodicGrid) -> np.ndarray:
        """Dense matrix on the flattened grid."""
        sym = self.symbol(grid)
        if sym is None:
            raise NotImplementedError(f"{type(self).__name__} has no dense matrix")
        return _multiplier_matrix(sym)

    def is_multiplier(self) -> bool:
        return True

    def has_varying_coefficients(self) -> bool:
        """True when the operator involves pointwise multiplication by a
        spatially varying field, which rules out exact propagation."""
        return False

    def check_grid(self, grid: PeriodicGrid) -> None:
        pass


def _multiplier_matrix(sym: np.ndarray) -> np.ndarray:
    """Dense matrix of a Fourier multiplier via FFT applied to identity columns."""
    n = sym.size
    eye = np.eye(n).reshape(sym.shape + (n,))
    axes = tuple(range(sym.ndim))
    out = np.fft.ifftn(sym[..., None] * np.fft.fftn(eye, axes=axes), axes=axes)
    return out.real.reshape(n, n)


def _apply_symbol(op: LinearOperator, f: Field) -> Field:
    sym = op.symbol(f.grid)
    out = np.fft.ifftn(sym * np.fft.fftn(f.values)).real
    return Field(f.grid, out)


@dataclass(frozen=True)
class SpectralDerivative(LinearOperator):
    """coefficient * d^order/dx_axis^order, Fourier-exact on the periodic grid.

    Odd orders are skewadjoint, even orders selfadjoint; the Nyquist mode of
    odd-order derivatives is zeroed so real fields map to real fields.
    """

    order: int = 1
    coefficient: float = 1.0
    axis: int = 0

    @property
    def adjointness(self) -> str:
        return SKEWADJOINT if self.order % 2 else SELFADJOINT

    def check_grid(self, grid: PeriodicGrid) -> None:
        if self.axis >= grid.dims:
            raise GridMismatchError(
                f"derivative along axis {self.axis} on a {grid.dims}D grid")

    def symbol(self, grid: PeriodicGrid) -> np.ndarray:
        self.check_grid(grid)
        k = grid.wavenumbers()[self.axis].copy()
        # zero the (unpaired) Nyquist mode for every order so that powers and
        # compositions of derivatives agree exactly and real fields stay real
        nyq = [slice(None)] * grid.dims
        nyq[self.axis] = grid.points[self.axis] // 2
        k[tuple(nyq)] = 0.0
        return self.coefficient * (1j * k) ** self.order

    def apply(self, f: Field) -> Field:
        return _apply_symbol(self, f)


def spectral_derivative(order: int, axis: int = 0) -> SpectralDerivative:
    return SpectralDerivative(order=order, axis=axis)


def scaled_derivative(coefficient: float, order: int, axis: int = 0) -> SpectralDerivative:
    return SpectralDerivative(order=order, coefficient=float(coefficient), axis=axis)


@dataclass(frozen=True)
class DirectionalDerivative(LinearOperator):
    """v . grad for a constant velocity vector (skewadjoint)."""

    velocity: tuple[float, ...]

    def __init__(self, velocity):
        object.__setattr__(self, "velocity", tuple(float(v) for v in np.atleast_1d(velocity)))

    adjointness = SKEWADJOINT

    def check_grid(self, grid: PeriodicGrid) -> None:
        if len(self.velocity) != grid.dims:
            raise GridMismatchError(
                f"velocity has {len(self.velocity)} components on a {grid.dims}D grid")

    def symbol(self, grid: PeriodicGrid) -> np.ndarray:
        self.check_grid(grid)
        ks = grid.wavenumbers()
        sym = np.zeros(grid.shape, dtype=complex)
        for d, v in enumerate(self.velocity):
            kd = ks[d].copy()
            nyq = [slice(None)] * grid.dims
            nyq[d] = grid.points[d] // 2
            kd[tuple(nyq)] = 0.0
            sym = sym + 1j * v * kd
        return sym

    def apply(self, f: Field) -> Field:
        return _apply_symbol(self, f)


@dataclass(frozen=True)
class ScaledIdentity(LinearOperator):
    """scale * Identity (selfadjoint)."""

    scale: float = 1.0
    adjointness = SELFADJOINT

    def symbol(self, grid: PeriodicGrid) -> np.ndarray:
        return np.full(grid.shape, self.scale, dtype=complex)

    def apply(self, f: Field) -> Field:
        return Field(f.grid, self.scale * f.values)

    def matrix(self, grid: PeriodicGrid) -> np.ndarray:
        return self.scale * np.eye(int(np.prod(grid.shape)))


class Shifted(LinearOperator):
    """base + shift * Identity; inherits the base's selfadjointness."""

    def __init__(self, base: LinearOperator, shift: float):
        self.base = base
        self.shift = float(shift)
        self.adjointness = SELFADJOINT if base.adjointness == SELFADJOINT else NONE

    def check_grid(self, grid: PeriodicGrid) -> None:
        self.base.check_grid(grid)

    def symbol(self, grid: PeriodicGrid) -> Optional[np.ndarray]:
        sym = self.base.symbol(grid)
        return None if sym is None else sym + self.shift

    def matrix(self, grid: PeriodicGrid) -> np.ndarray:
        return self.base.matrix(grid) + self.shift * np.eye(int(np.prod(grid.shape)))

    def is_multiplier(self) -> bool:
        return self.base.is_multiplier()

    def has_varying_coefficients(self) -> bool:
        return self.base.has_varying_coefficients()

    def apply(self, f: Field) -> Field:
        return Field(f.grid, self.base.apply(f).values + self.shift * f.values)


class Composed(LinearOperator):
    """parts[0] o parts[1] o ... (rightmost applied first)."""

    def __init__(self, parts: Sequence[LinearOperator], adjointness: str = NONE):
        self.parts = tuple(parts)
        if not self.parts:
            raise ValueError("composition needs at least one operator")
        self.adjointness = adjointness

    def check_grid(self, grid: PeriodicGrid) -> None:
        for p in self.parts:
            p.check_grid(grid)

    def symbol(self, grid: PeriodicGrid) -> Optional[np.ndarray]:
        syms = [p.symbol(grid) for p in self.parts]
        if any(s is None for s in syms):
            return None
        return reduce(lambda a, b: a * b, syms)

    def matrix(self, grid: PeriodicGrid) -> np.ndarray:
        mats = [p.matrix(grid) for p in self.parts]
        return reduce(lambda a, b: a @ b, mats)

    def is_multiplier(self) -> bool:
        return all(p.is_multiplier() for p in self.parts)

    def has_varying_coefficients(self) -> bool:
        return any(p.has_varying_coefficients() for p in self.parts)

    def apply(self, f: Field) -> Field:
        out = f
        for p in reversed(self.parts):
            out = p.apply(out)
        return out


class DenseOperator(LinearOperator):
    """Abstract operator given by an explicit matrix on the flattened grid.

    Used for "arbitrary selfadjoint operator" configurations where no
    differential structure is assumed; still a constant (time- and
    state-independent) generator, so matrix-exponential propagation is exact.
    """

    def __init__(self, matrix: np.ndarray, adjointness: str = NONE):
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"dense operator needs a square matrix, got {mat.shape}")
        self._matrix = mat
        self.adjointness = adjointness

    def check_grid(self, grid: PeriodicGrid) -> None:
        if int(np.prod(grid.shape)) != self._matrix.shape[0]:
            raise GridMismatchError(
                f"dense matrix of size {self._matrix.shape[0]} on grid {grid.shape}")

    def symbol(self, grid: PeriodicGrid) -> None:
        return None

    def matrix(self, grid: PeriodicGrid) -> np.ndarray:
        self.check_grid(grid)
        return self._matrix

    def matrix_raw(self) -> np.ndarray:
        return self._matrix

    def is_multiplier(self) -> bool:
        return False

    def apply(self, f: Field) -> Field:
        self.check_grid(f.grid)
        out = self._matrix @ f.values.ravel()
        return Field(f.grid, out.reshape(f.grid.shape))


class FieldMultiplier(LinearOperator):
    """Pointwise multiplication by a fixed field (selfadjoint).

    A spatially varying multiplier makes the host system
    variable-coefficient, so exact Fourier propagation refuses it.
    """

    adjointness = SELFADJOINT

    def __init__(self, weight: Field):
        self.weight = weight

    def check_grid(self, grid: PeriodicGrid) -> None:
        if grid != self.weight.grid:
            raise GridMismatchError("multiplier weight lives on a different grid")

    def symbol(self, grid: PeriodicGrid) -> Optional[np.ndarray]:
        if self.has_varying_coefficients():
            return None
        self.check_grid(grid)
        return np.full(grid.shape, self.weight.values.flat[0], dtype=complex)

    def matrix(self, grid: PeriodicGrid) -> np.ndarray:
        self.check_grid(grid)
        return np.diag(self.weight.values.ravel())

    def is_multiplier(self) -> bool:
        return not self.has_varying_coefficients()

    def has_varying_coefficients(self) -> bool:
        w = self.weight.values
        return bool(np.max(np.abs(w - w.flat[0])) > 0.0)

    def apply(self, f: Field) -> Field:
        self.check_grid(f.grid)
        return Field(f.grid, self.weight.values * f.values)


def scaled(op: LinearOperator, factor: float) -> LinearOperator:
    """factor * op, preserving self/skew adjointness of the base."""
    factor = float(factor)
    if isinstance(op, SpectralDerivative):
        return SpectralDerivative(op.order, op.coefficient * factor, op.axis)
    if isinstance(op, ScaledIdentity):
        return ScaledIdentity(op.scale * factor)
    if isinstance(op, DenseOperator):
        return DenseOperator(factor * op.matrix_raw(), adjointness=op.adjointness)
    if isinstance(op, FieldMultiplier):
        return FieldMultiplier(factor * op.weight)
    return Composed([ScaledIdentity(factor), op], adjointness=op.adjointness)


def composed_power(op: LinearOperator, n: int) -> LinearOperator:
    """op composed with itself n times (n = 0 gives the identity)."""
    if n == 0:
        return ScaledIdentity(1.0)
    adj = op.adjointness
    if adj == SKEWADJOINT:
        result_adj = SELFADJOINT if n % 2 == 0 else SKEWADJOINT
    elif adj == SELFADJOINT:
        result_adj = SELFADJOINT
    else:
        result_adj = NONE
    return Composed([op] * n, adjointness=result_adj)


def apply_operator(op: LinearOperator, f: Field) -> Field:
    """Apply an operator to a field (grid compatibility checked)."""
    op.check_grid(f.grid)
    return op.apply(f)


def adjoint_defect(op: LinearOperator, grid: PeriodicGrid) -> float:
    """Relative defect of the declared adjointness flag on this grid.

    Returns ||O -+ O^T||_F / ||O||_F (minus for selfadjoint, plus for
    skewadjoint); raises ValueError if the operator declares no flag.
    """
    mat = op.matrix(grid)
    scale = np.linalg.norm(mat)
    if scale == 0.0:
        return 0.0
    if op.adjointness == SELFADJOINT:
        return float(np.linalg.norm(mat - mat.T) / scale)
    if op.adjointness == SKEWADJOINT:
        return float(np.linalg.norm(mat + mat.T) / scale)
    raise ValueError("operator declares no adjointness flag")


def verify_adjointness(op: LinearOperator, grid: PeriodicGrid, tol: float = 1e-12) -> None:
    defect = adjoint_defect(op, grid)
    if defect > tol:
        raise ValueError(
            f"declared {op.adjointness} flag fails numerically: defect {defect:.3e}")
