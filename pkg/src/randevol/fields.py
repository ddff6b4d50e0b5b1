"""Periodic grids and real fields sampled on them.

Everything downstream (spectral operators, propagators, conserved-density
bookkeeping) works with `Field` values on a `PeriodicGrid`.  Grids are 1D or
2D, uniform, and periodic, so the image of the spectral derivative is exactly
the set of zero-mean fields and integrals of derivatives vanish to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GridMismatchError, RescaleOverflowError


def _as_tuple(value, dims: int, cast) -> tuple:
    if np.isscalar(value):
        return tuple(cast(value) for _ in range(dims))
    out = tuple(cast(v) for v in value)
    if len(out) != dims:
        raise ValueError(f"expected {dims} per-dimension entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on [0, L_s) per dimension.

    points: grid points per dimension (even, >= 4, so spectral
    differentiation is well defined).  lengths: domain extent per dimension.
    """

    points: tuple[int, ...]
    lengths: tuple[float, ...]

    def __init__(self, points, lengths=1.0, dims: int | None = None):
        if dims is None:
            dims = len(points) if not np.isscalar(points) else (
                len(lengths) if not np.isscalar(lengths) else 1)
        if dims not in (1, 2):
            raise ValueError(f"only 1D and 2D grids supported, got dims={dims}")
        pts = _as_tuple(points, dims, int)
        lens = _as_tuple(lengths, dims, float)
        for n in pts:
            if n < 4 or n % 2:
                raise ValueError(f"points per dimension must be even and >= 4, got {n}")
        for length in lens:
            if not length > 0:
                raise ValueError(f"length per dimension must be positive, got {length}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lengths", lens)

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Meshgrid coordinate arrays, one per dimension, grid-shaped."""
        axes = [np.arange(n) * h for n, h in zip(self.points, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumber arrays (fft ordering), one per dimension."""
        axes = [2.0 * np.pi * np.fft.fftfreq(n, d=h)
                for n, h in zip(self.points, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def __repr__(self):
        return f"PeriodicGrid(points={self.points}, lengths={self.lengths})"


@dataclass(frozen=True)
class Field:
    """Real scalar field sampled on a periodic grid.

    Values must be finite; every operation that produces a Field revalidates
    this so NaN/Inf cannot propagate silently.
    """

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False)

    def __init__(self, grid: PeriodicGrid, values):
        arr = np.asarray(values, dtype=float)
        if arr.shape != grid.shape:
            raise GridMismatchError(
                f"field values shape {arr.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __add__(self, other: "Field") -> "Field":
        require_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        require_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def sample_at(self, points: np.ndarray) -> np.ndarray:
        """Spectral (trigonometric) interpolation at arbitrary points.

        `points` has shape (m,) in 1D or (m, 2) in 2D.  Exact for
        band-limited fields; cost O(m * n_modes).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.grid.dims == 1 and pts.shape[0] == 1 and pts.shape[1] != 1:
            pts = pts.T
        if pts.shape[1] != self.grid.dims:
            raise GridMismatchError(
                f"points have {pts.shape[1]} coordinates, grid has {self.grid.dims}")
        coeffs = np.fft.fftn(self.values) / self.values.size
        ks = self.grid.wavenumbers()
        phase = np.zeros((pts.shape[0],) + self.grid.shape, dtype=complex)
        for d in range(self.grid.dims):
            phase = phase + 1j * pts[:, d].reshape((-1,) + (1,) * self.grid.dims) * ks[d]
        axes = tuple(range(1, 1 + self.grid.dims))
        vals = np.sum(coeffs * np.exp(phase), axis=axes)
        return vals.real


class ComponentBundle:
    """Ordered list of fields sharing one grid (the state of a coupled system)."""

    def __init__(self, fields: Sequence[Field]):
        fields = tuple(fields)
        if not fields:
            raise ValueError("bundle needs at least one field")
        grid = fields[0].grid
        for f in fields[1:]:
            if f.grid != grid:
                raise GridMismatchError("all fields in a bundle must share one grid")
        self.fields = fields
        self.grid = grid

    @classmethod
    def from_arrays(cls, grid: PeriodicGrid, arrays: Iterable[np.ndarray]) -> "ComponentBundle":
        return cls([Field(grid, a) for a in arrays])

    def stack(self) -> np.ndarray:
        """Component-major array of shape (n_components,) + grid.shape."""
        return np.stack([f.values for f in self.fields])

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, i: int) -> Field:
        return self.fields[i]

    def __iter__(self):
        return iter(self.fields)

    def copy(self) -> "ComponentBundle":
        return ComponentBundle([f.copy() for f in self.fields])


def require_same_grid(*objs) -> PeriodicGrid:
    grid = objs[0].grid
    for o in objs[1:]:
        if o.grid != grid:
            raise GridMismatchError(f"grid mismatch: {o.grid} vs {grid}")
    return grid


def integrate(f: Field) -> float:
    """Integral over the periodic domain (rectangle rule, exact for the grid's band)."""
    return float(f.values.sum() * f.grid.cell_volume)


def inner(f: Field, g: Field) -> float:
    """Discrete L2 inner product with uniform quadrature weights."""
    require_same_grid(f, g)
    return float((f.values * g.values).sum() * f.grid.cell_volume)


def l2_norm(f: Field) -> float:
    return float(np.sqrt(inner(f, f)))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def bundle_sup_distance(a: ComponentBundle, b: ComponentBundle) -> float:
    if len(a) != len(b):
        raise GridMismatchError("bundles have different component counts")
    return max(sup_norm(fa - fb) for fa, fb in zip(a.fields, b.fields))


def random_band_limited(grid: PeriodicGrid, rng: np.random.Generator,
                        max_mode: int = 8, rms: float = 1.0,
                        zero_mean: bool = True) -> Field:
    """Random smooth field with Fourier support on modes |m_s| <= max_mode.

    Band limiting keeps the spectral representation exact under
    differentiation and pointwise products at the default grid sizes.
    """
    for n in grid.points:
        if max_mode > n // 4:
            raise ValueError(f"max_mode {max_mode} exceeds n/4 for n={n}")
    coeffs = np.zeros(grid.shape, dtype=complex)
    mode_axes = [np.fft.fftfreq(n, d=1.0 / n) for n in grid.points]
    mesh = np.meshgrid(*mode_axes, indexing="ij")
    mask = np.ones(grid.shape, dtype=bool)
    for m in mesh:
        mask &= np.abs(m) <= max_mode
    if zero_mean:
        mask[(0,) * grid.dims] = False
    size = int(mask.sum())
    coeffs[mask] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    vals = np.fft.ifftn(coeffs).real
    scale = np.sqrt(np.mean(vals ** 2))
    if scale > 0:
        vals = vals * (rms / scale)
    return Field(grid, vals)


def random_bundle(grid: PeriodicGrid, rng: np.random.Generator, n_components: int,
                  max_mode: int = 8, rms: float = 1.0,
                  zero_mean: bool = True) -> ComponentBundle:
    return ComponentBundle([
        random_band_limited(grid, rng, max_mode=max_mode, rms=rms, zero_mean=zero_mean)
        for _ in range(n_components)])


_EXP_LIMIT = 700.0


def exponential_rescale(state: ComponentBundle, t: float, rate: float,
                        inverse: bool = False) -> ComponentBundle:
    """Multiply every component by exp(rate*t); divide when inverse=True.

    Round trips are exact to one ulp because forward and inverse use the
    identical factor.  Raises instead of silently producing Inf.
    """
    if abs(rate * t) > _EXP_LIMIT:
        raise RescaleOverflowError(f"exp({rate * t:g}) overflows double precision")
    factor = np.exp(rate * t)
    if inverse:
        return ComponentBundle.from_arrays(
            state.grid, [f.values / factor for f in state.fields])
    return ComponentBundle.from_arrays(
        state.grid, [f.values * factor for f in state.fields])
