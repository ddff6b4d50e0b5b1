"""Exact and Runge-Kutta time propagation of coupled linear field systems.

A system d/dt y = G y with y a bundle of fields and G a matrix of
constant-coefficient operators decouples in Fourier space into one small ODE
per mode, solved exactly by a matrix exponential.  Generators with abstract
dense entries are still linear and time-invariant, so they are propagated
exactly through the matrix exponential of the full stacked system.  Only
spatially varying coefficients (pointwise multipliers) force time stepping;
for those use rk4_propagate.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import GridMismatchError, InstabilityError, UnsupportedSystemError
from .fields import ComponentBundle, Field, PeriodicGrid
from .operators import LinearOperator, ScaledIdentity

# eigenvector matrices worse conditioned than this are treated as defective
# and their modes fall back to direct matrix exponentials
_EIG_COND_LIMIT = 1e8


def _coerce_entry(entry) -> LinearOperator | None:
    if entry is None:
        return None
    if isinstance(entry, LinearOperator):
        return entry
    if np.isscalar(entry):
        s = float(entry)
        return None if s == 0.0 else ScaledIdentity(s)
    raise TypeError(f"generator entry of unsupported type {type(entry)!r}")


class OperatorMatrix:
    """Square matrix of linear operators (None or scalar entries allowed)."""

    def __init__(self, entries: Sequence[Sequence]):
        rows = [list(r) for r in entries]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("operator matrix must be square")
        self.entries = [[_coerce_entry(e) for e in r] for r in rows]
        self.size = n

    def __getitem__(self, ij) -> LinearOperator | None:
        i, j = ij
        return self.entries[i][j]

    def is_multiplier(self) -> bool:
        return all(op is None or op.is_multiplier()
                   for row in self.entries for op in row)

    def has_varying_coefficients(self) -> bool:
        return any(op is not None and op.has_varying_coefficients()
                   for row in self.entries for op in row)

    def mode_matrices(self, grid: PeriodicGrid) -> np.ndarray:
        """Per-Fourier-mode coupling matrices, shape (n_modes, n, n)."""
        n_modes = int(np.prod(grid.shape))
        out = np.zeros((n_modes, self.size, self.size), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, op in enumerate(row):
                if op is None:
                    continue
                sym = op.symbol(grid)
                if sym is None:
                    raise UnsupportedSystemError(
                        f"entry ({i},{j}) is not a Fourier multiplier")
                out[:, i, j] = sym.ravel()
        return out

    def dense_matrix(self, grid: PeriodicGrid) -> np.ndarray:
        """Stacked dense generator, shape (n*m, n*m) with m grid points."""
        m = int(np.prod(grid.shape))
        big = np.zeros((self.size * m, self.size * m))
        for i, row in enumerate(self.entries):
            for j, op in enumerate(row):
                if op is None:
                    continue
                big[i * m:(i + 1) * m, j * m:(j + 1) * m] = op.matrix(grid)
        return big

    def apply(self, bundle: ComponentBundle) -> ComponentBundle:
        """G y, evaluated entrywise (works for any operator kinds)."""
        if len(bundle) != self.size:
            raise GridMismatchError(
                f"bundle has {len(bundle)} components, generator expects {self.size}")
        outs = []
        for row in self.entries:
            acc = np.zeros(bundle.grid.shape)
            for op, f in zip(row, bundle.fields):
                if op is not None:
                    acc = acc + op.apply(f).values
            outs.append(acc)
        return ComponentBundle.from_arrays(bundle.grid, outs)


class ModePropagator:
    """Exact flow of a Fourier-diagonal generator, reusable across times.

    Diagonalizes every mode matrix once; modes whose eigenvector matrices are
    ill conditioned (defective generators, e.g. free drift) fall back to a
    direct matrix exponential per requested time.
    """

    def __init__(self, generator: OperatorMatrix, grid: PeriodicGrid):
        self.grid = grid
        self.n_comp = generator.size
        self.modes = generator.mode_matrices(grid)
        w, v = np.linalg.eig(self.modes)
        cond = np.linalg.cond(v)
        self.bad = ~np.isfinite(cond) | (cond > _EIG_COND_LIMIT)
        self.w = w
        self.v = v
        good = ~self.bad
        self.v_inv = np.zeros_like(v)
        if np.any(good):
            self.v_inv[good] = np.linalg.inv(v[good])

    def propagate_coeffs(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        """coeffs shape (n_modes, n_comp): Fourier data per mode."""
        if t == 0.0:
            return coeffs.copy()
        out = np.empty_like(coeffs)
        good = ~self.bad
        if np.any(good):
            z = np.einsum("mij,mj->mi", self.v_inv[good], coeffs[good])
            z = z * np.exp(self.w[good] * t)
            out[good] = np.einsum("mij,mj->mi", self.v[good], z)
        for idx in np.nonzero(self.bad)[0]:
            out[idx] = expm(self.modes[idx] * t) @ coeffs[idx]
        return out

    def propagate(self, bundle: ComponentBundle, t: float) -> ComponentBundle:
        if len(bundle) != self.n_comp:
            raise GridMismatchError(
                f"bundle has {len(bundle)} components, propagator expects {self.n_comp}")
        if bundle.grid != self.grid:
            raise GridMismatchError("bundle grid differs from propagator grid")
        if t == 0.0:
            return bundle.copy()
        coeffs = np.stack(
            [np.fft.fftn(f.values).ravel() for f in bundle.fields], axis=1)
        moved = self.propagate_coeffs(coeffs, t)
        arrays = [np.fft.ifftn(moved[:, i].reshape(self.grid.shape)).real
                  for i in range(self.n_comp)]
        return ComponentBundle.from_arrays(self.grid, arrays)


class DensePropagator:
    """Exact flow of an abstract dense generator on the stacked state."""

    def __init__(self, generator: OperatorMatrix, grid: PeriodicGrid):
        self.grid = grid
        self.n_comp = generator.size
        self.big = generator.dense_matrix(grid)

    def propagate(self, bundle: ComponentBundle, t: float) -> ComponentBundle:
        if bundle.grid != self.grid or len(bundle) != self.n_comp:
            raise GridMismatchError("bundle incompatible with propagator")
        if t == 0.0:
            return bundle.copy()
        y0 = np.concatenate([f.values.ravel() for f in bundle.fields])
        yt = expm(self.big * t) @ y0
        m = y0.size // self.n_comp
        arrays = [yt[i * m:(i + 1) * m].reshape(self.grid.shape)
                  for i in range(self.n_comp)]
        return ComponentBundle.from_arrays(self.grid, arrays)


def make_propagator(generator: OperatorMatrix, grid: PeriodicGrid):
    """Pick the exact propagation backend for a constant generator."""
    if generator.has_varying_coefficients():
        raise UnsupportedSystemError(
            "generator has spatially varying coefficients; use rk4_propagate")
    if generator.is_multiplier():
        return ModePropagator(generator, grid)
    return DensePropagator(generator, grid)


def exact_propagate(system: ComponentBundle | Sequence[Field],
                    generator: OperatorMatrix, t: float) -> ComponentBundle:
    """Evolve d/dt y = G y exactly to time t (one-shot convenience wrapper)."""
    bundle = system if isinstance(system, ComponentBundle) else ComponentBundle(system)
    return make_propagator(generator, bundle.grid).propagate(bundle, t)


RHS = Callable[[list[np.ndarray]], list[np.ndarray]]


def rk4_propagate(system: ComponentBundle | Sequence[Field], rhs: RHS,
                  t: float, dt: float) -> ComponentBundle:
    """Classical RK4 up to time t; the last step is shortened to land on t.

    `rhs` maps a list of value arrays to their time derivatives.  Raises
    InstabilityError naming the step if non-finite values appear.
    """
    bundle = system if isinstance(system, ComponentBundle) else ComponentBundle(system)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t < 0:
        raise ValueError(f"backward rk4 integration not supported, t={t}")
    grid = bundle.grid
    y = [f.values.copy() for f in bundle.fields]
    remaining = float(t)
    step = 0
    while remaining > 0.0:
        h = min(dt, remaining)
        k1 = rhs(y)
        k2 = rhs([yi + 0.5 * h * ki for yi, ki in zip(y, k1)])
        k3 = rhs([yi + 0.5 * h * ki for yi, ki in zip(y, k2)])
        k4 = rhs([yi + h * ki for yi, ki in zip(y, k3)])
        y = [yi + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
             for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]
        step += 1
        if not all(np.all(np.isfinite(yi)) for yi in y):
            raise InstabilityError(
                f"non-finite values after rk4 step {step} (t={t - remaining + h:g})",
                step=step)
        remaining -= h
    return ComponentBundle.from_arrays(grid, y)


def cfl_time_step(grid: PeriodicGrid, max_speed: float, factor: float = 0.25) -> float:
    """Conservative time step: factor * min spacing / max speed."""
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    return factor * min(grid.spacing) / max_speed
