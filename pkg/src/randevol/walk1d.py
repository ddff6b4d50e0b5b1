"""One-dimensional persistent random walk (Taylor--Kac model).

A particle moves at speed v on a lattice of spacing dx = v*dt and reverses
direction at Poisson rate a.  The pair of direction-conditioned expectation
functions satisfies an exact lattice recursion whose continuum limit is a
damped two-component transport system.  Multiplying the pair by exp(a*t)
removes the damping and leaves a Hamiltonian system with an infinite family
of conserved densities; this module implements the discrete model (recursion
and Monte Carlo), both continuum flows, the rescaling that connects them,
the conserved-density family, and the inhomogeneous resting-particle
variant with its partial Hamiltonian form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import QuadraticDensity
from .errors import LatticeMismatchError, NotRescalableError
from .fields import ComponentBundle, Field, exponential_rescale
from .operators import (FieldMultiplier, ScaledIdentity, Shifted,
                        SpectralDerivative, scaled, scaled_derivative)
from .propagators import OperatorMatrix, exact_propagate, rk4_propagate


@dataclass(frozen=True)
class WalkParams:
    """Speed v > 0, flip intensity a >= 0, step time dt > 0; dx = v*dt."""

    v: float
    a: float
    dt: float

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError(f"speed must be positive, got {self.v}")
        if self.a < 0:
            raise ValueError(f"flip intensity must be >= 0, got {self.a}")
        if self.dt <= 0:
            raise ValueError(f"step time must be positive, got {self.dt}")
        if self.a * self.dt >= 1.0:
            raise ValueError(
                f"a*dt = {self.a * self.dt:g} is not a valid flip probability")

    @property
    def dx(self) -> float:
        return self.v * self.dt

    @property
    def flip_probability(self) -> float:
        return self.a * self.dt

    def lattice_size(self, length: float) -> int:
        """Number of lattice sites on a periodic domain of the given length."""
        m = length / self.dx
        m_int = round(m)
        if m_int < 2 or abs(m - m_int) > 1e-9 * max(m, 1.0):
            raise LatticeMismatchError(
                f"domain length {length} is not a whole number of steps dx={self.dx}")
        return int(m_int)


def expectation_recursion_step(f_plus: np.ndarray, f_minus: np.ndarray,
                               params: WalkParams) -> tuple[np.ndarray, np.ndarray]:
    """One step of the exact lattice recursion for the expectation pair.

    Site i holds the value at x = i*dx on the periodic lattice; a step shifts
    by exactly one site in the walk's current direction and mixes the two
    direction-conditioned functions with the flip probability.
    """
    f_plus = np.asarray(f_plus, dtype=float)
    f_minus = np.asarray(f_minus, dtype=float)
    if f_plus.shape != f_minus.shape or f_plus.ndim != 1:
        raise ValueError("expected two 1D lattice functions of equal size")
    p = params.flip_probability
    shifted_plus = np.roll(f_plus, -1)    # value at x + dx
    shifted_minus_at_plus = np.roll(f_minus, -1)
    shifted_minus = np.roll(f_minus, 1)   # value at x - dx
    shifted_plus_at_minus = np.roll(f_plus, 1)
    new_plus = (1.0 - p) * shifted_plus + p * shifted_minus_at_plus
    new_minus = (1.0 - p) * shifted_minus + p * shifted_plus_at_minus
    return new_plus, new_minus


def run_recursion(phi_lattice: np.ndarray, n_steps: int,
                  params: WalkParams) -> tuple[np.ndarray, np.ndarray]:
    """n_steps of the recursion from the shared initial profile phi."""
    f_plus = np.array(phi_lattice, dtype=float)
    f_minus = f_plus.copy()
    for _ in range(n_steps):
        f_plus, f_minus = expectation_recursion_step(f_plus, f_minus, params)
    return f_plus, f_minus


def monte_carlo_expectation(phi, x: float, n_steps: int, params: WalkParams,
                            n_samples: int, seed: int
                            ) -> tuple[float, float, float, float]:
    """Monte Carlo estimate of the expectation pair at a single point.

    Simulates direction histories (first step positive; each later step flips
    with probability a*dt) with a counter-based Philox stream keyed by the
    seed, so sample s always consumes the same counter range and results do
    not depend on execution order.  Returns (mean+, mean-, stderr+, stderr-).
    """
    if n_samples < 100:
        raise ValueError(f"need at least 100 samples, got {n_samples}")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    rng = np.random.Generator(np.random.Philox(key=seed))
    if n_steps == 0:
        displacement = np.zeros(n_samples)
    else:
        flips = rng.random((n_samples, n_steps - 1)) < params.flip_probability
        directions = np.ones((n_samples, n_steps))
        if n_steps > 1:
            directions[:, 1:] = np.cumprod(np.where(flips, -1.0, 1.0), axis=1)
        displacement = params.dx * directions.sum(axis=1)
    plus_vals = np.asarray(phi(x + displacement), dtype=float)
    minus_vals = np.asarray(phi(x - displacement), dtype=float)
    out = []
    for vals in (plus_vals, minus_vals):
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / np.sqrt(n_samples))
        out.append((mean, stderr))
    return out[0][0], out[1][0], out[0][1], out[1][1]


def unrescaled_generator(params: WalkParams) -> OperatorMatrix:
    """Damped transport pair: d/dt F+ = v dF+/dx - a(F+ - F-), and mirrored."""
    v, a = params.v, params.a
    return OperatorMatrix([
        [Shifted(scaled_derivative(v, 1), -a), ScaledIdentity(a)],
        [ScaledIdentity(a), Shifted(scaled_derivative(-v, 1), -a)],
    ])


def hamiltonian_generator(params: WalkParams) -> OperatorMatrix:
    """Rescaled pair: d/dt f+ = v df+/dx + a f-, and mirrored."""
    v, a = params.v, params.a
    return OperatorMatrix([
        [scaled_derivative(v, 1), ScaledIdentity(a)],
        [ScaledIdentity(a), scaled_derivative(-v, 1)],
    ])


def structure_matrix(params: WalkParams) -> OperatorMatrix:
    """Skew structure matrix [[v d/dx, -a], [a, v d/dx]] of the rescaled pair."""
    v, a = params.v, params.a
    return OperatorMatrix([
        [scaled_derivative(v, 1), ScaledIdentity(-a)],
        [ScaledIdentity(a), scaled_derivative(v, 1)],
    ])


def evolve_unrescaled(state: ComponentBundle, t: float,
                      params: WalkParams) -> ComponentBundle:
    return exact_propagate(state, unrescaled_generator(params), t)


def evolve_hamiltonian(state: ComponentBundle, t: float,
                       params: WalkParams) -> ComponentBundle:
    return exact_propagate(state, hamiltonian_generator(params), t)


def rescale(state: ComponentBundle, t: float, rate: float,
            inverse: bool = False) -> ComponentBundle:
    """Multiply all components by exp(rate*t) (divide when inverse=True).

    The forward map takes the damped pair F to the Hamiltonian pair
    f = F exp(a t) when called with rate = a.
    """
    return exponential_rescale(state, t, rate, inverse=inverse)


def pair_density(n: int) -> QuadraticDensity:
    """n-th conserved density of the rescaled pair.

    H_n = (f+ d^{2n} f+  -  f- d^{2n} f-) / 2; every member is constant
    along the Hamiltonian flow and all members are in involution.
    """
    if n < 0:
        raise ValueError("density order must be >= 0")
    op = SpectralDerivative(order=2 * n)
    return QuadraticDensity.diagonal([op, scaled(op, -1.0)], name=f"H{n}")


def conserved_density(state: ComponentBundle, n: int) -> float:
    """Integral of the n-th pair density on the given state."""
    return pair_density(n).value(state)


@dataclass(frozen=True)
class InhomogeneousParams:
    """Resting-particle walk data: motion probability sigma(x) in (0, 1],
    local flip intensity lambda(x) >= 0, speed v."""

    sigma: Field
    lam: Field
    v: float

    def __post_init__(self):
        if self.sigma.grid != self.lam.grid:
            raise ValueError("sigma and lambda must share a grid")
        s = self.sigma.values
        if np.any(s <= 0.0) or np.any(s > 1.0):
            raise ValueError("sigma must lie in (0, 1] everywhere")
        if np.any(self.lam.values < 0.0):
            raise ValueError("lambda must be >= 0 everywhere")
        if self.v <= 0:
            raise ValueError(f"speed must be positive, got {self.v}")

    @property
    def lambda_constant(self) -> bool:
        lam = self.lam.values
        return bool(np.max(np.abs(lam - lam.flat[0])) == 0.0)

    def check_step(self, dt: float) -> None:
        """Validity of the underlying discrete probabilities for step dt."""
        if np.any(self.lam.values * dt >= self.sigma.values):
            raise ValueError(
                f"dt = {dt:g} violates lambda*dt < sigma somewhere on the grid")


def _inhomogeneous_rhs(params: InhomogeneousParams, rescaled: bool):
    deriv = SpectralDerivative(order=1)
    grid = params.sigma.grid
    sigma = params.sigma.values
    lam = params.lam.values
    v = params.v

    def rhs(values: list[np.ndarray]) -> list[np.ndarray]:
        p_plus, p_minus = values
        flux_plus = deriv.apply(Field(grid, sigma * p_plus)).values
        flux_minus = deriv.apply(Field(grid, sigma * p_minus)).values
        if rescaled:
            jump_plus = lam * p_minus
            jump_minus = lam * p_plus
        else:
            jump_plus = lam * (p_minus - p_plus)
            jump_minus = lam * (p_plus - p_minus)
        return [v * flux_plus + jump_plus, -v * flux_minus + jump_minus]

    return rhs


def evolve_inhomogeneous(state: ComponentBundle, params: InhomogeneousParams,
                         t: float, dt: float,
                         rescaled: bool = False) -> ComponentBundle:
    """RK4 integration of the resting-particle system (divergence form).

    The rescaled variant drops the diagonal damping; it is meaningful only
    when lambda is constant.  Total probability is conserved by construction
    because both right-hand sides are spatial derivatives plus terms that
    cancel between the components.
    """
    params.check_step(dt)
    return rk4_propagate(state, _inhomogeneous_rhs(params, rescaled), t, dt)


def inhomogeneous_hamiltonian_form(state: ComponentBundle, sigma: Field,
                                   lam, v: float
                                   ) -> tuple[OperatorMatrix, float]:
    """Structure matrix and density value of the rescaled resting walk.

    Requires a constant flip intensity: a varying lambda(x) would put time
    explicitly into the rescaled equations, and no Hamiltonian form exists.
    Returns ([[v d, -lam/sigma], [lam/sigma, v d]], integral of
    sigma ((p+)^2 - (p-)^2)/2).
    """
    if isinstance(lam, Field):
        vals = lam.values
        if np.max(np.abs(vals - vals.flat[0])) > 0.0:
            raise NotRescalableError(
                "lambda varies in space: rescaling would leave explicit time "
                "dependence, no Hamiltonian form exists")
        lam_value = float(vals.flat[0])
    else:
        lam_value = float(lam)
    grid = sigma.grid
    inv_sigma = Field(grid, lam_value / sigma.values)
    matrix = OperatorMatrix([
        [scaled_derivative(v, 1), scaled(FieldMultiplier(inv_sigma), -1.0)],
        [FieldMultiplier(inv_sigma), scaled_derivative(v, 1)],
    ])
    density = resting_density(sigma)
    return matrix, density.value(state)


def resting_density(sigma: Field) -> QuadraticDensity:
    """H = sigma ((p+)^2 - (p-)^2) / 2 for the rescaled resting walk."""
    mult = FieldMultiplier(sigma)
    return QuadraticDensity.diagonal([mult, scaled(mult, -1.0)], name="H_sigma")


def fit_decay_exponent(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log|values| against time."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values == 0.0):
        raise ValueError("cannot fit a decay exponent through zero values")
    coeffs = np.polynomial.polynomial.polyfit(times, np.log(np.abs(values)), 1)
    return float(coeffs[1])
