"""Damped harmonic oscillator and its exponential rescaling.

The damped equation x'' + 2k x' + b x = 0 is not Hamiltonian as it stands.
Substituting x = X exp(-k t) removes the friction term and leaves
X'' + (b - k^2) X = 0, a conservative oscillator with invariant
H = P^2/2 + (b - k^2) X^2/2 where P = X'.  This module evolves both
pictures in closed form (2x2 matrix exponentials) and exposes the rescaled
invariant; it is the smallest end-to-end instance of the rescaling scheme
the rest of the package applies to field systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import RescaleOverflowError

_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class OscillatorParams:
    """Friction rate k >= 0, stiffness b, initial position and velocity."""

    k: float
    b: float
    x0: float = 1.0
    xdot0: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"friction rate must be >= 0, got {self.k}")


def evolve_damped(params: OscillatorParams, t: float) -> tuple[float, float]:
    """Closed-form (x, xdot) at time t for x'' + 2k x' + b x = 0."""
    gen = np.array([[0.0, 1.0], [-params.b, -2.0 * params.k]])
    x, xdot = expm(gen * t) @ np.array([params.x0, params.xdot0])
    return float(x), float(xdot)


def rescale_oscillator(params: OscillatorParams, t: float) -> tuple[float, float, float]:
    """Rescaled coordinates (X, P) at time t plus the conserved value H(P, X).

    X = x exp(k t), P = X' = (xdot + k x) exp(k t),
    H = P^2/2 + (b - k^2) X^2/2.
    """
    if abs(params.k * t) > _EXP_LIMIT:
        raise RescaleOverflowError(
            f"exp({params.k * t:g}) overflows double precision")
    x, xdot = evolve_damped(params, t)
    factor = np.exp(params.k * t)
    big_x = x * factor
    p = (xdot + params.k * x) * factor
    h = 0.5 * p ** 2 + 0.5 * (params.b - params.k ** 2) * big_x ** 2
    return float(big_x), float(p), float(h)


def evolve_conservative(params: OscillatorParams, t: float) -> tuple[float, float]:
    """Closed-form flow of the rescaled system X'' + (b - k^2) X = 0.

    Initial data is the rescaled image of (x0, xdot0) at t = 0:
    X(0) = x0, P(0) = xdot0 + k x0.
    """
    omega_sq = params.b - params.k ** 2
    gen = np.array([[0.0, 1.0], [-omega_sq, 0.0]])
    state0 = np.array([params.x0, params.xdot0 + params.k * params.x0])
    big_x, p = expm(gen * t) @ state0
    return float(big_x), float(p)


def unrescaled_energy(params: OscillatorParams, t: float) -> float:
    """(xdot^2 + b x^2)/2 along the damped flow (monotone for k > 0, b > 0)."""
    x, xdot = evolve_damped(params, t)
    return 0.5 * xdot ** 2 + 0.5 * params.b * x ** 2
