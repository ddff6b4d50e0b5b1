"""Damped wave (telegrapher-type) systems and their Hamiltonian forms.

The counterpropagating walk pair combines into one damped second-order
equation for the half-sum of its components.  This module implements that
reduction, the diffusion limit, and the abstract generalization

    eps u_tt + 2 a u_t = L(u),   L selfadjoint,

which the substitution u = u_bar exp(-a t / eps) turns into the undamped
equation eps u_bar_tt = L_hat(u_bar) with L_hat = L + a^2/eps.  The undamped
equation admits three first-order Hamiltonian realizations: the canonical
(position/velocity) one, and, when L = A^2 with A skewadjoint, two
inequivalent skew forms built from X = +-A/sqrt(eps).  Each realization has
its own infinite family of conserved densities, implemented here together
with matched-initial-data helpers and finite-difference residual checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import QuadraticDensity
from .errors import RescaleOverflowError, UnsupportedSystemError
from .fields import ComponentBundle, Field, PeriodicGrid
from .operators import (LinearOperator, ScaledIdentity, Shifted,
                        SpectralDerivative, composed_power, scaled,
                        scaled_derivative, verify_adjointness)
from .propagators import OperatorMatrix, exact_propagate

_EXP_LIMIT = 700.0


def fg_transform(f_plus: Field, f_minus: Field) -> tuple[Field, Field]:
    """Half-sum and half-difference of the pair (the hyperbolic reduction)."""
    return 0.5 * (f_plus + f_minus), 0.5 * (f_plus - f_minus)


def fg_inverse(f: Field, g: Field) -> tuple[Field, Field]:
    return f + g, f - g


def fg_generator(v: float, a: float) -> OperatorMatrix:
    """d/dt F = v dG/dx, d/dt G = v dF/dx - 2 a G."""
    return OperatorMatrix([
        [None, scaled_derivative(v, 1)],
        [scaled_derivative(v, 1), ScaledIdentity(-2.0 * a)],
    ])


def evolve_fg(f: Field, g: Field, v: float, a: float, t: float) -> tuple[Field, Field]:
    out = exact_propagate(ComponentBundle([f, g]), fg_generator(v, a), t)
    return out[0], out[1]


def heat_propagate(phi: Field, diffusivity: float, t: float) -> Field:
    """Exact spectral solution of d/dt F = D d^2F/dx^2."""
    sym = SpectralDerivative(order=2).symbol(phi.grid)
    coeffs = np.fft.fftn(phi.values) * np.exp(diffusivity * sym.real * t)
    return Field(phi.grid, np.fft.ifftn(coeffs).real)


def diffusion_limit_compare(diffusivity: float, scale: float, phi: Field,
                            t: float) -> float:
    """Sup-norm gap between the damped pair and the heat flow at time t.

    Sets v = scale and a = scale^2 / (2 D) so the ratio 2a/v^2 = 1/D stays
    fixed while both rates grow; the gap must shrink as scale grows.
    """
    v = float(scale)
    a = scale ** 2 / (2.0 * diffusivity)
    g0 = Field(phi.grid, np.zeros(phi.grid.shape))
    f_t, _ = evolve_fg(phi, g0, v, a, t)
    heat_t = heat_propagate(phi, diffusivity, t)
    return float(np.max(np.abs(f_t.values - heat_t.values)))


@dataclass(frozen=True)
class TelegrapherSystem:
    """eps u_tt + 2 a u_t = L(u) on a periodic grid.

    L must be selfadjoint; A, when given, must be skewadjoint with A^2 = L
    (that factorization enables the two skew Hamiltonian forms).  The sign
    field picks the branch of X = +-A/sqrt(eps).
    """

    grid: PeriodicGrid
    epsilon: float
    a: float
    L: LinearOperator
    A: LinearOperator | None = None
    sign: int = 1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.a < 0:
            raise ValueError(f"damping rate must be >= 0, got {self.a}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.L.adjointness != "selfadjoint":
            raise ValueError("L must declare the selfadjoint flag")
        verify_adjointness(self.L, self.grid, tol=1e-10)
        if self.A is not None:
            if self.A.adjointness != "skewadjoint":
                raise ValueError("A must declare the skewadjoint flag")
            verify_adjointness(self.A, self.grid, tol=1e-10)
            a_sq = self.A.matrix(self.grid)
            a_sq = a_sq @ a_sq
            l_mat = self.L.matrix(self.grid)
            defect = np.linalg.norm(a_sq - l_mat)
            if defect > 1e-10 * max(np.linalg.norm(l_mat), 1.0):
                raise ValueError(f"A^2 differs from L: defect {defect:.3e}")

    @property
    def rescale_rate(self) -> float:
        """Exponent a/eps: u_bar = u exp((a/eps) t) removes the damping."""
        return self.a / self.epsilon

    @property
    def l_hat(self) -> LinearOperator:
        """L + a^2/eps, the selfadjoint operator of the undamped equation."""
        return Shifted(self.L, self.a ** 2 / self.epsilon)

    @property
    def x_op(self) -> LinearOperator:
        if self.A is None:
            raise UnsupportedSystemError(
                "system was built without a skewadjoint square root of L")
        return scaled(self.A, self.sign / np.sqrt(self.epsilon))


def default_system(grid: PeriodicGrid, v: float = 1.0, a: float = 0.5,
                   epsilon: float = 1.0, sign: int = 1) -> TelegrapherSystem:
    """Reference configuration A = v d/dx, L = v^2 d^2/dx^2."""
    return TelegrapherSystem(
        grid=grid, epsilon=epsilon, a=a,
        L=scaled_derivative(v * v, 2), A=scaled_derivative(v, 1), sign=sign)


def shift_identity_defect(system: TelegrapherSystem) -> float:
    """||L_hat - (L + a^2/eps Id)|| on the system grid (sanity check)."""
    n = int(np.prod(system.grid.shape))
    expected = system.L.matrix(system.grid) + (system.a ** 2 / system.epsilon) * np.eye(n)
    return float(np.linalg.norm(system.l_hat.matrix(system.grid) - expected))


def damped_generator(system: TelegrapherSystem) -> OperatorMatrix:
    """First-order form of the damped equation in (u, u_t)."""
    return OperatorMatrix([
        [None, ScaledIdentity(1.0)],
        [scaled(system.L, 1.0 / system.epsilon),
         ScaledIdentity(-2.0 * system.a / system.epsilon)],
    ])


def evolve_damped(u: Field, udot: Field, system: TelegrapherSystem,
                  t: float) -> tuple[Field, Field]:
    out = exact_propagate(ComponentBundle([u, udot]), damped_generator(system), t)
    return out[0], out[1]


def rescale_second_order(u: Field, udot: Field, t: float,
                         system: TelegrapherSystem,
                         inverse: bool = False) -> tuple[Field, Field]:
    """Map (u, u_t) at time t to the undamped pair (u_bar, u_tilde) and back.

    u_bar = u exp(r t) and u_tilde = u_bar_t = (u_t + r u) exp(r t) with
    r = a/eps.  The inverse divides by the identical exponential factor.
    """
    rate = system.rescale_rate
    if abs(rate * t) > _EXP_LIMIT:
        raise RescaleOverflowError(f"exp({rate * t:g}) overflows double precision")
    factor = np.exp(rate * t)
    if not inverse:
        u_bar = Field(u.grid, u.values * factor)
        u_tilde = Field(u.grid, (udot.values + rate * u.values) * factor)
        return u_bar, u_tilde
    u_back = Field(u.grid, u.values / factor)
    udot_back = Field(u.grid, udot.values / factor - rate * u_back.values)
    return u_back, udot_back


def canonical_generator(system: TelegrapherSystem) -> OperatorMatrix:
    """d/dt u_bar = u_tilde, d/dt u_tilde = L_hat(u_bar)/eps."""
    return OperatorMatrix([
        [None, ScaledIdentity(1.0)],
        [scaled(system.l_hat, 1.0 / system.epsilon), None],
    ])


def canonical_structure() -> OperatorMatrix:
    return OperatorMatrix([[None, ScaledIdentity(1.0)],
                           [ScaledIdentity(-1.0), None]])


def canonical_density(system: TelegrapherSystem, n: int) -> QuadraticDensity:
    """H_n = u_tilde L_hat^n(u_tilde)/2 - u_bar L_hat^{n+1}(u_bar)/(2 eps)."""
    if n < 0:
        raise ValueError("density order must be >= 0")
    op_bar = scaled(composed_power(system.l_hat, n + 1), -1.0 / system.epsilon)
    op_tilde = composed_power(system.l_hat, n)
    return QuadraticDensity.diagonal([op_bar, op_tilde], name=f"H{n}")


def evolve_canonical(u_bar: Field, u_tilde: Field, system: TelegrapherSystem,
                     t: float) -> tuple[Field, Field]:
    out = exact_propagate(ComponentBundle([u_bar, u_tilde]),
                          canonical_generator(system), t)
    return out[0], out[1]


def skew_generator(system: TelegrapherSystem, variant: str) -> OperatorMatrix:
    """First-order realizations available when L = A^2.

    direct:    d/dt (u_bar, u_tilde) = (X u_bar + r u_tilde, -X u_tilde + r u_bar)
    alternate: d/dt (u_bar, u_tilde) = (X u_tilde + r u_bar,  X u_bar - r u_tilde)
    with r = a/eps; both give eps u_bar_tt = L_hat(u_bar).
    """
    x = system.x_op
    r = system.rescale_rate
    if variant == "direct":
        return OperatorMatrix([[x, ScaledIdentity(r)],
                               [ScaledIdentity(r), scaled(x, -1.0)]])
    if variant == "alternate":
        return OperatorMatrix([[ScaledIdentity(r), x],
                               [x, ScaledIdentity(-r)]])
    raise ValueError(f"unknown variant {variant!r}")


def skew_structure(system: TelegrapherSystem, variant: str) -> OperatorMatrix:
    x = system.x_op
    r = system.rescale_rate
    if variant == "direct":
        return OperatorMatrix([[x, ScaledIdentity(-r)],
                               [ScaledIdentity(r), x]])
    if variant == "alternate":
        return OperatorMatrix([[x, ScaledIdentity(r)],
                               [ScaledIdentity(-r), x]])
    raise ValueError(f"unknown variant {variant!r}")


def skew_density(system: TelegrapherSystem, n: int, variant: str) -> QuadraticDensity:
    """Conserved families of the two skew forms (even powers of X only).

    direct:    H_n = u_bar X^{2n}(u_bar)/2 - u_tilde X^{2n}(u_tilde)/2
    alternate: H_n = u_bar X^{2n}(u_tilde)
    """
    if n < 0:
        raise ValueError("density order must be >= 0")
    x_pow = composed_power(system.x_op, 2 * n)
    if variant == "direct":
        return QuadraticDensity.diagonal([x_pow, scaled(x_pow, -1.0)], name=f"H{n}")
    if variant == "alternate":
        return QuadraticDensity.mixed_pair(x_pow, name=f"H{n}")
    raise ValueError(f"unknown variant {variant!r}")


def evolve_skew_form(u_bar: Field, u_tilde: Field, system: TelegrapherSystem,
                     t: float, variant: str = "direct") -> tuple[Field, Field]:
    out = exact_propagate(ComponentBundle([u_bar, u_tilde]),
                          skew_generator(system, variant), t)
    return out[0], out[1]


def matched_initial_data(system: TelegrapherSystem, u_bar0: Field,
                         u_tilde_alt0: Field) -> dict[str, tuple[Field, Field]]:
    """Initial pairs for all three forms sharing (u_bar, d/dt u_bar) at t=0.

    The alternate form's companion variable is taken as the free choice and
    the common slope is u_bar_t(0) = X(u_tilde_alt0) + r u_bar0; the other
    forms' companions are solved from their own first rows.  Requires a > 0
    (at a = 0 the direct form's slope no longer involves its companion).
    """
    if system.a == 0:
        raise ValueError("matched data across all three forms needs a > 0")
    x = system.x_op
    r = system.rescale_rate
    slope = Field(u_bar0.grid,
                  x.apply(u_tilde_alt0).values + r * u_bar0.values)
    u_tilde_direct = Field(
        u_bar0.grid, (slope.values - x.apply(u_bar0).values) / r)
    return {
        "canonical": (u_bar0, slope),
        "direct": (u_bar0, u_tilde_direct),
        "alternate": (u_bar0, u_tilde_alt0),
    }


def second_difference(u_minus: np.ndarray, u_center: np.ndarray,
                      u_plus: np.ndarray, h: float) -> np.ndarray:
    return (u_plus - 2.0 * u_center + u_minus) / h ** 2


def central_difference(u_minus: np.ndarray, u_plus: np.ndarray, h: float) -> np.ndarray:
    return (u_plus - u_minus) / (2.0 * h)


def second_order_residual(system: TelegrapherSystem, evolve, t: float,
                          h: float, richardson: bool = False) -> float:
    """Sup-norm of eps u_bar_tt - L_hat(u_bar) via time differences.

    `evolve` maps a time to the u_bar field.  With richardson=True the
    second difference is extrapolated from steps h and h/2, pushing the
    truncation error to O(h^4) so the check can resolve 1e-8 residuals.
    """
    u0 = evolve(t).values

    def d2(step: float) -> np.ndarray:
        return second_difference(evolve(t - step).values, u0,
                                 evolve(t + step).values, step)

    acc = d2(h)
    if richardson:
        acc = (4.0 * d2(h / 2.0) - acc) / 3.0
    residual = system.epsilon * acc - system.l_hat.apply(
        Field(system.grid, u0)).values
    return float(np.max(np.abs(residual)))


def telegraph_residual(evolve, a: float, v: float, t: float, h: float,
                       richardson: bool = False) -> float:
    """Sup-norm of F_tt + 2 a F_t - v^2 F_xx via time differences."""
    f0 = evolve(t)
    grid = f0.grid
    f_mm, f_pp = evolve(t - h).values, evolve(t + h).values
    acc2 = second_difference(f_mm, f0.values, f_pp, h)
    acc1 = central_difference(f_mm, f_pp, h)
    if richardson:
        f_m, f_p = evolve(t - h / 2.0).values, evolve(t + h / 2.0).values
        acc2 = (4.0 * second_difference(f_m, f0.values, f_p, h / 2.0) - acc2) / 3.0
        acc1 = (4.0 * central_difference(f_m, f_p, h / 2.0) - acc1) / 3.0
    fxx = scaled_derivative(v * v, 2).apply(f0).values
    residual = acc2 + 2.0 * a * acc1 - fxx
    return float(np.max(np.abs(residual)))
