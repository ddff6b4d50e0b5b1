"""Multi-velocity random walks and Hamiltonian representability.

A particle in d dimensions jumps between N velocities with Markov intensity
matrix alpha (zero row sums, nonnegative off-diagonal).  Rescaling the
occupation fields by exp(lambda t) replaces alpha with
beta = alpha + lambda I, and the rescaled flow is Hamiltonian exactly when
beta^t factors as Gamma c_hat with Gamma skewsymmetric and c_hat an
invertible diagonal.  This module implements the discrete and continuum
flows, the rescaling, a solver deciding the factorization (emitting a
certificate or a typed obstruction), dimension counts for the manifold of
representable generators with a numerical tangent-rank check, the forward
and backward matrix Kolmogorov flows, walks with internal states, and the
vector telegrapher reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, null_space

from .densities import QuadraticDensity, hamiltonian_flow_generator
from .errors import LatticeMismatchError, ModelError, StructureError
from .fields import ComponentBundle, Field, PeriodicGrid, exponential_rescale
from .operators import (DirectionalDerivative, ScaledIdentity, Shifted,
                        scaled, scaled_derivative)
from .propagators import OperatorMatrix, exact_propagate

_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class VelocityModel:
    """N velocities in R^d plus a Markov intensity matrix and rescale rate.

    velocities: (N, d) array; alpha: (N, N) with zero row sums and
    nonnegative off-diagonal entries; lam: exponential rescale rate.
    """

    velocities: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    lam: float = 0.0

    def __init__(self, velocities, alpha, lam: float = 0.0):
        vel = np.atleast_2d(np.asarray(velocities, dtype=float))
        if vel.shape[0] == 1 and vel.shape[1] > 1 and vel.ndim == 2:
            # allow a flat list of 1D speeds
            vel = vel.T
        al = np.asarray(alpha, dtype=float)
        n = vel.shape[0]
        if al.shape != (n, n):
            raise ModelError(f"alpha shape {al.shape} does not match {n} velocities")
        if vel.shape[1] not in (1, 2):
            raise ModelError("only 1 or 2 spatial dimensions supported")
        row_sums = al.sum(axis=1)
        if np.max(np.abs(row_sums)) > _ZERO_TOL * max(1.0, np.abs(al).max()):
            raise ModelError("alpha must have zero row sums")
        off = al - np.diag(np.diag(al))
        if np.min(off) < -_ZERO_TOL:
            raise ModelError("off-diagonal transition intensities must be >= 0")
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "alpha", al)
        object.__setattr__(self, "lam", float(lam))

    @property
    def n(self) -> int:
        return self.velocities.shape[0]

    @property
    def d(self) -> int:
        return self.velocities.shape[1]

    @property
    def beta(self) -> np.ndarray:
        return self.alpha + self.lam * np.eye(self.n)

    def rescaled(self) -> "RescaledGenerator":
        return RescaledGenerator(self.beta, self.lam)


@dataclass(frozen=True)
class RescaledGenerator:
    """beta = alpha + lambda I; every row sums to lambda."""

    beta: np.ndarray = field(repr=False)
    lam: float = 0.0

    def __init__(self, beta, lam: float):
        b = np.asarray(beta, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ModelError(f"beta must be square, got shape {b.shape}")
        scale = max(1.0, np.abs(b).max())
        if np.max(np.abs(b.sum(axis=1) - lam)) > 1e-8 * scale:
            raise ModelError("every row of beta must sum to lambda")
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "lam", float(lam))

    @classmethod
    def from_matrix(cls, beta) -> "RescaledGenerator":
        """Infer lambda from the (necessarily constant) row sums."""
        b = np.asarray(beta, dtype=float)
        sums = b.sum(axis=1)
        lam = float(sums.mean())
        return cls(b, lam)

    @property
    def n(self) -> int:
        return self.beta.shape[0]


def _lattice_shifts(model: VelocityModel, dt: float,
                    grid: PeriodicGrid) -> list[tuple[int, ...]]:
    shifts = []
    for vel in model.velocities:
        per_axis = []
        for v_s, h in zip(vel, grid.spacing):
            steps = v_s * dt / h
            steps_int = round(steps)
            if abs(steps - steps_int) > 1e-9 * max(1.0, abs(steps)):
                raise LatticeMismatchError(
                    f"velocity component {v_s} times dt={dt} is not a whole "
                    f"number of lattice sites (spacing {h})")
            per_axis.append(int(steps_int))
        shifts.append(tuple(per_axis))
    return shifts


def discrete_update(state: ComponentBundle, model: VelocityModel,
                    dt: float) -> ComponentBundle:
    """One lattice step: new F_i(x) = sum_j p_ji F_j(x - v_i dt).

    p = I + alpha dt; velocities must shift by whole lattice sites.  Total
    mass is conserved exactly because the columns of p sum to one.
    """
    if len(state) != model.n:
        raise ModelError(f"state has {len(state)} components, model has {model.n}")
    shifts = _lattice_shifts(model, dt, state.grid)
    p = np.eye(model.n) + model.alpha * dt
    stacked = state.stack()
    axes = tuple(range(1, 1 + state.grid.dims))
    outs = []
    for i in range(model.n):
        moved = np.roll(stacked, shifts[i], axis=axes)
        outs.append(np.tensordot(p[:, i], moved, axes=(0, 0)))
    return ComponentBundle.from_arrays(state.grid, outs)


def _coupled_transport_generator(model: VelocityModel,
                                 coupling: np.ndarray) -> OperatorMatrix:
    """Entries: -v_i . grad on the diagonal plus the given coupling matrix."""
    n = model.n
    entries: list[list] = [[None] * n for _ in range(n)]
    for i in range(n):
        transport = DirectionalDerivative(tuple(-model.velocities[i]))
        if coupling[i, i] != 0.0:
            entries[i][i] = Shifted(transport, coupling[i, i])
        else:
            entries[i][i] = transport
        for j in range(n):
            if j != i and coupling[i, j] != 0.0:
                entries[i][j] = ScaledIdentity(coupling[i, j])
    return OperatorMatrix(entries)


def continuum_generator(model: VelocityModel) -> OperatorMatrix:
    """Unrescaled flow: d/dt F_i = -(v_i . grad) F_i + sum_j alpha_ji F_j."""
    return _coupled_transport_generator(model, model.alpha.T)


def rescaled_flow_generator(model: VelocityModel) -> OperatorMatrix:
    """Rescaled flow: d/dt f_i = -(v_i . grad) f_i + sum_j beta_ji f_j."""
    return _coupled_transport_generator(model, model.beta.T)


def evolve_continuum(state: ComponentBundle, model: VelocityModel,
                     t: float) -> ComponentBundle:
    return exact_propagate(state, continuum_generator(model), t)


def evolve_rescaled(state: ComponentBundle, model: VelocityModel,
                    t: float) -> ComponentBundle:
    return exact_propagate(state, rescaled_flow_generator(model), t)


def rescale_multi(state: ComponentBundle, t: float, lam: float,
                  inverse: bool = False) -> ComponentBundle:
    """F_i -> f_i = F_i exp(lambda t) (divide when inverse=True)."""
    return exponential_rescale(state, t, lam, inverse=inverse)


@dataclass(frozen=True)
class HamiltonianCertificate:
    """Witness (Gamma, c, lambda) of beta^t = Gamma c_hat.

    Gamma is stored through its strictly upper triangle so skewness is exact
    by construction; all entries of c are nonzero; for lambda != 0 the
    column-sum identity c_j sum_i Gamma_ij = lambda holds.
    """

    gamma_upper: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    lam: float = 0.0

    def __init__(self, gamma_upper, c, lam: float):
        gu = np.asarray(gamma_upper, dtype=float)
        cv = np.asarray(c, dtype=float)
        n = cv.size
        if gu.shape != (n, n):
            raise StructureError(f"gamma shape {gu.shape} does not match c size {n}")
        if np.any(np.tril(gu) != 0.0):
            raise StructureError("gamma must be given by its strictly upper triangle")
        if np.any(cv == 0.0):
            raise StructureError("all certificate coefficients must be nonzero")
        object.__setattr__(self, "gamma_upper", gu)
        object.__setattr__(self, "c", cv)
        object.__setattr__(self, "lam", float(lam))

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_upper - self.gamma_upper.T

    def reconstructed_beta(self) -> np.ndarray:
        return (self.gamma * self.c[None, :]).T

    def reconstruction_residual(self, beta: np.ndarray) -> float:
        return float(np.max(np.abs(self.reconstructed_beta() - beta)))

    def column_sum_residual(self) -> float:
        """Deviation from c_j sum_i Gamma_ij = lambda (zero when lambda = 0)."""
        if self.lam == 0.0:
            return 0.0
        col = self.gamma.sum(axis=0)
        return float(np.max(np.abs(self.c * col - self.lam)))


@dataclass(frozen=True)
class NotRepresentable:
    """Typed obstruction verdict from the representability solver."""

    reason: str
    detail: str = ""

    DIAGONAL = "diagonal obstruction"
    NO_VALID_C = "no valid c"
    LAMBDA_MISMATCH = "lambda mismatch"


def _coupling_components(beta: np.ndarray, tol: float) -> list[list[int]]:
    """Connected components of the graph with an edge where beta couples i, j."""
    n = beta.shape[0]
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in range(n):
                if not seen[j] and (abs(beta[i, j]) > tol or abs(beta[j, i]) > tol):
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def _all_nonzero_candidate(basis: np.ndarray, rng: np.random.Generator,
                           n_draws: int = 1000, floor: float = 1e-8):
    """Search span(basis) for a unit vector with no (near-)zero entry."""
    candidates = [basis[:, k] for k in range(basis.shape[1])]
    if basis.shape[1] > 1:
        total = basis.sum(axis=1)
        norm = np.linalg.norm(total)
        if norm > 0:
            candidates.append(total / norm)
    for cand in candidates:
        if np.min(np.abs(cand)) >= floor:
            return cand
    for _ in range(n_draws):
        z = rng.standard_normal(basis.shape[1])
        v = basis @ z
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        v /= norm
        if np.min(np.abs(v)) >= floor:
            return v
    return None


def fit_hamiltonian(generator: RescaledGenerator,
                    seed: int = 0) -> HamiltonianCertificate | NotRepresentable:
    """Decide whether beta^t = Gamma c_hat with skew Gamma and nonzero c.

    The skewness of Gamma_ij = beta_ji / c_j is the homogeneous linear system
    c_i beta_ji + c_j beta_ij = 0 over pairs i < j; the solver computes its
    nullspace, searches it for an all-nonzero vector, and canonicalizes the
    per-component scale freedom so that each coupling component's leading
    strictly-upper Gamma entry equals +1 (singleton components get c = +1).
    The result is independent of the nullspace basis returned by the SVD.
    """
    beta = generator.beta
    lam = generator.lam
    n = generator.n
    scale = max(1.0, np.abs(beta).max())
    tol = _ZERO_TOL * scale

    diag = np.abs(np.diag(beta))
    if np.max(diag) > tol:
        worst = int(np.argmax(diag))
        return NotRepresentable(
            NotRepresentable.DIAGONAL,
            f"beta[{worst},{worst}] = {beta[worst, worst]:.6g} but skew Gamma "
            "forces a zero diagonal")

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if pairs:
        system = np.zeros((len(pairs), n))
        for row, (i, j) in enumerate(pairs):
            system[row, i] = beta[j, i]
            system[row, j] = beta[i, j]
        basis = null_space(system)
    else:
        basis = np.eye(n)
    if basis.shape[1] == 0:
        return NotRepresentable(
            NotRepresentable.NO_VALID_C,
            "the pair conditions c_i beta_ji + c_j beta_ij = 0 only admit c = 0")

    rng = np.random.Generator(np.random.Philox(key=seed))
    c = _all_nonzero_candidate(basis, rng)
    if c is None:
        return NotRepresentable(
            NotRepresentable.NO_VALID_C,
            "nullspace of the pair conditions contains no all-nonzero vector")
    c = c.copy()

    for comp in _coupling_components(beta, tol):
        lead = None
        for i in comp:
            for j in comp:
                if i < j and abs(beta[j, i]) > tol:
                    lead = (i, j)
                    break
            if lead:
                break
        if lead is None:
            factor = c[comp[0]]
            for i in comp:
                c[i] /= factor
        else:
            i, j = lead
            factor = beta[j, i] / c[j]
            for idx in comp:
                c[idx] *= factor

    gamma_upper = np.zeros((n, n))
    for i, j in pairs:
        up = beta[j, i] / c[j]
        down = -beta[i, j] / c[i]
        gamma_upper[i, j] = 0.5 * (up + down)

    cert = HamiltonianCertificate(gamma_upper, c, lam)
    if lam != 0.0 and cert.column_sum_residual() > 1e-8 * max(1.0, abs(lam)):
        return NotRepresentable(
            NotRepresentable.LAMBDA_MISMATCH,
            f"c_j sum_i Gamma_ij deviates from lambda by "
            f"{cert.column_sum_residual():.3e}")
    residual = cert.reconstruction_residual(beta)
    if residual > tol:
        return NotRepresentable(
            NotRepresentable.NO_VALID_C,
            f"best candidate leaves reconstruction residual {residual:.3e}")
    return cert


def hamiltonian_structure(model: VelocityModel,
                          cert: HamiltonianCertificate) -> OperatorMatrix:
    """B_ij = -delta_ij (1/c_i) v_i . grad + Gamma_ij (skew by construction)."""
    n = model.n
    gamma = cert.gamma
    entries: list[list] = [[None] * n for _ in range(n)]
    for i in range(n):
        entries[i][i] = DirectionalDerivative(
            tuple(-model.velocities[i] / cert.c[i]))
        for j in range(n):
            if j != i and gamma[i, j] != 0.0:
                entries[i][j] = ScaledIdentity(gamma[i, j])
    return OperatorMatrix(entries)


def multiwalk_density(c: np.ndarray) -> QuadraticDensity:
    """H = 1/2 sum_i c_i f_i^2."""
    return QuadraticDensity.diagonal(
        [ScaledIdentity(float(ci)) for ci in np.asarray(c, dtype=float)], name="H")


def proportional_density(c: np.ndarray, n: int) -> QuadraticDensity:
    """H_n = 1/2 sum_i c_i (d^n f_i)^2, conserved when all velocities are
    parallel (the genuinely one-dimensional case)."""
    if n < 0:
        raise ValueError("density order must be >= 0")
    sign = -1.0 if n % 2 else 1.0
    ops = [scaled_derivative(sign * float(ci), 2 * n)
           for ci in np.asarray(c, dtype=float)]
    return QuadraticDensity.diagonal(ops, name=f"H{n}")


def hamiltonian_evolve(state: ComponentBundle, cert: HamiltonianCertificate,
                       model: VelocityModel, t: float) -> ComponentBundle:
    """Exact flow of d/dt f = B (delta H / delta f), H = 1/2 sum c_i f_i^2.

    The generator is assembled from the certificate (structure matrix times
    density gradient), independently of the beta-based assembly, and must
    agree with it; an inconsistent certificate is rejected.
    """
    residual = cert.reconstruction_residual(model.beta)
    if residual > _ZERO_TOL * max(1.0, np.abs(model.beta).max()):
        raise StructureError(
            f"certificate does not reproduce the model generator "
            f"(residual {residual:.3e})")
    structure = hamiltonian_structure(model, cert)
    density = multiwalk_density(cert.c)
    generator = hamiltonian_flow_generator(structure, density)
    return exact_propagate(state, generator, t)


def total_dim(n: int) -> int:
    """Dimension of the space of rescaled generators (lambda free)."""
    if n < 1:
        raise ValueError("need at least one velocity")
    return n * n - n + 1


def ham_dim(n: int) -> int:
    """Dimension of the representable generators near the paired reference."""
    if n < 2 or n % 2:
        raise ValueError(f"the paired reference point needs even N >= 2, got {n}")
    return n * n // 2 - n + 1


def gamma0(n_bar: int) -> np.ndarray:
    eye = np.eye(n_bar)
    zero = np.zeros((n_bar, n_bar))
    return np.block([[zero, eye], [-eye, zero]])


def c_hat0(n_bar: int, lam: float = 1.0) -> np.ndarray:
    return lam * np.concatenate([-np.ones(n_bar), np.ones(n_bar)])


def beta0(n_bar: int, lam: float = 1.0) -> np.ndarray:
    """Direct sum of one-dimensional pair walks: beta^t = lam [[0,1],[1,0]]."""
    eye = np.eye(n_bar)
    zero = np.zeros((n_bar, n_bar))
    return lam * np.block([[zero, eye], [eye, zero]])


def paired_velocities(n_bar: int, v: float = 1.0, d: int = 1) -> np.ndarray:
    """Velocities whose i-th and (i+n_bar)-th entries are opposite.

    1D: multiples v, 2v, ..., n_bar*v and their negatives; 2D (n_bar = 2):
    the four axis directions.
    """
    if d == 1:
        base = v * np.arange(1, n_bar + 1, dtype=float)[:, None]
        return np.vstack([base, -base])
    if d == 2:
        if n_bar != 2:
            raise ValueError("2D paired family is defined for n_bar = 2")
        return v * np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    raise ValueError("only 1 or 2 spatial dimensions supported")


def direct_sum_walk_model(n_bar: int, v: float = 1.0, lam: float = 1.0,
                          d: int = 1) -> VelocityModel:
    """Reference representable model: each velocity flips to its negative
    at rate lam, so alpha = beta0 - lam I."""
    alpha = beta0(n_bar, lam) - lam * np.eye(2 * n_bar)
    return VelocityModel(paired_velocities(n_bar, v, d), alpha, lam)


def tangent_rank_at_beta0(n_bar: int, lam: float = 1.0,
                          threshold: float = 1e-8) -> int:
    """Numerical rank of the linearized factorization map at the reference.

    Parameters are a skew upper-left block, an arbitrary off-diagonal block,
    and a skew lower-right block of the Gamma perturbation; the c
    perturbation follows from the column-sum identity.  The image lives in
    the space of transposed generator perturbations.
    """
    if n_bar < 1:
        raise ValueError("n_bar must be >= 1")
    n = 2 * n_bar
    c0 = c_hat0(n_bar, lam)
    g0 = gamma0(n_bar)

    params = []
    for i in range(n_bar):
        for j in range(i + 1, n_bar):
            params.append(("A", i, j))
    for i in range(n_bar):
        for j in range(n_bar):
            params.append(("B", i, j))
    for i in range(n_bar):
        for j in range(i + 1, n_bar):
            params.append(("C", i, j))

    columns = []
    for kind, i, j in params:
        gbar = np.zeros((n, n))
        if kind == "A":
            gbar[i, j] = 1.0
            gbar[j, i] = -1.0
        elif kind == "B":
            gbar[i, n_bar + j] = 1.0
            gbar[n_bar + j, i] = -1.0
        else:
            gbar[n_bar + i, n_bar + j] = 1.0
            gbar[n_bar + j, n_bar + i] = -1.0
        gamma_col = gbar.sum(axis=0)
        beta_bar_t = gbar * c0[None, :] - lam * g0 * gamma_col[None, :]
        columns.append(beta_bar_t.ravel())
    matrix = np.column_stack(columns)
    svals = np.linalg.svd(matrix, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > threshold * svals[0]))


def kolmogorov_rates(alpha: np.ndarray, lam_per_state: np.ndarray) -> np.ndarray:
    """beta_kj = alpha_kj + lam_j delta_kj (per-state rescale rates)."""
    alpha = np.asarray(alpha, dtype=float)
    lam = np.asarray(lam_per_state, dtype=float)
    if lam.shape != (alpha.shape[0],):
        raise ModelError("need one rate per state")
    return alpha + np.diag(lam)


def kolmogorov_evolve(p: np.ndarray, beta: np.ndarray, t: float,
                      direction: str = "inverse") -> np.ndarray:
    """Matrix flows d/dt p = p beta (inverse) or d/dt p = beta p (direct)."""
    p = np.asarray(p, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if direction == "inverse":
        return p @ expm(beta * t)
    if direction == "direct":
        return expm(beta * t) @ p
    raise ValueError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class InternalModel:
    """Walk with N velocities and M internal states.

    alpha4[i, j, mu, nu] is the intensity of the joint jump
    (velocity i, state mu) -> (velocity j, state nu); conservation requires
    sum over arrivals (i, mu) of alpha4[j, i, nu, mu] to vanish for every
    departure (j, nu).
    """

    velocities: np.ndarray = field(repr=False)
    alpha4: np.ndarray = field(repr=False)

    def __init__(self, velocities, alpha4):
        vel = np.atleast_2d(np.asarray(velocities, dtype=float))
        if vel.shape[0] == 1 and vel.shape[1] > 1:
            vel = vel.T
        a4 = np.asarray(alpha4, dtype=float)
        n = vel.shape[0]
        if a4.ndim != 4 or a4.shape[0] != n or a4.shape[1] != n or \
                a4.shape[2] != a4.shape[3]:
            raise ModelError(f"alpha4 shape {a4.shape} does not match N={n}")
        defect = np.abs(a4.sum(axis=(1, 3))).max()
        if defect > 1e-12 * max(1.0, np.abs(a4).max()):
            raise ModelError(
                f"internal intensities violate conservation (defect {defect:.3e})")
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "alpha4", a4)

    @property
    def n(self) -> int:
        return self.velocities.shape[0]

    @property
    def m(self) -> int:
        return self.alpha4.shape[2]


def internal_generator(model: InternalModel) -> OperatorMatrix:
    """Flattened (velocity, state) system: transport plus state coupling.

    Component index is i*M + mu; the coupling into (i, mu) from (j, nu) is
    alpha4[j, i, nu, mu].
    """
    n, m = model.n, model.m
    size = n * m
    coupling = np.transpose(model.alpha4, (1, 3, 0, 2)).reshape(size, size)
    entries: list[list] = [[None] * size for _ in range(size)]
    for i in range(n):
        transport = DirectionalDerivative(tuple(-model.velocities[i]))
        for mu in range(m):
            row = i * m + mu
            for col in range(size):
                w = coupling[row, col]
                if col == row:
                    entries[row][col] = Shifted(transport, w) if w != 0.0 else transport
                elif w != 0.0:
                    entries[row][col] = ScaledIdentity(w)
    return OperatorMatrix(entries)


def internal_evolve(state: ComponentBundle, model: InternalModel,
                    t: float) -> ComponentBundle:
    """Exact flow of the internal-state walk; components ordered (i, mu)."""
    if len(state) != model.n * model.m:
        raise ModelError(
            f"state has {len(state)} components, model needs {model.n * model.m}")
    return exact_propagate(state, internal_generator(model), t)


def internal_density(c_blocks: np.ndarray) -> QuadraticDensity:
    """H = 1/2 sum_{i,mu,nu} c_i[mu,nu] F_i^mu F_i^nu (c_i symmetric)."""
    c = np.asarray(c_blocks, dtype=float)
    if c.ndim != 3 or c.shape[1] != c.shape[2]:
        raise ValueError(f"expected (N, M, M) coefficient blocks, got {c.shape}")
    if np.max(np.abs(c - np.transpose(c, (0, 2, 1)))) > 0.0:
        raise ValueError("coefficient blocks must be symmetric")
    n, m = c.shape[0], c.shape[1]
    size = n * m
    entries: list[list] = [[None] * size for _ in range(size)]
    for i in range(n):
        for mu in range(m):
            for nu in range(m):
                if c[i, mu, nu] != 0.0:
                    entries[i * m + mu][i * m + nu] = ScaledIdentity(c[i, mu, nu])
    return QuadraticDensity(entries, name="H_internal")


def reflection_internal_model(alpha_tilde: np.ndarray, alpha_bar: np.ndarray,
                              v: float) -> InternalModel:
    """Reflection-symmetric two-velocity model realizing the vector pair.

    Component 0 moves right, component 1 left (the generic walk transports
    with -v_i . grad, so the right-mover carries velocity -v).  The state
    coupling uses the within-direction matrix alpha_tilde and the
    cross-direction matrix alpha_bar.
    """
    at = np.asarray(alpha_tilde, dtype=float)
    ab = np.asarray(alpha_bar, dtype=float)
    if at.shape != ab.shape or at.ndim != 2 or at.shape[0] != at.shape[1]:
        raise ModelError("alpha_tilde and alpha_bar must be square and same size")
    m = at.shape[0]
    alpha4 = np.zeros((2, 2, m, m))
    alpha4[0, 0] = at.T
    alpha4[1, 1] = at.T
    alpha4[0, 1] = ab.T
    alpha4[1, 0] = ab.T
    velocities = np.array([[-v], [v]])
    return InternalModel(velocities, alpha4)


def check_vector_constraint(alpha_tilde: np.ndarray, alpha_bar: np.ndarray,
                            tol: float = 1e-12) -> None:
    """Column sums of alpha_tilde + alpha_bar must vanish."""
    total = np.asarray(alpha_tilde) + np.asarray(alpha_bar)
    defect = np.abs(total.sum(axis=0)).max()
    if defect > tol * max(1.0, np.abs(total).max()):
        raise ModelError(
            f"columns of alpha_tilde + alpha_bar must sum to zero "
            f"(defect {defect:.3e})")


def vector_pair_generator(v: float, alpha_tilde: np.ndarray,
                          alpha_bar: np.ndarray) -> OperatorMatrix:
    """2M-component pair: right-movers then left-movers.

    d/dt Fp = +v dFp/dx + alpha_tilde Fp + alpha_bar Fm, mirrored for Fm.
    """
    at = np.asarray(alpha_tilde, dtype=float)
    ab = np.asarray(alpha_bar, dtype=float)
    m = at.shape[0]
    entries: list[list] = [[None] * (2 * m) for _ in range(2 * m)]
    for mu in range(m):
        for nu in range(m):
            if mu == nu:
                entries[mu][nu] = Shifted(scaled_derivative(v, 1), at[mu, nu])
                entries[m + mu][m + nu] = Shifted(scaled_derivative(-v, 1), at[mu, nu])
            else:
                if at[mu, nu] != 0.0:
                    entries[mu][nu] = ScaledIdentity(at[mu, nu])
                    entries[m + mu][m + nu] = ScaledIdentity(at[mu, nu])
            if ab[mu, nu] != 0.0:
                entries[mu][m + nu] = ScaledIdentity(ab[mu, nu])
                entries[m + mu][nu] = ScaledIdentity(ab[mu, nu])
    return OperatorMatrix(entries)


def vector_fg_generator(v: float, alpha_tilde: np.ndarray,
                        alpha_bar: np.ndarray) -> OperatorMatrix:
    """Half-sum / half-difference form of the vector pair.

    d/dt F = v dG/dx + (alpha_tilde + alpha_bar) F,
    d/dt G = v dF/dx + (alpha_tilde - alpha_bar) G.
    """
    at = np.asarray(alpha_tilde, dtype=float)
    ab = np.asarray(alpha_bar, dtype=float)
    m = at.shape[0]
    plus = at + ab
    minus = at - ab
    entries: list[list] = [[None] * (2 * m) for _ in range(2 * m)]
    for mu in range(m):
        for nu in range(m):
            if plus[mu, nu] != 0.0:
                entries[mu][nu] = ScaledIdentity(plus[mu, nu])
            if minus[mu, nu] != 0.0:
                entries[m + mu][m + nu] = ScaledIdentity(minus[mu, nu])
            if mu == nu:
                entries[mu][m + nu] = scaled_derivative(v, 1)
                entries[m + mu][nu] = scaled_derivative(v, 1)
    return OperatorMatrix(entries)


def vector_telegrapher(f_plus: ComponentBundle, f_minus: ComponentBundle,
                       v: float, alpha_tilde: np.ndarray,
                       alpha_bar: np.ndarray, t: float, h: float,
                       richardson: bool = False) -> float:
    """Residual of the second-order vector equation for F = (Fp + Fm)/2.

    Evolves the pair exactly and forms
    F_tt - 2 alpha_tilde F_t - v^2 F_xx - (ab^2 - at^2 + [ab, at]) F
    with time differences of step h; the sup-norm over components and space
    is returned and must vanish at second order in h.
    """
    check_vector_constraint(alpha_tilde, alpha_bar)
    at = np.asarray(alpha_tilde, dtype=float)
    ab = np.asarray(alpha_bar, dtype=float)
    m = at.shape[0]
    if len(f_plus) != m or len(f_minus) != m:
        raise ModelError("need M right-moving and M left-moving components")
    grid = f_plus.grid
    state = ComponentBundle(list(f_plus.fields) + list(f_minus.fields))
    from .propagators import ModePropagator

    prop = ModePropagator(vector_pair_generator(v, at, ab), grid)

    def half_sum(time: float) -> np.ndarray:
        moved = prop.propagate(state, time)
        stacked = moved.stack()
        return 0.5 * (stacked[:m] + stacked[m:])

    f0 = half_sum(t)

    def d2_d1(step: float) -> tuple[np.ndarray, np.ndarray]:
        f_m, f_p = half_sum(t - step), half_sum(t + step)
        return ((f_p - 2.0 * f0 + f_m) / step ** 2, (f_p - f_m) / (2.0 * step))

    acc2, acc1 = d2_d1(h)
    if richardson:
        half2, half1 = d2_d1(h / 2.0)
        acc2 = (4.0 * half2 - acc2) / 3.0
        acc1 = (4.0 * half1 - acc1) / 3.0

    deriv2 = scaled_derivative(v * v, 2)
    fxx = np.stack([deriv2.apply(Field(grid, f0[mu])).values for mu in range(m)])
    mass_matrix = ab @ ab - at @ at + (ab @ at - at @ ab)
    residual = (acc2 - 2.0 * np.einsum("mn,n...->m...", at, acc1)
                - fxx - np.einsum("mn,n...->m...", mass_matrix, f0))
    return float(np.max(np.abs(residual)))
