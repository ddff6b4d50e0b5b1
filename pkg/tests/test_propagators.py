import numpy as np
import pytest

from randevol.errors import (GridMismatchError, InstabilityError,
                             UnsupportedSystemError)
from randevol.fields import (ComponentBundle, Field, PeriodicGrid,
                             bundle_sup_distance, random_band_limited,
                             random_bundle)
from randevol.operators import (DenseOperator, FieldMultiplier, ScaledIdentity,
                                SpectralDerivative, scaled_derivative)
from randevol.propagators import (DensePropagator, ModePropagator,
                                  OperatorMatrix, cfl_time_step,
                                  exact_propagate, make_propagator,
                                  rk4_propagate)


def transport_pair(v, a):
    return OperatorMatrix([
        [scaled_derivative(v, 1), ScaledIdentity(a)],
        [ScaledIdentity(a), scaled_derivative(-v, 1)],
    ])


def test_pure_transport_is_exact_shift(grid):
    x = grid.coordinates()[0]
    phi = np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x)
    state = ComponentBundle.from_arrays(grid, [phi, phi])
    v, t = 1.0, 0.37
    moved = exact_propagate(state, transport_pair(v, 0.0), t)
    shifted_plus = np.sin(2 * np.pi * (x + v * t)) + 0.5 * np.cos(4 * np.pi * (x + v * t))
    shifted_minus = np.sin(2 * np.pi * (x - v * t)) + 0.5 * np.cos(4 * np.pi * (x - v * t))
    assert np.max(np.abs(moved[0].values - shifted_plus)) <= 1e-12
    assert np.max(np.abs(moved[1].values - shifted_minus)) <= 1e-12


def test_time_zero_is_identity(grid, rng):
    state = random_bundle(grid, rng, 2)
    moved = exact_propagate(state, transport_pair(1.0, 0.5), 0.0)
    for f, g in zip(state.fields, moved.fields):
        assert np.array_equal(f.values, g.values)


def test_zero_mode_hyperbolic_rotation_closed_form(grid):
    a, t = 0.7, 1.3
    c0, c1 = 1.25, -0.5
    state = ComponentBundle.from_arrays(
        grid, [np.full(grid.shape, c0), np.full(grid.shape, c1)])
    moved = exact_propagate(state, transport_pair(1.0, a), t)
    expected_plus = c0 * np.cosh(a * t) + c1 * np.sinh(a * t)
    expected_minus = c0 * np.sinh(a * t) + c1 * np.cosh(a * t)
    assert np.max(np.abs(moved[0].values - expected_plus)) <= 1e-12 * max(1, abs(expected_plus))
    assert np.max(np.abs(moved[1].values - expected_minus)) <= 1e-12 * max(1, abs(expected_minus))


def test_propagation_composes_as_a_group(grid, rng):
    state = random_bundle(grid, rng, 2, max_mode=16)
    gen = transport_pair(1.0, 0.5)
    prop = ModePropagator(gen, grid)
    t1, t2 = 0.6, 1.1
    one_shot = prop.propagate(state, t1 + t2)
    two_step = prop.propagate(prop.propagate(state, t1), t2)
    scale = max(np.max(np.abs(f.values)) for f in one_shot.fields)
    assert bundle_sup_distance(one_shot, two_step) <= 1e-12 * max(scale, 1.0)


def test_defective_free_drift_mode():
    grid = PeriodicGrid((16,), (1.0,))
    gen = OperatorMatrix([[None, ScaledIdentity(1.0)], [None, None]])
    u0 = np.full(grid.shape, 2.0)
    w0 = np.full(grid.shape, -0.75)
    state = ComponentBundle.from_arrays(grid, [u0, w0])
    t = 3.0
    moved = exact_propagate(state, gen, t)
    assert np.max(np.abs(moved[0].values - (u0 + t * w0))) <= 1e-12
    assert np.max(np.abs(moved[1].values - w0)) <= 1e-13


def test_dense_generator_matches_mode_generator(small_grid, rng):
    # the same multiplier system expressed through explicit dense matrices
    state = random_bundle(small_grid, rng, 2, max_mode=4)
    gen_mode = transport_pair(1.0, 0.4)
    d = SpectralDerivative(order=1).matrix(small_grid)
    eye = np.eye(32)
    gen_dense = OperatorMatrix([
        [DenseOperator(d), DenseOperator(0.4 * eye)],
        [DenseOperator(0.4 * eye), DenseOperator(-d)],
    ])
    assert isinstance(make_propagator(gen_mode, small_grid), ModePropagator)
    assert isinstance(make_propagator(gen_dense, small_grid), DensePropagator)
    t = 0.8
    via_mode = exact_propagate(state, gen_mode, t)
    via_dense = exact_propagate(state, gen_dense, t)
    assert bundle_sup_distance(via_mode, via_dense) <= 1e-10


def test_varying_coefficients_are_refused(small_grid, rng):
    sigma = random_band_limited(small_grid, rng, max_mode=2, zero_mean=False)
    gen = OperatorMatrix([[FieldMultiplier(sigma)]])
    state = random_bundle(small_grid, rng, 1, max_mode=3)
    with pytest.raises(UnsupportedSystemError):
        exact_propagate(state, gen, 1.0)


def test_component_count_mismatch(small_grid, rng):
    state = random_bundle(small_grid, rng, 3, max_mode=3)
    with pytest.raises(GridMismatchError):
        exact_propagate(state, transport_pair(1.0, 0.1), 0.5)


def test_rk4_known_exponential():
    grid = PeriodicGrid((4,), (1.0,))
    state = ComponentBundle.from_arrays(grid, [np.ones(4)])
    out = rk4_propagate(state, lambda ys: [-ys[0]], t=1.0, dt=1e-2)
    assert np.max(np.abs(out[0].values - np.exp(-1.0))) <= 1e-8


def test_rk4_zero_rhs_returns_input_unchanged(small_grid, rng):
    state = random_bundle(small_grid, rng, 2, max_mode=3)
    out = rk4_propagate(state, lambda ys: [np.zeros_like(y) for y in ys], 1.0, 0.1)
    for f, g in zip(state.fields, out.fields):
        assert np.array_equal(f.values, g.values)


def test_rk4_self_convergence_against_exact(grid, rng):
    state = random_bundle(grid, rng, 2, max_mode=4)
    gen = transport_pair(1.0, 0.5)
    exact = exact_propagate(state, gen, 0.5)
    sym_plus = scaled_derivative(1.0, 1).symbol(grid)

    def rhs(ys):
        dp = np.fft.ifft(sym_plus * np.fft.fft(ys[0])).real
        dm = np.fft.ifft(sym_plus * np.fft.fft(ys[1])).real
        return [dp + 0.5 * ys[1], -dm + 0.5 * ys[0]]

    err = []
    for dt in (2e-3, 1e-3):
        approx = rk4_propagate(state, rhs, 0.5, dt)
        err.append(bundle_sup_distance(approx, exact))
    assert err[0] / err[1] >= 15.0


def test_rk4_final_partial_step_lands_on_t(grid, rng):
    state = random_bundle(grid, rng, 1, max_mode=4)
    out = rk4_propagate(state, lambda ys: [-ys[0]], t=0.025, dt=0.01)
    expected = state[0].values * np.exp(-0.025)
    assert np.max(np.abs(out[0].values - expected)) <= 1e-10


def test_rk4_instability_error_names_the_step():
    grid = PeriodicGrid((4,), (1.0,))
    state = ComponentBundle.from_arrays(grid, [np.ones(4)])

    def blow_up(ys):
        return [np.full_like(ys[0], np.nan)]

    with pytest.raises(InstabilityError) as exc:
        rk4_propagate(state, blow_up, t=1.0, dt=0.5)
    assert exc.value.step == 1


def test_cfl_time_step(grid):
    dt = cfl_time_step(grid, max_speed=2.0)
    assert dt == pytest.approx(grid.spacing[0] / 8.0)
