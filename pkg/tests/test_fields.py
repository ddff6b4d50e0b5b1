import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randevol.errors import GridMismatchError, RescaleOverflowError
from randevol.fields import (ComponentBundle, Field, PeriodicGrid,
                             exponential_rescale, integrate, inner,
                             random_band_limited, random_bundle)
from randevol.operators import SpectralDerivative


def test_grid_rejects_odd_or_tiny_point_counts():
    with pytest.raises(ValueError):
        PeriodicGrid((5,), (1.0,))
    with pytest.raises(ValueError):
        PeriodicGrid((2,), (1.0,))
    with pytest.raises(ValueError):
        PeriodicGrid((8,), (-1.0,))


def test_grid_spacing_times_points_is_length():
    grid = PeriodicGrid((48, 96), (3.0, 1.5))
    for n, h, length in zip(grid.points, grid.spacing, grid.lengths):
        assert n * h == pytest.approx(length, rel=1e-15)


def test_field_shape_and_finiteness_guards(grid):
    with pytest.raises(GridMismatchError):
        Field(grid, np.zeros(17))
    bad = np.zeros(grid.shape)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        Field(grid, bad)


def test_bundle_requires_shared_grid(grid, small_grid):
    with pytest.raises(GridMismatchError):
        ComponentBundle([Field(grid, np.zeros(grid.shape)),
                         Field(small_grid, np.zeros(small_grid.shape))])


def test_integrate_constant_is_length():
    grid = PeriodicGrid((64,), (2.5,))
    assert integrate(Field(grid, np.ones(64))) == pytest.approx(2.5, abs=1e-14)


def test_integrate_sin_squared_is_half_length(grid):
    x = grid.coordinates()[0]
    f = Field(grid, np.sin(2 * np.pi * x) ** 2)
    assert integrate(f) == pytest.approx(0.5, abs=1e-13)


def test_integral_of_derivative_vanishes(grid, rng):
    f = random_band_limited(grid, rng, max_mode=30, zero_mean=False)
    df = SpectralDerivative(order=1).apply(f)
    scale = float(np.max(np.abs(f.values)))
    assert abs(integrate(df)) <= 1e-12 * scale


def test_band_limited_sampler_respects_band_and_mean(grid, rng):
    f = random_band_limited(grid, rng, max_mode=8)
    coeffs = np.fft.fft(f.values)
    modes = np.fft.fftfreq(256, d=1.0 / 256)
    outside = np.abs(modes) > 8
    assert np.max(np.abs(coeffs[outside])) <= 1e-10 * np.max(np.abs(coeffs))
    assert abs(f.values.mean()) <= 1e-14


def test_spectral_interpolation_matches_closed_form(grid):
    x = grid.coordinates()[0]
    f = Field(grid, np.sin(2 * np.pi * x) + 0.25 * np.cos(6 * np.pi * x))
    pts = np.array([0.0, 0.1234, 0.5, 0.999])
    expected = np.sin(2 * np.pi * pts) + 0.25 * np.cos(6 * np.pi * pts)
    assert np.max(np.abs(f.sample_at(pts) - expected)) <= 1e-12


def test_2d_integrate_and_sampler(grid_2d, rng):
    f = random_band_limited(grid_2d, rng, max_mode=5)
    assert abs(integrate(f)) <= 1e-13
    x, y = grid_2d.coordinates()
    g = Field(grid_2d, np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y))
    pts = np.array([[0.21, 0.37], [0.5, 0.5]])
    expected = np.sin(2 * np.pi * pts[:, 0]) * np.cos(4 * np.pi * pts[:, 1])
    assert np.max(np.abs(g.sample_at(pts) - expected)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(rate=st.floats(-5.0, 5.0), t=st.floats(0.0, 50.0))
def test_rescale_round_trip_is_identity(rate, t):
    grid = PeriodicGrid((16,), (1.0,))
    rng = np.random.default_rng(7)
    state = random_bundle(grid, rng, 2, max_mode=4)
    forward = exponential_rescale(state, t, rate)
    back = exponential_rescale(forward, t, rate, inverse=True)
    for f, g in zip(state.fields, back.fields):
        assert np.max(np.abs(f.values - g.values)) <= 1e-14 * max(
            1.0, np.max(np.abs(f.values)))


def test_rescale_overflow_is_explicit(grid, rng):
    state = random_bundle(grid, rng, 1)
    with pytest.raises(RescaleOverflowError):
        exponential_rescale(state, 1000.0, 1.0)


def test_inner_product_symmetry(grid, rng):
    f = random_band_limited(grid, rng, max_mode=6)
    g = random_band_limited(grid, rng, max_mode=6)
    assert inner(f, g) == pytest.approx(inner(g, f), rel=1e-14)
