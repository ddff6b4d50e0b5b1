import numpy as np
import pytest

from randevol.errors import GridMismatchError
from randevol.fields import Field, PeriodicGrid, random_band_limited
from randevol.operators import (Composed, DenseOperator, DirectionalDerivative,
                                FieldMultiplier, ScaledIdentity, Shifted,
                                SpectralDerivative, adjoint_defect,
                                apply_operator, composed_power, scaled,
                                scaled_derivative, verify_adjointness)


def explicit_fourier_diff_matrix(n: int, length: float, order: int) -> np.ndarray:
    """Independent dense oracle: D = F^{-1} diag((ik)^order) F with explicit
    DFT matrices (no np.fft involved)."""
    j = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(j, j) / n)
    idft = np.exp(2j * np.pi * np.outer(j, j) / n) / n
    modes = np.where(j <= n // 2, j, j - n).astype(float)
    modes[n // 2] = 0.0
    k = 2 * np.pi * modes / length
    return (idft @ np.diag((1j * k) ** order) @ dft).real


def test_derivative_of_eigenfunction(grid):
    x = grid.coordinates()[0]
    f = Field(grid, np.sin(2 * np.pi * x))
    df = apply_operator(SpectralDerivative(order=1), f)
    expected = 2 * np.pi * np.cos(2 * np.pi * x)
    assert np.max(np.abs(df.values - expected)) <= 1e-10


def test_second_derivative_of_constant_is_zero(grid):
    f = Field(grid, np.full(grid.shape, 3.7))
    d2f = apply_operator(SpectralDerivative(order=2), f)
    assert np.max(np.abs(d2f.values)) <= 1e-12


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivative_matches_explicit_matrix_oracle(grid, rng, order):
    f = random_band_limited(grid, rng, max_mode=60, zero_mean=False)
    dense = explicit_fourier_diff_matrix(256, 1.0, order)
    expected = dense @ f.values
    got = apply_operator(SpectralDerivative(order=order), f).values
    scale = max(1.0, np.max(np.abs(expected)))
    assert np.max(np.abs(got - expected)) <= 1e-10 * scale


def test_grid_mismatch_is_reported(grid, grid_2d):
    f2 = Field(grid_2d, np.zeros(grid_2d.shape))
    with pytest.raises(GridMismatchError):
        apply_operator(SpectralDerivative(order=1, axis=1), Field(grid, np.zeros(grid.shape)))
    with pytest.raises(GridMismatchError):
        apply_operator(DenseOperator(np.eye(10)), f2)


@pytest.mark.parametrize("order,expected", [(1, "skewadjoint"), (2, "selfadjoint"),
                                            (3, "skewadjoint"), (4, "selfadjoint")])
def test_derivative_adjointness_flags_verified(small_grid, order, expected):
    op = SpectralDerivative(order=order)
    assert op.adjointness == expected
    verify_adjointness(op, small_grid)


def test_adjointness_of_composite_operators(small_grid, rng):
    verify_adjointness(ScaledIdentity(2.5), small_grid)
    verify_adjointness(Shifted(SpectralDerivative(order=2), 1.5), small_grid)
    verify_adjointness(composed_power(SpectralDerivative(order=1), 2), small_grid)
    sigma = random_band_limited(small_grid, rng, max_mode=3, zero_mean=False)
    verify_adjointness(FieldMultiplier(sigma), small_grid)
    sym = rng.standard_normal((32, 32))
    verify_adjointness(DenseOperator(sym + sym.T, adjointness="selfadjoint"),
                       small_grid)
    verify_adjointness(DenseOperator(sym - sym.T, adjointness="skewadjoint"),
                       small_grid)


def test_wrongly_declared_flag_fails(small_grid, rng):
    mat = rng.standard_normal((32, 32))
    op = DenseOperator(mat, adjointness="selfadjoint")
    with pytest.raises(ValueError):
        verify_adjointness(op, small_grid)


def test_directional_derivative_2d(grid_2d, rng):
    f = random_band_limited(grid_2d, rng, max_mode=5)
    op = DirectionalDerivative((1.0, -2.0))
    dfx = SpectralDerivative(order=1, axis=0).apply(f)
    dfy = SpectralDerivative(order=1, axis=1).apply(f)
    expected = dfx.values - 2.0 * dfy.values
    assert np.max(np.abs(op.apply(f).values - expected)) <= 1e-11
    assert adjoint_defect(op, grid_2d) <= 1e-12


def test_composition_and_scaling_agree_with_symbols(grid, rng):
    f = random_band_limited(grid, rng, max_mode=20)
    two_firsts = Composed([SpectralDerivative(order=1), SpectralDerivative(order=1)])
    second = SpectralDerivative(order=2)
    gap = two_firsts.apply(f).values - second.apply(f).values
    assert np.max(np.abs(gap)) <= 1e-9
    tripled = scaled(SpectralDerivative(order=1), 3.0)
    assert np.max(np.abs(tripled.apply(f).values
                         - 3.0 * SpectralDerivative(order=1).apply(f).values)) <= 1e-11


def test_field_multiplier_pointwise(small_grid, rng):
    w = random_band_limited(small_grid, rng, max_mode=3, zero_mean=False)
    f = random_band_limited(small_grid, rng, max_mode=3)
    out = FieldMultiplier(w).apply(f)
    assert np.array_equal(out.values, w.values * f.values)
    assert FieldMultiplier(w).has_varying_coefficients()
    const = Field(small_grid, np.full(small_grid.shape, 2.0))
    assert not FieldMultiplier(const).has_varying_coefficients()


def test_scaled_derivative_constructor(grid):
    op = scaled_derivative(-3.0, 1)
    x = grid.coordinates()[0]
    f = Field(grid, np.cos(2 * np.pi * x))
    expected = 3.0 * 2 * np.pi * np.sin(2 * np.pi * x)
    assert np.max(np.abs(op.apply(f).values - expected)) <= 1e-10
