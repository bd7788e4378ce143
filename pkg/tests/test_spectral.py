import numpy as np
import pytest

from smcf import spectral as sp
from smcf.spectral import Grid


@pytest.fixture
def grid2():
    return Grid(d=2, n=32)


def coords(grid):
    return grid.coords()


def random_field(grid, seed=0, mean_zero=False):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    f = sp.lp_project(grid, f, 3, "S_le")  # keep it smooth
    if mean_zero:
        f = f - np.mean(f)
    return f


class TestGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            Grid(d=2, n=6)  # too small
        with pytest.raises(ValueError):
            Grid(d=2, n=9)  # odd
        with pytest.raises(ValueError):
            Grid(d=2, n=14)  # factor 7
        with pytest.raises(ValueError):
            Grid(d=5, n=16)
        Grid(d=2, n=24)  # 2^3 * 3 is fine

    def test_zero_wavenumber_once_per_axis(self, grid2):
        k1 = 2 * np.pi * np.fft.fftfreq(grid2.n, d=grid2.dx)
        assert np.count_nonzero(k1 == 0) == 1


class TestDerivative:
    def test_cosine(self, grid2):
        x = coords(grid2)
        f = np.cos(x[0]).astype(complex)
        df = sp.derivative(grid2, f, 0)
        assert np.max(np.abs(df - (-np.sin(x[0])))) <= 1e-12

    def test_constant(self, grid2):
        f = np.ones(grid2.shape, dtype=complex)
        assert np.max(np.abs(sp.derivative(grid2, f, 0))) <= 1e-13

    def test_single_mode(self, grid2):
        x = coords(grid2)
        f = np.exp(3j * x[1])
        df = sp.derivative(grid2, f, 1)
        assert np.max(np.abs(df - 3j * f)) <= 1e-11

    def test_axis_out_of_range(self, grid2):
        with pytest.raises(ValueError):
            sp.derivative(grid2, np.zeros(grid2.shape), 2)


class TestInverseLaplacian:
    def test_eigenfunction(self, grid2):
        x = coords(grid2)
        f = np.cos(x[0]).astype(complex)
        u = sp.inverse_laplacian(grid2, f)
        assert np.max(np.abs(u - (-np.cos(x[0])))) <= 1e-12

    def test_constant_goes_to_zero(self, grid2):
        f = 3.5 * np.ones(grid2.shape, dtype=complex)
        u, mean = sp.inverse_laplacian(grid2, f, with_mean=True)
        assert np.max(np.abs(u)) <= 1e-13
        assert abs(mean - 3.5) <= 1e-12

    def test_two_modes(self, grid2):
        x = coords(grid2)
        f = np.cos(2 * x[0]) + np.cos(x[1])
        u = sp.inverse_laplacian(grid2, f.astype(complex))
        expect = -np.cos(2 * x[0]) / 4 - np.cos(x[1])
        assert np.max(np.abs(u - expect)) <= 1e-12

    def test_left_inverse_of_laplacian(self, grid2):
        f = random_field(grid2, seed=1)
        u = sp.inverse_laplacian(grid2, sp.laplacian(grid2, f))
        assert np.max(np.abs(u - (f - np.mean(f)))) <= 1e-10


class TestRiesz:
    def test_own_axis_unit_frequency(self, grid2):
        x = coords(grid2)
        f = np.exp(1j * x[0])
        assert np.max(np.abs(sp.riesz(grid2, f, 0) - f)) <= 1e-12

    def test_orthogonal_axis(self, grid2):
        x = coords(grid2)
        f = np.exp(1j * x[0])
        assert np.max(np.abs(sp.riesz(grid2, f, 1))) <= 1e-13

    def test_riesz_squares_resolve_identity(self, grid2):
        # multiplier xi_a/|xi|, so the squares sum to +Id on mean-zero fields
        f = random_field(grid2, seed=2, mean_zero=True)
        total = sum(sp.riesz(grid2, sp.riesz(grid2, f, a), a) for a in range(2))
        assert np.max(np.abs(total - f)) <= 1e-12


class TestLittlewoodPaley:
    def test_partition_of_unity(self, grid2):
        # band-limited below 2^{J-1} with J = num_bands
        f = random_field(grid2, seed=3)
        J = sp.num_bands(grid2)
        total = sum(sp.lp_project(grid2, f, j, "S") for j in range(J + 1))
        assert np.max(np.abs(total - f)) <= 1e-12

    def test_band_support(self, grid2):
        x = coords(grid2)
        f = np.exp(16j * x[0])  # frequency 16, outside band of j=2
        assert np.max(np.abs(sp.lp_project(grid2, f, 2, "S"))) <= 1e-13

    def test_cumulative_matches_sum(self, grid2):
        f = random_field(grid2, seed=4)
        for j in range(4):
            cum = sp.lp_project(grid2, f, j, "S_le")
            total = sum(sp.lp_project(grid2, f, i, "S") for i in range(j + 1))
            assert np.max(np.abs(cum - total)) <= 1e-12

    def test_s0_covers_low_frequencies(self, grid2):
        x = coords(grid2)
        f = np.exp(1j * x[0])
        assert np.max(np.abs(sp.lp_project(grid2, f, 0, "S") - f)) <= 1e-12

    def test_commutes_with_derivative(self, grid2):
        f = random_field(grid2, seed=5)
        a = sp.derivative(grid2, sp.lp_project(grid2, f, 2, "S"), 0)
        b = sp.lp_project(grid2, sp.derivative(grid2, f, 0), 2, "S")
        assert np.max(np.abs(a - b)) <= 1e-12


class TestSobolevMultiplier:
    def test_identity_at_zero(self, grid2):
        f = random_field(grid2, seed=6)
        assert np.max(np.abs(sp.sobolev_multiplier(grid2, f, 0.0) - f)) <= 1e-13

    def test_single_mode_weight(self, grid2):
        x = coords(grid2)
        f = np.exp(1j * x[0])
        out = sp.sobolev_multiplier(grid2, f, 2.0)
        assert np.max(np.abs(out - 2.0 * f)) <= 1e-12

    def test_inverse_composition(self, grid2):
        f = random_field(grid2, seed=7)
        out = sp.sobolev_multiplier(grid2, sp.sobolev_multiplier(grid2, f, 1.7), -1.7)
        assert np.max(np.abs(out - f)) <= 1e-12

    def test_riesz_kind_zero_mode(self, grid2):
        f = np.ones(grid2.shape, dtype=complex)
        out = sp.sobolev_multiplier(grid2, f, -1.0, kind="riesz")
        assert np.max(np.abs(out)) <= 1e-13


class TestNormsAndInvariants:
    def test_parseval(self, grid2):
        f = random_field(grid2, seed=8)
        phys = np.sqrt(np.sum(np.abs(f) ** 2) * grid2.cell_volume)
        assert abs(sp.l2_norm(grid2, f) - phys) / phys <= 1e-10
        # hs_norm at s=0 is the L2 norm
        assert abs(sp.hs_norm(grid2, f, 0.0) - phys) / phys <= 1e-10

    def test_linearity(self, grid2):
        f = random_field(grid2, seed=9)
        g = random_field(grid2, seed=10)
        for op in (
            lambda u: sp.derivative(grid2, u, 0),
            lambda u: sp.inverse_laplacian(grid2, u),
            lambda u: sp.riesz(grid2, u, 1),
            lambda u: sp.lp_project(grid2, u, 2, "S"),
            lambda u: sp.sobolev_multiplier(grid2, u, 1.3),
        ):
            lhs = op(2.0 * f + 3j * g)
            rhs = 2.0 * op(f) + 3j * op(g)
            assert np.max(np.abs(lhs - rhs)) <= 1e-11

    def test_dealias_removes_high_modes(self, grid2):
        x = coords(grid2)
        keep = np.exp(5j * x[0])
        drop = np.exp(14j * x[1])
        out = sp.dealias(grid2, keep + drop)
        assert np.max(np.abs(out - keep)) <= 1e-12

    def test_broadcast_over_tensor_axes(self, grid2):
        f = np.stack([random_field(grid2, seed=11), random_field(grid2, seed=12)])
        out = sp.derivative(grid2, f, 0)
        for a in range(2):
            assert np.max(np.abs(out[a] - sp.derivative(grid2, f[a], 0))) <= 1e-13
