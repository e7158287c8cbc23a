import numpy as np
import pytest

from ffthom import GridSpec, SymTensorField, frequency_grid, highest_frequency_mask
from ffthom.spectral import (
    axis_frequencies,
    forward,
    forward_half,
    hermitian_column_weights,
    inverse,
    inverse_half,
    positive_axis_frequencies,
)
from ffthom.tensor_field import FOURIER


class TestFrequencyGrid:
    def test_even_axis_layout(self):
        xi = axis_frequencies(4, 1.0)
        assert np.allclose(xi, [0.0, 1.0, 2.0, -1.0])
        assert set(xi) == {-1.0, 0.0, 1.0, 2.0}

    def test_odd_axis_layout(self):
        xi = axis_frequencies(3, 1.0)
        assert np.allclose(xi, [0.0, 1.0, -1.0])

    def test_even_with_period(self):
        xi = axis_frequencies(2, 2.0)
        assert np.allclose(xi, [0.0, 0.5])

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 8, 9])
    def test_one_zero_per_axis(self, n):
        xi = axis_frequencies(n, 1.0)
        assert np.count_nonzero(xi == 0.0) == 1

    @pytest.mark.parametrize("n", [2, 4, 8, 16])
    def test_even_extreme_unmirrored(self, n):
        xi = axis_frequencies(n, 1.0)
        assert np.count_nonzero(xi == n / 2) == 1
        assert np.count_nonzero(xi == -n / 2) == 0

    def test_grid_object(self):
        fg = frequency_grid(GridSpec(4, 3, 1.0, 2.0))
        assert np.allclose(fg.xi1, [0.0, 1.0, 2.0, -1.0])
        assert np.allclose(fg.xi2, [0.0, 0.5, -0.5])

    def test_mask_even_axes(self):
        m = highest_frequency_mask(GridSpec(4, 4)).flags
        assert m[2, :].all() and m[:, 2].all()
        assert m.sum() == 4 + 4 - 1

    def test_mask_odd_axis(self):
        m = highest_frequency_mask(GridSpec(4, 5)).flags
        assert m[2, :].all()
        assert m.sum() == 5


class TestTransforms:
    def test_constant_is_dc_only(self):
        grid = GridSpec(8, 6)
        a = np.array([1.0, 2.0, 3.0, 4.0])
        hat = forward(SymTensorField.constant(grid, a))
        assert np.allclose(hat.data[:, 0, 0], a)
        spectrum = hat.data.copy()
        spectrum[:, 0, 0] = 0.0
        assert np.abs(spectrum).max() < 1e-14

    def test_cosine_spectrum(self):
        grid = GridSpec(8, 4, 2.0, 1.0)
        amp = 3.0
        x1 = grid.x1()
        data = np.zeros((4, 8, 4))
        data[0] = amp * np.cos(2.0 * np.pi * x1 / grid.t1)[:, None]
        hat = forward(SymTensorField(grid, data))
        # 1/t1 sits at index 1; its mirror at index -1
        assert hat.data[0, 1, 0] == pytest.approx(amp / 2.0, abs=1e-12)
        assert hat.data[0, -1, 0] == pytest.approx(amp / 2.0, abs=1e-12)
        rest = hat.data.copy()
        rest[0, 1, 0] = rest[0, -1, 0] = 0.0
        assert np.abs(rest).max() < 1e-12

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        grid = GridSpec(12, 10)
        f = SymTensorField(grid, rng.normal(size=(4, 12, 10)))
        back = inverse(forward(f))
        assert np.allclose(back.data, f.data, rtol=1e-12, atol=1e-12)

    def test_inverse_dc_only(self):
        grid = GridSpec(4, 4)
        hat = np.zeros((4, 4, 4), dtype=complex)
        hat[:, 0, 0] = [1.0, 2.0, 3.0, 4.0]
        out = inverse(SymTensorField(grid, hat, domain=FOURIER))
        assert np.allclose(out.data, np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1))

    def test_inverse_hermitian_pair_gives_cosine(self):
        grid = GridSpec(8, 4, 2.0, 1.0)
        amp = 5.0
        hat = np.zeros((4, 8, 4), dtype=complex)
        hat[0, 1, 0] = amp / 2.0
        hat[0, -1, 0] = amp / 2.0
        out = inverse(SymTensorField(grid, hat, domain=FOURIER))
        expected = amp * np.cos(2.0 * np.pi * grid.x1() / grid.t1)
        assert np.allclose(out.data[0], expected[:, None], atol=1e-12)

    def test_non_hermitian_rejected(self):
        grid = GridSpec(8, 4)
        hat = np.zeros((4, 8, 4), dtype=complex)
        hat[0, 1, 0] = 1.0
        hat[0, -1, 0] = 1.1  # 10% symmetry violation
        with pytest.raises(ValueError, match="non-Hermitian"):
            inverse(SymTensorField(grid, hat, domain=FOURIER))

    def test_domain_tags_enforced(self):
        grid = GridSpec(4, 4)
        real = SymTensorField.zeros(grid)
        with pytest.raises(ValueError):
            inverse(real)
        hat = forward(real)
        with pytest.raises(ValueError):
            forward(hat)

    def test_parseval(self):
        rng = np.random.default_rng(11)
        grid = GridSpec(6, 8)
        f = SymTensorField(grid, rng.normal(size=(4, 6, 8)))
        hat = forward(f)
        real_energy = np.sum(f.data**2)
        spec_energy = grid.n_pixels * np.sum(np.abs(hat.data) ** 2)
        assert real_energy == pytest.approx(spec_energy, rel=1e-10)


class TestHalfSpectrum:
    @pytest.mark.parametrize("n2", [6, 7])
    def test_matches_full_spectrum(self, n2):
        rng = np.random.default_rng(13)
        grid = GridSpec(5, n2)
        data = rng.normal(size=(4, 5, n2))
        full = forward(SymTensorField(grid, data)).data
        half = forward_half(data, grid.n_pixels)
        k2 = n2 // 2 + 1
        assert np.allclose(half, full[:, :, :k2], atol=1e-14)
        back = inverse_half(half, (5, n2), grid.n_pixels)
        assert np.allclose(back, data, atol=1e-12)

    @pytest.mark.parametrize("n2", [6, 7])
    def test_weights_complete_parseval(self, n2):
        rng = np.random.default_rng(17)
        grid = GridSpec(4, n2)
        data = rng.normal(size=(4, 4, n2))
        half = forward_half(data, grid.n_pixels)
        w = hermitian_column_weights(n2)
        spec_energy = grid.n_pixels * np.sum(w[None, None, :] * np.abs(half) ** 2)
        assert np.sum(data**2) == pytest.approx(spec_energy, rel=1e-10)

    def test_positive_frequencies(self):
        assert np.allclose(positive_axis_frequencies(6, 2.0), [0.0, 0.5, 1.0, 1.5])
        assert np.allclose(positive_axis_frequencies(5, 1.0), [0.0, 1.0, 2.0])
