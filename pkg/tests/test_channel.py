import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from suppalign.channel import (apply_channel, complex_normal, draw_channel, frequency_response,
                               noise_variance, perturb_csi, taps_of, toeplitz_channel)


def circular_convolution(x, h):
    n = len(x)
    hp = np.zeros(n, dtype=complex)
    hp[: len(h)] = h
    return np.array([sum(hp[j] * x[(i - j) % n] for j in range(n)) for i in range(n)])


class TestDrawChannel:
    @pytest.mark.parametrize("taps", [1, 17])
    def test_unit_average_energy(self, taps):
        h = draw_channel(taps, np.random.default_rng(1), size=100_000)
        assert np.mean(np.sum(np.abs(h) ** 2, axis=1)) == pytest.approx(1.0, rel=0.02)

    def test_uniform_profile(self):
        h = draw_channel(4, np.random.default_rng(2), size=100_000)
        np.testing.assert_allclose(np.mean(np.abs(h) ** 2, axis=0), 0.25, rtol=0.03)

    def test_deterministic(self):
        a = draw_channel(17, np.random.default_rng(5))
        b = draw_channel(17, np.random.default_rng(5))
        assert a.tobytes() == b.tobytes()

    def test_rejects_zero_taps(self, rng):
        with pytest.raises(ValueError):
            draw_channel(0, rng)


class TestToeplitz:
    def test_single_tap_is_scaled_identity(self):
        np.testing.assert_array_equal(toeplitz_channel([1.0], 5), np.eye(5))

    def test_wrap_entries(self):
        H = toeplitz_channel([2.0, 3.0], 4)
        np.testing.assert_array_equal(H[0], [2, 0, 0, 3])
        np.testing.assert_array_equal(H[1], [3, 2, 0, 0])

    @given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2**32 - 1))
    def test_matches_bruteforce_circular_convolution(self, taps, extra, seed):
        r = np.random.default_rng(seed)
        n = taps + extra
        h = complex_normal(r, taps)
        x = complex_normal(r, n)
        np.testing.assert_allclose(toeplitz_channel(h, n) @ x, circular_convolution(x, h), atol=1e-12)

    def test_size_too_small(self):
        with pytest.raises(ValueError):
            toeplitz_channel([1, 2, 3], 2)

    def test_taps_roundtrip(self, rng):
        h = draw_channel(5, rng)
        np.testing.assert_array_equal(taps_of(toeplitz_channel(h, 12), 5), h)

    def test_frequency_response_is_diagonalized_gain(self, rng):
        h = draw_channel(3, rng)
        H = toeplitz_channel(h, 8)
        F = np.fft.fft(np.eye(8)) / np.sqrt(8)
        np.testing.assert_allclose(np.diag(F @ H @ F.conj().T), frequency_response(h, 8), atol=1e-12)


class TestNoise:
    def test_noise_variance(self):
        assert noise_variance(10.0, 2.0) == pytest.approx(0.2)
        assert noise_variance(np.inf, 1.0) == 0.0

    def test_apply_channel_noise_power(self, rng):
        H = np.eye(50)
        t = np.zeros((4000, 50), dtype=complex)
        r = apply_channel(t, H, 20.0, rng, signal_power=1.0)
        assert np.mean(np.abs(r) ** 2) == pytest.approx(0.01, rel=0.03)

    def test_apply_channel_noiseless(self, rng):
        h = draw_channel(3, rng)
        H = toeplitz_channel(h, 10)
        t = complex_normal(rng, 10)
        np.testing.assert_allclose(apply_channel(t, H, np.inf, rng, signal_power=1.0), H @ t)


class TestPerturbCsi:
    def test_normalized_mse(self):
        r = np.random.default_rng(9)
        errs, energy = [], []
        for _ in range(20_000):
            h = draw_channel(17, r)
            H = toeplitz_channel(h, 80)
            H_hat, E = perturb_csi(H, 0.01, r, 17)
            errs.append(np.sum(np.abs(taps_of(E, 17)) ** 2))
            energy.append(np.sum(np.abs(h) ** 2))
        assert np.mean(errs) / np.mean(energy) == pytest.approx(0.01, rel=0.03)

    def test_same_structure(self, rng):
        H = toeplitz_channel(draw_channel(3, rng), 10)
        H_hat, E = perturb_csi(H, 0.1, rng, 3)
        np.testing.assert_array_equal(E == 0, H == 0)
        np.testing.assert_allclose(H_hat, H + E)

    def test_zero_error(self, rng):
        H = toeplitz_channel(draw_channel(3, rng), 10)
        H_hat, E = perturb_csi(H, 0.0, rng, 3)
        np.testing.assert_array_equal(H_hat, H)
        assert not E.any()

    def test_rejects_negative(self, rng):
        with pytest.raises(ValueError):
            perturb_csi(np.eye(4), -1.0, rng)
