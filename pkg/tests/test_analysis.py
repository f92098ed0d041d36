import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from suppalign.alignment import alignment_basis
from suppalign.analysis import (BerCurve, band_level_db, ber_curve, binomial_halfwidth, build_phi,
                                ccdf, horizontal_shift_db, lam0_power_matched,
                                leakage_trial_block, measurement_bins, merge_psd, oob_reduction,
                                papr, papr_at_probability, papr_oversampled, psi_weights,
                                psi_weights_bruteforce, rayleigh_ber_qpsk, awgn_ber_qpsk,
                                welch_psd, z_diagonal)
from suppalign.channel import complex_normal, draw_channel, toeplitz_channel
from suppalign.ofdm import SystemConfig, build_maps, qam_modulate, random_bits
from suppalign.suppressor import notch_bins, power_budget, solve_lsqi, spectral_operators


class TestPsd:
    def test_white_noise_is_flat(self, rng):
        est = welch_psd(complex_normal(rng, 200_000), 64)
        assert est.power.size == 64
        assert np.ptp(est.power_db) < 1.0

    def test_tone_lands_in_its_bin(self):
        n = np.arange(8192)
        est = welch_psd(np.exp(2j * np.pi * 10 * n / 256), 256)
        assert np.argmax(est.power) == 10

    def test_merge_weights_by_segments(self, rng):
        x = complex_normal(rng, 4096)
        a, b = welch_psd(x[:1024], 128), welch_psd(x[1024:], 128)
        m = merge_psd([a, b])
        assert m.num_segments == a.num_segments + b.num_segments
        np.testing.assert_allclose(
            m.power, (a.power * a.num_segments + b.power * b.num_segments) / m.num_segments)

    def test_short_stream_rejected(self):
        with pytest.raises(ValueError):
            welch_psd(np.ones(100), 256)

    def test_oob_reduction_of_scaled_band(self, rng):
        x = complex_normal(rng, 20_000)
        plain = welch_psd(x, 64)
        bins = np.arange(10, 15)
        reduced = welch_psd(x, 64)
        power = reduced.power.copy()
        power[bins] /= 100
        reduced = type(reduced)(reduced.freqs, power, reduced.num_segments, 64, 32)
        assert oob_reduction(reduced, plain, bins) == pytest.approx(20.0)
        assert band_level_db(reduced, bins) < band_level_db(plain, bins)

    def test_grid_mismatch(self, rng):
        x = complex_normal(rng, 4096)
        with pytest.raises(ValueError):
            oob_reduction(welch_psd(x, 64), welch_psd(x, 128), [1])

    def test_measurement_bins_ignore_guards(self):
        cfg = SystemConfig(guard_bins=3)
        np.testing.assert_array_equal(measurement_bins(cfg), notch_bins(SystemConfig()))


class TestPapr:
    def test_constant_modulus(self):
        assert papr(np.exp(1j * np.arange(10))) == pytest.approx(0.0)

    def test_single_spike(self):
        x = np.zeros(16)
        x[3] = 1
        assert papr(x) == pytest.approx(10 * math.log10(16))

    def test_all_zero(self):
        with pytest.raises(ValueError):
            papr(np.zeros(4))

    @given(st.integers(0, 2**32 - 1))
    def test_bounds(self, seed):
        x = complex_normal(np.random.default_rng(seed), (5, 32))
        p = papr(x)
        assert np.all(p >= 0) and np.all(p <= 10 * math.log10(32) + 1e-9)

    def test_oversampled_not_below_nyquist_rate(self, rng):
        x = complex_normal(rng, (200, 64))
        assert np.all(papr_oversampled(x, 4) >= papr(x) - 1e-9)

    def test_ccdf_shape(self, rng):
        s = rng.normal(8, 1, 10_000)
        c = ccdf(s, min_prob=1e-3)
        assert np.all(np.diff(c.prob) <= 0)
        assert c.prob[0] <= 1 and c.prob[-1] == 0
        q = papr_at_probability(s, 1e-2)
        assert np.mean(s > q) == pytest.approx(1e-2, abs=2e-3)

    def test_tail_resolution_guard(self):
        with pytest.raises(ValueError):
            ccdf(np.ones(100), min_prob=1e-3)
        with pytest.raises(ValueError):
            papr_at_probability(np.ones(100), 1e-3)


class TestPsi:
    @given(st.integers(2, 64), st.data())
    def test_piecewise_matches_definition(self, N, data):
        L = data.draw(st.integers(1, min(16, N - 1)))
        np.testing.assert_array_equal(psi_weights(N, L), psi_weights_bruteforce(N, L))

    def test_small_case(self):
        np.testing.assert_array_equal(psi_weights(4, 2), [0, 1, 2, 2, 2, 1])

    @given(st.integers(2, 64), st.integers(1, 16))
    def test_total_weight(self, N, L):
        assert psi_weights(N, L).sum() == N * L

    def test_three_ranges(self):
        N, L = 10, 3
        k = np.arange(1, N + L + 1)
        expected = np.where(k <= L, k - 1, np.where(k <= N, L, N + L - k + 1))
        np.testing.assert_array_equal(psi_weights(N, L), expected)

    @pytest.mark.parametrize("T", [1, 5, 17])
    def test_other_tap_counts(self, T):
        np.testing.assert_array_equal(psi_weights(64, 16, T), psi_weights_bruteforce(64, 16, T))


class TestLeakage:
    def test_power_matched_multiplier(self, rng):
        cfg = SystemConfig()
        maps = build_maps(cfg)
        H = toeplitz_channel(draw_channel(cfg.L + 1, rng), cfg.frame_length)
        basis = alignment_basis(maps.B, H)
        target = 0.25 * cfg.num_active
        l0 = lam0_power_matched(cfg, maps, basis, target)
        phi = build_phi(cfg, maps, basis, l0)
        assert np.sum(np.abs(phi) ** 2) == pytest.approx(target, rel=1e-8)
        # orthonormal basis: Z trace equals the same power
        assert z_diagonal(basis, phi).sum() == pytest.approx(target, rel=1e-8)

    def test_phi_reproduces_solver_output(self, rng):
        cfg = SystemConfig()
        maps = build_maps(cfg)
        H = toeplitz_channel(draw_channel(cfg.L + 1, rng), cfg.frame_length)
        basis = alignment_basis(maps.B, H)
        d = qam_modulate(random_bits(rng, (1, cfg.bits_per_symbol)), 4)
        ops = spectral_operators(cfg, maps, basis, d)
        sol = solve_lsqi(ops.F_d[0], ops.F_s, power_budget(0.25, d @ maps.G.T)[0])
        phi = build_phi(cfg, maps, basis, float(sol.lagrange_multiplier))
        np.testing.assert_allclose(phi @ d[0], sol.s, atol=1e-10)

    def test_phi_basic_properties(self, rng):
        cfg = SystemConfig()
        maps = build_maps(cfg)
        H = toeplitz_channel(draw_channel(cfg.L + 1, rng), cfg.frame_length)
        basis = alignment_basis(maps.B, H)
        phi = build_phi(cfg, maps, basis, 1.0)
        assert not (phi @ np.zeros(cfg.num_active)).any()
        Z = basis.basis @ phi @ phi.conj().T @ basis.basis.conj().T
        assert np.linalg.eigvalsh(Z).min() > -1e-9
        np.testing.assert_allclose(z_diagonal(basis, phi), np.diag(Z).real, atol=1e-10)

    def test_no_error_no_leak(self):
        leak, count, cf = leakage_trial_block(SystemConfig(), [0.0], 1, 5, np.random.default_rng(2),
                                              closed_form=True)
        assert leak[0] == 0 and cf[0] == 0 and count == 5

    def test_phi_rejects_negative_multiplier(self, rng):
        cfg = SystemConfig()
        maps = build_maps(cfg)
        H = toeplitz_channel(draw_channel(cfg.L + 1, rng), cfg.frame_length)
        with pytest.raises(ValueError):
            build_phi(cfg, maps, alignment_basis(maps.B, H), -1.0)

    def test_closed_form_tracks_simulation(self):
        cfg = SystemConfig(alpha=0.25)
        leak, count, cf = leakage_trial_block(cfg, [1e-2], 30, 50, np.random.default_rng(4),
                                              closed_form=True)
        assert count == 1500
        assert 10 * math.log10(cf[0] / leak[0]) == pytest.approx(0.0, abs=0.5)

    def test_leakage_is_linear_in_mse(self):
        cfg = SystemConfig()
        leak, _, _ = leakage_trial_block(cfg, [1e-3, 1e-2], 2, 10, np.random.default_rng(1))
        assert leak[1] / leak[0] == pytest.approx(10.0)

    def test_closed_form_needs_lsqi(self, rng):
        with pytest.raises(ValueError):
            leakage_trial_block(SystemConfig(lam=0.5), [1e-2], 1, 2, rng, mode="joint",
                                closed_form=True)
        with pytest.raises(ValueError):
            leakage_trial_block(SystemConfig(), [1e-2], 1, 2, rng, mode="other")


class TestBer:
    def test_plain_arm_matches_rayleigh_formula(self):
        cfg = SystemConfig(mod_order=4, alpha=0.25, lam=0.0)
        snr = np.array([0.0, 10.0, 20.0])
        curve = ber_curve(cfg, snr, 2000, 0.0, np.random.default_rng(8), symbols_per_channel=20)
        per_sc = snr + 10 * np.log10(cfg.N / cfg.num_active)
        theory = rayleigh_ber_qpsk(per_sc)
        half = binomial_halfwidth(theory, curve.bits / 20)  # symbols within a channel are correlated
        assert np.all(np.abs(curve.ber("plain") - theory) <= half)

    def test_perfect_csi_sa_equals_matched(self):
        cfg = SystemConfig(mod_order=16, alpha=0.25, lam=0.0)
        curve = ber_curve(cfg, [15.0, 25.0], 200, 0.0, np.random.default_rng(2),
                          symbols_per_channel=50)
        np.testing.assert_array_equal(curve.errors["sa"], curve.errors["plain_matched"])
        assert np.all(curve.errors["sa"] >= curve.errors["plain"])

    def test_merge(self):
        a = BerCurve(np.array([0.0]), {"x": np.array([3])}, 10)
        b = BerCurve(np.array([0.0]), {"x": np.array([1])}, 30)
        m = a.merge(b)
        assert m.bits == 40 and m.ber("x")[0] == pytest.approx(0.1)
        with pytest.raises(ValueError):
            a.merge(BerCurve(np.array([1.0]), {"x": np.array([1])}, 1))

    def test_awgn_formula(self):
        assert awgn_ber_qpsk(np.array([10 * math.log10(2 * 4.0)]))[0] == pytest.approx(
            0.5 * math.erfc(2.0))

    @pytest.mark.parametrize("shift", [0.0, 0.97, 2.0])
    def test_horizontal_shift_recovers_offset(self, shift):
        snr = np.arange(0.0, 50.0, 5.0)
        ref = rayleigh_ber_qpsk(snr)
        test = rayleigh_ber_qpsk(snr - shift)
        assert horizontal_shift_db(snr, ref, test) == pytest.approx(shift, abs=0.03)

    def test_horizontal_shift_needs_overlap(self):
        with pytest.raises(ValueError):
            horizontal_shift_db([0.0, 1.0], [0.1, 0.05], [1e-9, 1e-9])

    def test_halfwidth(self):
        assert binomial_halfwidth(0.5, 10_000) == pytest.approx(2.576 * 0.005)
        assert binomial_halfwidth(0.0, 100) > 0
