"""Measurements: Welch PSD, PAPR and CCDF, leaked power under CSI errors, BER."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal
from scipy.interpolate import PchipInterpolator
from scipy.special import erfc

from .alignment import AlignmentBasis, alignment_basis
from .channel import (complex_normal, draw_channel, frequency_response, noise_variance,
                      perturb_csi, toeplitz_channel)
from .ofdm import (LinearMaps, SystemConfig, build_maps, ofdm_demodulate, qam_demodulate,
                   qam_modulate, random_bits)
from .suppressor import notch_bins, oversampled_dft, suppress


# ---------------------------------------------------------------------------
# spectra

@dataclass(frozen=True)
class PsdEstimate:
    """Welch PSD in DFT-bin order: bin ``k`` is normalized frequency ``freqs[k]``.

    ``power`` keeps the linear average periodogram and ``num_segments`` how
    many segments went into it, so estimates from independent streams merge
    with :func:`merge_psd`.
    """

    freqs: np.ndarray
    power: np.ndarray
    num_segments: int
    nperseg: int
    noverlap: int
    window: str = "hann"

    @property
    def power_db(self) -> np.ndarray:
        """dB relative to the spectral peak."""
        return 10 * np.log10(self.power / self.power.max())


def welch_psd(samples, nperseg: int, noverlap: int | None = None, window: str = "hann") -> PsdEstimate:
    """Two-sided averaged modified periodogram of a complex sample stream."""
    x = np.asarray(samples).ravel()
    if noverlap is None:
        noverlap = nperseg // 2
    step = nperseg - noverlap
    if x.size < nperseg + step:
        raise ValueError(f"stream of {x.size} samples is shorter than two Welch segments")
    freqs, power = signal.welch(
        x, window=window, nperseg=nperseg, noverlap=noverlap,
        return_onesided=False, detrend=False, scaling="density",
    )
    nseg = 1 + (x.size - nperseg) // step
    return PsdEstimate(freqs, power, nseg, nperseg, noverlap, window)


def merge_psd(parts) -> PsdEstimate:
    """Segment-weighted average of estimates sharing Welch parameters."""
    parts = list(parts)
    first = parts[0]
    total = sum(p.num_segments for p in parts)
    power = sum(p.power * p.num_segments for p in parts) / total
    return PsdEstimate(first.freqs, power, total, first.nperseg, first.noverlap, first.window)


def band_level_db(psd: PsdEstimate, bins) -> float:
    """Mean PSD (dB relative to peak) over ``bins``."""
    return float(np.mean(psd.power_db[np.asarray(bins)]))


def oob_reduction(psd_sa: PsdEstimate, psd_plain: PsdEstimate, bins) -> float:
    """Mean over ``bins`` of the plain minus suppressed PSD, in dB."""
    if psd_sa.power.shape != psd_plain.power.shape:
        raise ValueError("PSD estimates use different bin grids")
    bins = np.asarray(bins)
    return float(np.mean(psd_plain.power_db[bins] - psd_sa.power_db[bins]))


def measurement_bins(cfg: SystemConfig) -> np.ndarray:
    """Notch bins on a Welch grid of ``zeta * N`` points."""
    return notch_bins(cfg.replace(guard_bins=0))


# ---------------------------------------------------------------------------
# PAPR

def papr(t) -> np.ndarray | float:
    """Peak-to-average power ratio in dB over the last axis."""
    p = np.abs(np.asarray(t)) ** 2
    mean = p.mean(axis=-1)
    if np.any(mean == 0):
        raise ValueError("PAPR of an all-zero frame is undefined")
    out = 10 * np.log10(p.max(axis=-1) / mean)
    return float(out) if np.ndim(out) == 0 else out


def papr_oversampled(t, factor: int = 4) -> np.ndarray | float:
    """PAPR after band-limited interpolation of each frame by ``factor``."""
    t = np.asarray(t)
    n = t.shape[-1]
    spec = np.fft.fft(t, axis=-1)
    padded = np.zeros(t.shape[:-1] + (factor * n,), dtype=complex)
    h = (n + 1) // 2
    padded[..., :h] = spec[..., :h]
    padded[..., factor * n - (n - h):] = spec[..., h:]
    return papr(np.fft.ifft(padded, axis=-1))


@dataclass(frozen=True)
class CcdfCurve:
    thresholds_db: np.ndarray
    prob: np.ndarray
    num_samples: int


def ccdf(samples, step_db: float = 0.1, min_prob: float | None = None) -> CcdfCurve:
    """Empirical ``P(X > threshold)`` on a regular dB grid.

    ``min_prob`` asks for the tail down to that probability and requires at
    least ``10 / min_prob`` samples.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("no samples")
    if min_prob is not None and x.size < 10 / min_prob:
        raise ValueError(f"{x.size} samples cannot resolve probability {min_prob}")
    lo = math.floor(x[0] / step_db) * step_db
    hi = math.ceil(x[-1] / step_db) * step_db
    grid = np.round(np.arange(lo, hi + step_db / 2, step_db), 10)
    prob = 1.0 - np.searchsorted(x, grid, side="right") / x.size
    return CcdfCurve(grid, prob, x.size)


def papr_at_probability(samples, prob: float) -> float:
    """Threshold exceeded with probability ``prob``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 10 / prob:
        raise ValueError(f"{x.size} samples cannot resolve probability {prob}")
    return float(np.quantile(x, 1.0 - prob))


# ---------------------------------------------------------------------------
# leaked power under imperfect CSI

def psi_weights(N: int, L: int, num_taps: int | None = None) -> np.ndarray:
    """Weights ``Psi_k``, ``k = 1..N+L``, of the leaked-power expression.

    ``Psi_k`` counts the receiver rows ``i = L+1..N+L`` whose error taps
    ``i - k`` fall in ``0..T-1``. ``T`` defaults to ``L``, which gives
    ``k-1``, ``L`` and ``N+L-k+1`` on the three ranges of ``k``.
    """
    T = L if num_taps is None else num_taps
    k = np.arange(1, N + L + 1)
    lo = np.maximum(L + 1, k)
    hi = np.minimum(N + L, k + T - 1)
    return np.maximum(hi - lo + 1, 0)


def psi_weights_bruteforce(N: int, L: int, num_taps: int | None = None) -> np.ndarray:
    T = L if num_taps is None else num_taps
    psi = np.zeros(N + L, dtype=int)
    for k in range(1, N + L + 1):
        for i in range(L + 1, N + L + 1):
            if 0 <= i - k <= T - 1:
                psi[k - 1] += 1
    return psi


def build_phi(cfg: SystemConfig, maps: LinearMaps, basis: AlignmentBasis, lam0: float,
              *, cond_limit: float = 1e12) -> np.ndarray:
    """Linear map ``d -> s`` of the regularized LSQI solution at multiplier ``lam0``."""
    if lam0 < 0:
        raise ValueError("lam0 must be non-negative")
    F_K = oversampled_dft(cfg.zeta, cfg.N, cfg.frame_length)[notch_bins(cfg)]
    F_s = F_K @ basis.basis
    A = F_s.conj().T @ F_s + lam0 * np.eye(F_s.shape[1])
    if np.linalg.cond(A) > cond_limit:
        raise np.linalg.LinAlgError("regularized normal matrix is singular")
    return -np.linalg.solve(A, F_s.conj().T @ (F_K @ maps.G))


def z_diagonal(basis: AlignmentBasis, phi) -> np.ndarray:
    """Diagonal of ``(W P) Phi Phi^H (W P)^H``: per-sample suppressor power for unit-energy data."""
    return np.sum(np.abs(basis.basis @ phi) ** 2, axis=1)


def lam0_power_matched(cfg: SystemConfig, maps: LinearMaps, basis: AlignmentBasis,
                       target_power: float) -> float:
    """Multiplier whose fixed map ``Phi`` spends ``target_power`` on unit-energy data.

    Solves ``tr(Phi Phi^H) = target_power``; returns 0 when the unregularized
    map already fits.
    """
    F_K = oversampled_dft(cfg.zeta, cfg.N, cfg.frame_length)[notch_bins(cfg)]
    U, sv, _ = np.linalg.svd(F_K @ basis.basis, full_matrices=False)
    weight = np.sum(np.abs(U.conj().T @ (F_K @ maps.G)) ** 2, axis=1)
    f = lambda l0: float(np.sum((sv / (sv**2 + l0)) ** 2 * weight)) - target_power
    if f(0.0) <= 0:
        return 0.0
    hi = sv[0] ** 2
    while f(hi) > 0:
        hi *= 2
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-14 * hi, rtol=1e-12))


def leaked_power_closed_form(z_diag, psi, sigma_e2: float, N: int, num_taps: int) -> float:
    """``sigma_e2 / (T N) * sum_k Z_kk Psi_k`` (linear)."""
    return float(sigma_e2 * np.dot(np.asarray(z_diag), np.asarray(psi)) / (num_taps * N))


def _channel_stream(cfg, rng, num_channels):
    for _ in range(num_channels):
        h = draw_channel(cfg.L + 1, rng)
        yield h, toeplitz_channel(h, cfg.frame_length)


def leakage_trial_block(cfg: SystemConfig, sigma_e2, num_channels: int, symbols_per_channel: int,
                        rng: np.random.Generator, mode: str = "lsqi", *, closed_form: bool = False,
                        lam0_rule: str = "power", tol: float = 1e-7):
    """Sum of ``(1/N)||B E c||^2`` over symbols for each ``sigma_e2``.

    The suppressor is designed on the channel ``H``; the signal propagates
    through ``H + E``. Returns ``(leak_sums, count, closed_form_sums)``;
    the closed form is evaluated per channel with a single multiplier,
    either matched to that channel's mean suppressor power
    (``lam0_rule='power'``) or the median of its per-symbol multipliers
    (``lam0_rule='median'``). Closed form needs ``mode='lsqi'``.
    """
    sig = np.atleast_1d(np.asarray(sigma_e2, dtype=float))
    if mode not in ("lsqi", "joint"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg.replace(lam=0.0) if mode == "lsqi" else cfg
    maps = build_maps(cfg)
    T = cfg.L + 1
    psi = psi_weights(cfg.N, cfg.L, T)
    leak = np.zeros(sig.size)
    cf = np.zeros(sig.size)
    count = 0
    for _, H in _channel_stream(cfg, rng, num_channels):
        basis = alignment_basis(maps.B, H, cfg.R)
        bits = random_bits(rng, (symbols_per_channel, cfg.bits_per_symbol))
        d = qam_modulate(bits, cfg.mod_order)
        _, _, sol = suppress(cfg, maps, basis, d, policy="raw", tol=tol)
        # unit-variance error taps; scaled per sigma below (leakage is quadratic in sigma)
        e = complex_normal(rng, (symbols_per_channel, T), 1.0 / T)
        c = sol.c
        idx = np.arange(cfg.L, cfg.frame_length)  # 0-based receiver rows
        # (E c)_i = sum_t e_t c_{i-t}; rows i >= L never wrap for T <= L+1
        Ec = np.zeros((symbols_per_channel, idx.size), dtype=complex)
        for t in range(T):
            Ec += e[:, t:t + 1] * c[:, idx - t]
        unit = np.sum(np.abs(Ec) ** 2, axis=1) / cfg.N
        leak += sig * unit.sum()
        count += symbols_per_channel
        if closed_form:
            if mode != "lsqi":
                raise ValueError("closed form exists for the LSQI path only")
            if lam0_rule == "median":
                lam0 = float(np.median(sol.lagrange_multiplier))
            else:
                lam0 = lam0_power_matched(cfg, maps, basis, float(np.mean(sol.power_used)))
            z = z_diagonal(basis, build_phi(cfg, maps, basis, lam0))
            cf += symbols_per_channel * np.array(
                [leaked_power_closed_form(z, psi, s, cfg.N, T) for s in sig]
            )
    return leak, count, cf


# ---------------------------------------------------------------------------
# BER

ARMS = ("plain", "sa", "plain_matched")


@dataclass
class BerCurve:
    """Bit-error counts per SNR and arm.

    ``plain_matched`` is plain OFDM sent with the same data power as the
    suppressed arm, i.e. scaled by ``1/sqrt(1+alpha)``.
    """

    snr_db: np.ndarray
    errors: dict
    bits: int

    def ber(self, arm: str) -> np.ndarray:
        return self.errors[arm] / self.bits

    def merge(self, other: "BerCurve") -> "BerCurve":
        if not np.array_equal(self.snr_db, other.snr_db):
            raise ValueError("SNR grids differ")
        return BerCurve(self.snr_db, {a: self.errors[a] + other.errors[a] for a in self.errors},
                        self.bits + other.bits)


def ber_curve(cfg: SystemConfig, snr_grid, num_symbols: int, sigma_e2: float,
              rng: np.random.Generator, *, symbols_per_channel: int = 100,
              tol: float = 1e-7) -> BerCurve:
    """Hard-decision BER of plain and suppressed OFDM over Rayleigh block fading.

    Every arm sees the same bits, channel, CSI error and noise draws. The
    transmitter designs ``P`` and the receiver equalizes with the estimate
    ``H + E``; the signal propagates through ``H``. Noise power is set from
    the plain reference power ``N_d / N`` per sample.
    """
    snr_grid = np.asarray(snr_grid, dtype=float)
    maps = build_maps(cfg)
    p_ref = cfg.num_active / cfg.N
    g = 1.0 / math.sqrt(1.0 + cfg.alpha)
    errors = {a: np.zeros(snr_grid.size, dtype=np.int64) for a in ARMS}
    done = 0
    while done < num_symbols:
        n = min(symbols_per_channel, num_symbols - done)
        h = draw_channel(cfg.L + 1, rng)
        H = toeplitz_channel(h, cfg.frame_length)
        H_hat, _ = perturb_csi(H, sigma_e2, rng, cfg.L + 1)
        h_hat = frequency_response(H_hat[: cfg.L + 1, 0], cfg.N)
        basis = alignment_basis(maps.B, H_hat, cfg.R)
        bits = random_bits(rng, (n, cfg.bits_per_symbol))
        d = qam_modulate(bits, cfg.mod_order)
        t_sa, x, _ = suppress(cfg, maps, basis, d, tol=tol)
        frames = {"plain": x, "sa": t_sa, "plain_matched": g * x}
        gains = {"plain": h_hat, "sa": g * h_hat, "plain_matched": g * h_hat}
        rx = {a: f @ H.T for a, f in frames.items()}
        for j, snr in enumerate(snr_grid):
            noise = _noise(rng, x.shape, snr, p_ref)
            for a in ARMS:
                d_hat = ofdm_demodulate(rx[a] + noise, maps, gains[a])
                errors[a][j] += int(np.count_nonzero(qam_demodulate(d_hat, cfg.mod_order) != bits))
        done += n
    return BerCurve(snr_grid, errors, num_symbols * cfg.bits_per_symbol)


def _noise(rng, shape, snr_db, p_ref):
    var = noise_variance(snr_db, p_ref)
    return complex_normal(rng, shape, var) if var else 0.0


def rayleigh_ber_qpsk(snr_per_subcarrier_db) -> np.ndarray:
    """Gray 4-QAM over flat Rayleigh fading at average symbol SNR ``gamma_s``."""
    gb = 10 ** (np.asarray(snr_per_subcarrier_db) / 10) / 2
    return 0.5 * (1 - np.sqrt(gb / (1 + gb)))


def awgn_ber_qpsk(snr_per_subcarrier_db) -> np.ndarray:
    gb = 10 ** (np.asarray(snr_per_subcarrier_db) / 10) / 2
    return 0.5 * erfc(np.sqrt(gb))


def binomial_halfwidth(p, n, z: float = 2.576) -> np.ndarray:
    """Normal-approximation confidence half-width of a proportion."""
    p = np.asarray(p, dtype=float)
    return z * np.sqrt(np.maximum(p * (1 - p), 1.0 / n) / n)


def horizontal_shift_db(snr_db, ber_ref, ber_test, floor: float = 1e-5) -> float:
    """Average SNR offset of ``ber_test`` relative to ``ber_ref``.

    ``log10(ber_ref)`` is interpolated against SNR with a monotone cubic
    (PCHIP) through its nonzero, decreasing points; each test point in
    ``(floor, 0.2)`` is mapped to the SNR where the reference reaches the
    same BER. Positive when the test curve needs more SNR for the same BER.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ber_ref = np.asarray(ber_ref, dtype=float)
    keep = ber_ref > 0
    ref = np.log10(ber_ref[keep])
    snr_ref = snr_db[keep]
    # stop at the first point where sampling noise breaks monotonicity
    bad = np.flatnonzero(np.diff(ref) >= 0)
    if bad.size:
        ref, snr_ref = ref[: bad[0] + 1], snr_ref[: bad[0] + 1]
    if ref.size < 2:
        raise ValueError("reference BER needs two decreasing nonzero points")
    inverse = PchipInterpolator(ref[::-1], snr_ref[::-1])
    shifts = []
    for s, b in zip(snr_db, ber_test):
        if b <= floor or b >= 0.2:
            continue
        lb = math.log10(b)
        if not (ref.min() <= lb <= ref.max()):
            continue
        shifts.append(s - float(inverse(lb)))
    if not shifts:
        raise ValueError("curves do not overlap in the usable BER range")
    return float(np.mean(shifts))
