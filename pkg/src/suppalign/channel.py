"""Rayleigh multipath channels, AWGN and imperfect-CSI perturbation."""
from __future__ import annotations

import numpy as np
from scipy.linalg import circulant


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channel(num_taps: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform power-delay-profile Rayleigh taps, ``h ~ CN(0, I/num_taps)``.

    With ``size`` given, returns an array of shape ``(size, num_taps)``.
    """
    if num_taps < 1:
        raise ValueError("num_taps must be >= 1")
    shape = (num_taps,) if size is None else (size, num_taps)
    return complex_normal(rng, shape, 1.0 / num_taps)


def toeplitz_channel(h, size: int) -> np.ndarray:
    """Circulant convolution operator of ``h`` on frames of ``size`` samples.

    The first column is ``[h0, ..., hl, 0, ..., 0]``; the top-right corner
    carries the wrap-around entries ``hl ... h1``.
    """
    h = np.asarray(h)
    if size < h.size:
        raise ValueError(f"frame size {size} is shorter than the channel ({h.size} taps)")
    col = np.zeros(size, dtype=complex)
    col[: h.size] = h
    return circulant(col)


def taps_of(H: np.ndarray, num_taps: int | None = None) -> np.ndarray:
    """Recover the tap vector from a circulant operator."""
    col = H[:, 0]
    if num_taps is None:
        nz = np.flatnonzero(col)
        num_taps = int(nz[-1]) + 1 if nz.size else 1
    return col[:num_taps].copy()


def frequency_response(h, N: int) -> np.ndarray:
    """Per-subcarrier gain seen after CP removal and a unitary N-point DFT."""
    return np.fft.fft(h, N, axis=-1)


def noise_variance(snr_db: float, signal_power: float) -> float:
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power / 10 ** (snr_db / 10)


def apply_channel(t, H, snr_db: float, rng: np.random.Generator, *, signal_power: float) -> np.ndarray:
    """Return ``H t + n`` with ``n ~ CN(0, sigma^2 I)``.

    ``signal_power`` is the average per-sample power of the plain-OFDM
    reference; the noise variance is ``signal_power / 10**(snr_db/10)``, so
    every transmit variant shares the same noise floor at a given SNR.
    ``t`` may be a stack of frames (last axis).
    """
    t = np.asarray(t)
    r = t @ np.asarray(H).T
    var = noise_variance(snr_db, signal_power)
    if var:
        r = r + complex_normal(rng, r.shape, var)
    return r


def perturb_csi(H, sigma_e2: float, rng: np.random.Generator, num_taps: int | None = None):
    """Add a Toeplitz estimation error with the sparsity pattern of ``H``.

    Error taps are ``CN(0, sigma_e2 / num_taps)`` so that the normalized MSE
    ``E|h_hat - h|^2 / E|h|^2`` equals ``sigma_e2`` for unit-energy channels.
    Returns ``(H_hat, E)``.
    """
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be non-negative")
    H = np.asarray(H)
    h = taps_of(H, num_taps)
    e = complex_normal(rng, h.shape, sigma_e2 / h.size) if sigma_e2 else np.zeros_like(h)
    E = toeplitz_channel(e, H.shape[0])
    return H + E, E
