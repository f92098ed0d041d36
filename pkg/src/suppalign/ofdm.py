"""OFDM symbol construction and reception.

Subcarriers are indexed in DFT-bin order, ``0..N-1``. Bin 0 is DC. The
adjacent-user notch occupies bins ``notch_start + 1 .. notch_start + notch_width``.
All DFTs use the unitary (1/sqrt(N)) convention.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a :class:`SystemConfig` violates its invariants."""


class EqualizationWarning(RuntimeWarning):
    """A channel frequency response is (near) zero on an active subcarrier."""


@dataclass(frozen=True)
class SystemConfig:
    """Dimensional and scenario parameters of one OFDM link.

    Parameters
    ----------
    N : number of subcarriers (DFT size).
    L : cyclic-prefix length in samples.
    notch_start : the notch covers subcarriers ``notch_start+1 .. notch_start+notch_width``.
    notch_width : number of deactivated adjacent-user subcarriers (K).
    dc_disabled : exclude DC from the active set.
    zeta : spectral oversampling factor (bins per subcarrier).
    mod_order : QAM constellation size.
    alpha : suppressor power fraction, the budget is ``alpha * ||x||^2``.
    lam : OOB/PAPR weight in [0, 1]; 0 is pure OOB suppression.
    R : CP samples reserved for synchronization (0 during the data phase).
    guard_bins : extra oversampled bins added on each side of the suppression band.
    """

    N: int = 64
    L: int = 16
    notch_start: int = 20
    notch_width: int = 10
    dc_disabled: bool = True
    zeta: int = 4
    mod_order: int = 4
    alpha: float = 0.25
    lam: float = 0.0
    R: int = 0
    guard_bins: int = 0

    def __post_init__(self):
        N, L, i, K = self.N, self.L, self.notch_start, self.notch_width
        if N < 2 or L < 0:
            raise ConfigurationError(f"need N >= 2 and L >= 0, got N={N}, L={L}")
        if L >= N:
            raise ConfigurationError(f"CP length L={L} must be smaller than N={N}")
        if K <= 0 or i < 0 or i + K > N - 1:
            raise ConfigurationError(
                f"notch {{{i + 1},...,{i + K}}} must be non-empty and lie inside 1..{N - 1}"
            )
        if not 0 <= 2 * self.R < L:
            raise ConfigurationError(f"reserved CP samples R={self.R} must satisfy 0 <= R < L/2")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lam={self.lam} outside [0, 1]")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha={self.alpha} must be non-negative")
        if self.zeta < 1:
            raise ConfigurationError(f"zeta={self.zeta} must be >= 1")
        if self.mod_order not in QAM_ORDERS:
            raise ConfigurationError(f"unsupported QAM order {self.mod_order}")
        if self.guard_bins < -((self.zeta * (K - 1)) // 2):
            raise ConfigurationError("guard_bins shrinks the suppression band to nothing")

    @property
    def frame_length(self) -> int:
        return self.N + self.L

    @property
    def notch_subcarriers(self) -> np.ndarray:
        return np.arange(self.notch_start + 1, self.notch_start + self.notch_width + 1)

    @property
    def active_subcarriers(self) -> np.ndarray:
        notch = set(self.notch_subcarriers.tolist())
        first = 1 if self.dc_disabled else 0
        return np.array([k for k in range(first, self.N) if k not in notch])

    @property
    def num_active(self) -> int:
        return self.active_subcarriers.size

    @property
    def bits_per_symbol(self) -> int:
        return self.num_active * int(math.log2(self.mod_order))

    def replace(self, **changes) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class LinearMaps:
    """Dense operators of the OFDM transmitter and receiver for one config.

    ``M`` selects active subcarriers, ``A`` inserts the CP, ``B`` removes it
    and ``F`` is the unitary N-point DFT. ``G = A F^H M`` maps a data vector
    to the transmitted frame.
    """

    M: np.ndarray
    A: np.ndarray
    B: np.ndarray
    F: np.ndarray
    G: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.F.shape[0]

    @property
    def L(self) -> int:
        return self.A.shape[0] - self.A.shape[1]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def dft_matrix(n: int) -> np.ndarray:
    """Unitary n-point DFT matrix."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def cp_insertion_matrix(N: int, L: int) -> np.ndarray:
    A = np.zeros((N + L, N))
    A[:L, N - L:] = np.eye(L)
    A[L:, :] = np.eye(N)
    return A


def cp_removal_matrix(N: int, L: int) -> np.ndarray:
    B = np.zeros((N, N + L))
    B[:, L:] = np.eye(N)
    return B


def build_maps(cfg: SystemConfig) -> LinearMaps:
    """Build (and cache) the linear maps of ``cfg``."""
    return _build_maps(cfg.N, cfg.L, tuple(cfg.active_subcarriers.tolist()))


@lru_cache(maxsize=32)
def _build_maps(N: int, L: int, active: tuple) -> LinearMaps:
    active = np.asarray(active)
    M = np.eye(N)[:, active]
    A = cp_insertion_matrix(N, L)
    B = cp_removal_matrix(N, L)
    F = dft_matrix(N)
    G = A @ F.conj().T @ M
    return LinearMaps(
        M=_readonly(M), A=_readonly(A), B=_readonly(B), F=_readonly(F),
        G=_readonly(G), active=_readonly(active),
    )


# ---------------------------------------------------------------------------
# QAM

QAM_ORDERS = (4, 16, 64)


def _pam_levels(order: int):
    side = math.isqrt(order)
    bits = int(math.log2(side))
    idx = np.arange(side)
    gray = idx ^ (idx >> 1)
    # level position j carries label gray[j]; position 0 is the largest amplitude
    amplitude = (side - 1) - 2 * idx
    label_to_amp = np.empty(side)
    label_to_amp[gray] = amplitude
    return side, bits, label_to_amp, gray


def qam_scale(order: int) -> float:
    """Amplitude divisor giving unit average symbol energy."""
    return math.sqrt(2 * (order - 1) / 3)


def qam_constellation(order: int) -> np.ndarray:
    """All constellation points, indexed by the integer value of their bit label."""
    bits = int(math.log2(order))
    labels = np.arange(order)
    as_bits = (labels[:, None] >> np.arange(bits - 1, -1, -1)) & 1
    return qam_modulate(as_bits.ravel(), order)


def _bits_to_ints(bits: np.ndarray, width: int) -> np.ndarray:
    weights = 1 << np.arange(width - 1, -1, -1)
    return bits.reshape(-1, width) @ weights


def qam_modulate(bits, order: int) -> np.ndarray:
    """Gray-mapped square QAM with unit average energy.

    The first half of each label drives the in-phase axis, the second half
    the quadrature axis. Bit 0 on an axis maps to the positive side, so
    ``00`` in 4-QAM is ``(1 + 1j) / sqrt(2)``.
    """
    if order not in QAM_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; choose from {QAM_ORDERS}")
    bits = np.asarray(bits, dtype=np.int64)
    k = int(math.log2(order))
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k}")
    side, half, label_to_amp, _ = _pam_levels(order)
    words = bits.reshape(-1, 2, half)
    i_lab = _bits_to_ints(words[:, 0, :], half)
    q_lab = _bits_to_ints(words[:, 1, :], half)
    if bits.ndim > 1 and bits.shape[-1] % k:
        raise ValueError(f"row length {bits.shape[-1]} is not a multiple of {k}")
    sym = (label_to_amp[i_lab] + 1j * label_to_amp[q_lab]) / qam_scale(order)
    if bits.ndim > 1:
        sym = sym.reshape(bits.shape[:-1] + (-1,))
    return sym


def qam_demodulate(symbols, order: int) -> np.ndarray:
    """Minimum-distance hard decision followed by Gray demapping."""
    if order not in QAM_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; choose from {QAM_ORDERS}")
    symbols = np.asarray(symbols)
    side, half, _, gray = _pam_levels(order)
    y = symbols.ravel() * qam_scale(order)

    def axis(v):
        pos = np.clip(np.rint(((side - 1) - v) / 2), 0, side - 1).astype(np.int64)
        lab = gray[pos]
        return (lab[:, None] >> np.arange(half - 1, -1, -1)) & 1

    out = np.concatenate([axis(y.real), axis(y.imag)], axis=1).ravel()
    if symbols.ndim > 1:
        return out.reshape(symbols.shape[:-1] + (-1,))
    return out


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2, size=shape, dtype=np.int64)


# ---------------------------------------------------------------------------
# modulation / demodulation

def ofdm_modulate(d, maps: LinearMaps) -> np.ndarray:
    """Return ``A F^H M d``; ``d`` may be a stack of data vectors (last axis)."""
    d = np.asarray(d)
    if d.shape[-1] != maps.M.shape[1]:
        raise ValueError(f"expected {maps.M.shape[1]} data symbols, got {d.shape[-1]}")
    return d @ maps.G.T


def ofdm_demodulate(r, maps: LinearMaps, h_freq, *, tol: float = 1e-12) -> np.ndarray:
    """CP removal, DFT and single-tap zero-forcing equalization.

    ``h_freq`` is the length-N channel frequency response seen by the data
    part. Near-zero responses on active subcarriers raise an
    :class:`EqualizationWarning`; the (unreliable) symbols are still returned.
    """
    r = np.asarray(r)
    h_freq = np.asarray(h_freq)
    if r.shape[-1] != maps.B.shape[1]:
        raise ValueError(f"expected frames of length {maps.B.shape[1]}, got {r.shape[-1]}")
    y = (r @ maps.B.T) @ maps.F.T
    h_act = h_freq[..., maps.active]
    if np.any(np.abs(h_act) < tol):
        warnings.warn("channel response vanishes on an active subcarrier", EqualizationWarning)
    with np.errstate(divide="ignore", invalid="ignore"):
        return y[..., maps.active] / h_act
