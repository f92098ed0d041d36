"""Bases of the subspace that the receiver discards together with the CP.

A suppressing signal ``c = P s`` with ``span(P) = ker(B H)`` reaches the
receiver entirely inside the CP window, for any coefficient vector ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateChannelError(np.linalg.LinAlgError):
    """``B H`` lost rank, e.g. for an all-zero channel draw."""


@dataclass(frozen=True, eq=False)
class AlignmentBasis:
    """Orthonormal kernel basis.

    ``P`` lives in the coordinates of the samples the suppressor may touch;
    ``W`` (``None`` in full mode) embeds them into the frame. Use
    :attr:`basis` for the effective ``(N+L) x m`` map ``W P``.
    """

    P: np.ndarray
    W: np.ndarray | None = None
    R: int = 0

    @property
    def mode(self) -> str:
        return "full" if self.W is None else f"partial({self.R})"

    @property
    def dim(self) -> int:
        return self.P.shape[1]

    @property
    def basis(self) -> np.ndarray:
        if self.W is None:
            return self.P
        return self.W @ self.P


def _kernel(K: np.ndarray, expected_rank: int) -> np.ndarray:
    _, sv, Vh = np.linalg.svd(K)
    tol = max(K.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    if rank < expected_rank:
        raise DegenerateChannelError(f"B H has rank {rank} < {expected_rank}")
    return Vh[rank:].conj().T


def null_basis(B, H) -> AlignmentBasis:
    """Last right singular vectors of ``B H``: an orthonormal basis of its kernel."""
    B = np.asarray(B)
    return AlignmentBasis(P=_kernel(B @ np.asarray(H), B.shape[0]))


def sync_selector(N: int, L: int, R: int) -> np.ndarray:
    """Columns of ``I_{N+L}`` for the samples the suppressor may modify.

    The first ``R`` CP samples and their cyclic images ``N .. N+R-1`` (0-based)
    are left untouched so that CP correlation still finds the symbol start.
    """
    if not 0 <= 2 * R < L:
        raise ValueError(f"R={R} must satisfy 0 <= R < L/2 (L={L})")
    keep = np.ones(N + L, dtype=bool)
    keep[:R] = False
    keep[N:N + R] = False
    return np.eye(N + L)[:, keep]


def null_basis_partial(B, H, W) -> AlignmentBasis:
    """Orthonormal basis of ``ker(B H W)``; dimension ``L - 2R``."""
    B, W = np.asarray(B), np.asarray(W)
    P = _kernel(B @ np.asarray(H) @ W, B.shape[0])
    R = (W.shape[0] - W.shape[1]) // 2
    return AlignmentBasis(P=P, W=W, R=R)


def alignment_basis(B, H, R: int = 0) -> AlignmentBasis:
    """Full-CP basis for ``R == 0``, partial-CP basis otherwise."""
    if R == 0:
        return null_basis(B, H)
    N = B.shape[0]
    L = B.shape[1] - N
    return null_basis_partial(B, H, sync_selector(N, L, R))


def alignment_residual(P, B, H, W=None) -> float:
    """``||B H (W) P||_F / ||H||_F``; zero for a perfectly aligned basis."""
    if isinstance(P, AlignmentBasis):
        Q = P.basis
    else:
        Q = np.asarray(P) if W is None else np.asarray(W) @ np.asarray(P)
    H = np.asarray(H)
    return float(np.linalg.norm(np.asarray(B) @ H @ Q) / np.linalg.norm(H))
