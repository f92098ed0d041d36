"""First-order reference solvers used to cross-check the suppressor.

They share no code with the interior-point and bisection paths and are
only meant for small instances.
"""
from __future__ import annotations

import numpy as np


def _project_ball(s, radius):
    n = np.linalg.norm(s, axis=-1)
    scale = np.minimum(1.0, radius / np.maximum(n, 1e-300))
    return s * scale[..., None]


def joint_objective(s, F_d, F_s, x, Q, lam):
    """``(1-lam)||F_d + F_s s|| + lam ||x + Q s||_inf`` for stacked instances."""
    r = F_d + np.einsum("bij,bj->bi", F_s, s)
    y = x + np.einsum("bij,bj->bi", Q, s)
    return (1 - lam) * np.linalg.norm(r, axis=1) + lam * np.abs(y).max(axis=1)


def projected_subgradient_joint(F_d, F_s, x, Q, eps, lam, *, epochs: int = 20,
                                steps: int = 2000):
    """Best objective value found by restarted projected subgradient descent.

    Each argument carries a leading instance axis (``F_s`` and ``Q`` are
    per instance). Every epoch restarts from the best iterate so far with
    steps ``D / sqrt(j)`` along the normalized subgradient, and halves ``D``
    (initially the ball radius) for the next epoch. Returns ``(best_value,
    best_s)``.
    """
    F_d, F_s, x, Q = (np.asarray(a, dtype=complex) for a in (F_d, F_s, x, Q))
    nb = F_d.shape[0]
    radius = np.sqrt(np.asarray(eps, dtype=float))
    rows = np.arange(nb)
    best_s = np.zeros((nb, F_s.shape[2]), dtype=complex)
    best = joint_objective(best_s, F_d, F_s, x, Q, lam)
    D = radius.copy()
    for _ in range(epochs):
        s = best_s.copy()
        for j in range(1, steps + 1):
            r = F_d + np.einsum("bij,bj->bi", F_s, s)
            y = x + np.einsum("bij,bj->bi", Q, s)
            nr = np.linalg.norm(r, axis=1)
            i = np.argmax(np.abs(y), axis=1)
            yi = y[rows, i]
            f = (1 - lam) * nr + lam * np.abs(yi)
            better = f < best
            best[better] = f[better]
            best_s[better] = s[better]
            g = np.zeros_like(s)
            if lam < 1:
                g += (1 - lam) * np.einsum("bij,bi->bj", F_s.conj(), r) / np.maximum(nr, 1e-300)[:, None]
            if lam > 0:
                g += lam * Q[rows, i].conj() * (yi / np.maximum(np.abs(yi), 1e-300))[:, None]
            gn = np.linalg.norm(g, axis=1)
            step = np.where(gn > 0, D / np.sqrt(j) / np.maximum(gn, 1e-300), 0.0)
            s = _project_ball(s - step[:, None] * g, radius)
        D = D / 2
    return best, best_s


def projected_gradient_lsqi(F_d, F_s, eps, *, iters: int = 20000):
    """Accelerated projected gradient on ``||F_d + F_s s||^2`` over the ball ``||s||^2 <= eps``.

    Returns the minimized norm ``||F_d + F_s s||`` and ``s``.
    """
    F_d = np.asarray(F_d, dtype=complex)
    F_s = np.asarray(F_s, dtype=complex)
    radius = np.sqrt(float(eps))
    L = 2 * np.linalg.norm(F_s, 2) ** 2
    s = np.zeros(F_s.shape[1], dtype=complex)
    z = s.copy()
    t = 1.0
    for _ in range(iters):
        grad = 2 * F_s.conj().T @ (F_d + F_s @ z)
        s_new = _project_ball(z - grad / L, radius)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = s_new + ((t - 1) / t_new) * (s_new - s)
        s, t = s_new, t_new
    return float(np.linalg.norm(F_d + F_s @ s)), s
