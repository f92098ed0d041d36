"""Suppressing-signal design: LSQI for pure OOB suppression, SOCP for the joint problem."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import AlignmentBasis
from .ofdm import ConfigurationError, LinearMaps, SystemConfig
from .socp import SolverError, solve_batch

__all__ = [
    "LsqiError",
    "SolverError",
    "SpectralOperators",
    "SuppressorSolution",
    "assemble_transmit",
    "notch_bins",
    "oversampled_dft",
    "power_budget",
    "solve_joint",
    "solve_joint_batch",
    "solve_lsqi",
    "solve_lsqi_batch",
    "spectral_operators",
    "suppress",
]


class LsqiError(RuntimeError):
    """Bisection on the Lagrange multiplier lost its bracket."""


def oversampled_dft(zeta: int, N: int, length: int) -> np.ndarray:
    """``zeta*N x length`` matrix with entries ``exp(-j 2 pi k n / (zeta N))``.

    Rows are frequency bins spaced ``1/zeta`` of a subcarrier apart. The
    matrix is not normalized.
    """
    k = np.arange(zeta * N)
    n = np.arange(length)
    return np.exp(-2j * np.pi * np.outer(k, n) / (zeta * N))


def notch_bins(cfg: SystemConfig) -> np.ndarray:
    """Oversampled bins penalized by the suppressor.

    From the centre of the first notch subcarrier to the centre of the last
    one, widened by ``cfg.guard_bins`` on each side.
    """
    lo = cfg.zeta * (cfg.notch_start + 1) - cfg.guard_bins
    hi = cfg.zeta * (cfg.notch_start + cfg.notch_width) + cfg.guard_bins
    if hi < lo:
        raise ConfigurationError("empty suppression band")
    return np.arange(lo, hi + 1) % (cfg.zeta * cfg.N)


@dataclass(frozen=True, eq=False)
class SpectralOperators:
    """Adjacent-band interference ``I_K = F_d + F_s s``.

    ``F_d`` carries a leading batch axis when built from a stack of data vectors.
    """

    bins: np.ndarray
    F_K: np.ndarray
    F_d: np.ndarray
    F_s: np.ndarray


def spectral_operators(cfg: SystemConfig, maps: LinearMaps, basis, d) -> SpectralOperators:
    bins = notch_bins(cfg)
    F_K = oversampled_dft(cfg.zeta, cfg.N, cfg.frame_length)[bins]
    Q = basis.basis if isinstance(basis, AlignmentBasis) else np.asarray(basis)
    x = np.asarray(d) @ maps.G.T
    return SpectralOperators(bins=bins, F_K=F_K, F_d=x @ F_K.T, F_s=F_K @ Q)


@dataclass
class SuppressorSolution:
    """Result of one solve, or of a batch when built by the ``*_batch`` solvers.

    ``c`` is the suppressing signal in frame coordinates. ``lagrange_multiplier``
    is only set on the LSQI path.
    """

    s: np.ndarray
    c: np.ndarray
    eps: np.ndarray
    objective_oob: np.ndarray
    objective_papr: np.ndarray
    power_used: np.ndarray
    active_budget: np.ndarray
    iterations: np.ndarray
    lagrange_multiplier: np.ndarray | None = None
    converged: np.ndarray | None = None

    def __getitem__(self, idx) -> "SuppressorSolution":
        pick = lambda v: None if v is None else v[idx]
        return SuppressorSolution(
            s=self.s[idx], c=self.c[idx], eps=self.eps[idx],
            objective_oob=self.objective_oob[idx], objective_papr=self.objective_papr[idx],
            power_used=self.power_used[idx], active_budget=self.active_budget[idx],
            iterations=self.iterations[idx],
            lagrange_multiplier=pick(self.lagrange_multiplier), converged=pick(self.converged),
        )


def power_budget(alpha: float, x) -> np.ndarray | float:
    """``alpha * ||x||^2`` per frame (last axis)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    x = np.asarray(x)
    out = alpha * np.sum(np.abs(x) ** 2, axis=-1)
    return float(out) if out.ndim == 0 else out


def _frame_map(Q, W):
    Q = np.asarray(Q)
    return Q if W is None else np.asarray(W) @ Q


def _finish(s, Fd, Fs, x, Q, eps, iterations, lam0=None, converged=None):
    c = s @ Q.T
    power = np.sum(np.abs(s) ** 2, axis=-1)
    if x is None:
        papr_obj = np.full(s.shape[0], np.nan)
    else:
        papr_obj = np.abs(x + c).max(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        active = (eps > 0) & (np.abs(power - eps) <= 1e-4 * eps)
    return SuppressorSolution(
        s=s, c=c, eps=eps,
        objective_oob=np.linalg.norm(Fd + s @ Fs.T, axis=-1),
        objective_papr=papr_obj, power_used=power, active_budget=active,
        iterations=np.asarray(iterations), lagrange_multiplier=lam0, converged=converged,
    )


# ---------------------------------------------------------------------------
# LSQI

def solve_lsqi_batch(F_d, F_s, eps, *, P=None, x=None, rtol: float = 1e-6,
                     max_iter: int = 200) -> SuppressorSolution:
    """Minimize ``||F_d + F_s s||`` subject to ``||s||^2 <= eps`` for each row of ``F_d``.

    The unconstrained least-squares solution is returned when it fits the
    budget. Otherwise ``s(l0) = -(F_s^H F_s + l0 I)^{-1} F_s^H F_d`` and the
    multiplier ``l0`` is bisected until ``||s||`` is within ``rtol`` of
    ``sqrt(eps)`` from below. ``P`` (frame map) and ``x`` only feed the
    reported ``c`` and PAPR objective.
    """
    F_d = np.atleast_2d(np.asarray(F_d, dtype=complex))
    F_s = np.asarray(F_s, dtype=complex)
    nb, m = F_d.shape[0], F_s.shape[1]
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (nb,)).copy()
    if np.any(eps < 0):
        raise ValueError("eps must be non-negative")

    U, sv, Vh = np.linalg.svd(F_s, full_matrices=False)
    sv = np.where(sv > sv[0] * max(F_s.shape) * np.finfo(float).eps, sv, 0.0)
    b = F_d @ U.conj()  # rows of U^H F_d

    lam0 = np.zeros(nb)
    iters = np.zeros(nb, dtype=int)
    n_ls = _norm2(b, sv, lam0)
    bind = n_ls > eps
    lam0[bind & (eps == 0)] = np.inf
    todo = np.flatnonzero(bind & (eps > 0))
    if todo.size:
        bt, e = b[todo], eps[todo]
        lo, n_lo = np.zeros(todo.size), n_ls[todo]
        hi = np.full(todo.size, sv[0] ** 2)
        n_hi = _norm2(bt, sv, hi)
        for _ in range(64):
            grow = n_hi >= e
            if not grow.any():
                break
            hi[grow] *= 2
            n_hi[grow] = _norm2(bt[grow], sv, hi[grow])
        else:
            raise LsqiError("could not bracket the multiplier")
        it = np.zeros(todo.size, dtype=int)
        for _ in range(max_iter):
            r = np.flatnonzero(np.sqrt(n_hi) < np.sqrt(e) * (1 - rtol))
            if r.size == 0:
                break
            mid = 0.5 * (lo[r] + hi[r])
            n_mid = _norm2(bt[r], sv, mid)
            if np.any((n_mid > n_lo[r]) | (n_mid < n_hi[r])):
                raise LsqiError("||s(l0)|| is not monotone on the bracket")
            it[r] += 1
            over = n_mid > e[r]
            lo[r[over]], n_lo[r[over]] = mid[over], n_mid[over]
            hi[r[~over]], n_hi[r[~over]] = mid[~over], n_mid[~over]
        lam0[todo] = hi
        iters[todo] = it

    s = _coeffs(b, sv, lam0) @ Vh.conj()
    Q = np.zeros((0, m)) if P is None else np.asarray(P)
    return _finish(s, F_d, F_s, None if x is None else np.atleast_2d(x), Q, eps, iters, lam0=lam0)


def _coeffs(b, sv, l0):
    l0 = np.asarray(l0, dtype=float)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(sv > 0, sv / (sv**2 + l0), 0.0)
    g[np.isinf(l0[..., 0])] = 0.0
    return -g * b


def _norm2(b, sv, l0):
    return np.sum(np.abs(_coeffs(b, sv, l0)) ** 2, axis=-1)


def solve_lsqi(F_d, F_s, eps, **kwargs) -> SuppressorSolution:
    """Single-instance :func:`solve_lsqi_batch`; ``eps = inf`` gives the least-squares solution."""
    return solve_lsqi_batch(np.asarray(F_d)[None], F_s, eps, **kwargs)[0]


# ---------------------------------------------------------------------------
# joint OOB / PAPR

def solve_joint_batch(F_d, F_s, x, P, eps, lam, *, W=None, tol: float = 1e-7,
                      max_iter: int = 200, strict: bool = True) -> SuppressorSolution:
    """Minimize ``(1-lam)||F_d + F_s s||_2 + lam ||x + P s||_inf`` s.t. ``||s||^2 <= eps``.

    All rows share ``F_s`` and ``P`` (one channel). With ``strict`` a
    :class:`SolverError` is raised if any instance misses the gap tolerance;
    otherwise the ``converged`` flags report it.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    Q = _frame_map(P, W)
    F_d = np.atleast_2d(np.asarray(F_d, dtype=complex))
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (F_d.shape[0],)).copy()
    res = solve_batch(F_d, F_s, x, Q, eps, lam, tol=tol, max_iter=max_iter)
    if strict and not res.converged.all():
        bad = np.flatnonzero(~res.converged)
        raise SolverError(
            f"{bad.size} instance(s) did not converge in {max_iter} iterations",
            best_s=res.s[bad], gap=res.gap[bad],
        )
    return _finish(res.s, F_d, F_s, x, Q, eps, res.iterations, converged=res.converged)


def solve_joint(F_d, F_s, x, P, eps, lam, *, W=None, **kwargs) -> SuppressorSolution:
    return solve_joint_batch(np.asarray(F_d)[None], F_s, np.asarray(x)[None], P, eps, lam,
                             W=W, **kwargs)[0]


# ---------------------------------------------------------------------------

def assemble_transmit(x, c, alpha: float = 0.0, policy: str = "shared_budget") -> np.ndarray:
    """``t = x + c``, scaled by ``1/sqrt(1+alpha)`` under the shared-budget policy."""
    t = np.asarray(x) + np.asarray(c)
    if policy == "shared_budget":
        return t / np.sqrt(1.0 + alpha)
    if policy == "raw":
        return t
    raise ValueError(f"unknown transmit policy {policy!r}")


def suppress(cfg: SystemConfig, maps: LinearMaps, basis: AlignmentBasis, d,
             *, policy: str = "shared_budget", tol: float = 1e-7, strict: bool = True):
    """Suppressed frames for a stack of data vectors sent over one channel.

    Uses the LSQI path when ``cfg.lam == 0`` and the joint solver otherwise.
    Returns ``(t, x, solution)``.
    """
    d = np.atleast_2d(d)
    ops = spectral_operators(cfg, maps, basis, d)
    x = d @ maps.G.T
    eps = power_budget(cfg.alpha, x)
    Q = basis.basis
    if cfg.lam == 0:
        sol = solve_lsqi_batch(ops.F_d, ops.F_s, eps, P=Q, x=x)
    else:
        sol = solve_joint_batch(ops.F_d, ops.F_s, x, Q, eps, cfg.lam, tol=tol, strict=strict)
    return assemble_transmit(x, sol.c, cfg.alpha, policy), x, sol
