"""Batched primal-dual interior-point solver for the joint suppression problem.

Each instance ``b`` solves, over a complex coefficient vector ``s``::

    minimize    (1 - lam) * ||fd_b + Fs s||_2 + lam * ||x_b + Q s||_inf
    subject to  ||s||_2^2 <= eps_b

through its epigraph form, a second-order cone program in the variables
``(s, u, v)``::

    minimize    (1 - lam) u + lam v
    subject to  (u, fd_b + Fs s) in SOC,  (v, x_bi + Q_i s) in SOC for every i,
                (sqrt(eps_b), s) in SOC

All instances in a batch share ``Fs`` and ``Q`` (one channel realization)
and differ in ``fd``, ``x`` and ``eps``. Cones whose weight is zero are
dropped with their epigraph variable. Complex vectors are handled in the
real representation ``[Re s, Im s]``.

The method is an infeasible-start path-following scheme with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step, in the
conventions of the CVXOPT cone solvers: primal ``min c'x, Gx + s = h,
s >= 0``; dual ``max -h'z, G'z + c = 0, z >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    """The iteration cap was reached before the gap was certified.

    ``best_s`` is the last primal iterate (always feasible) and ``gap``
    the duality gap ``s'z`` at that point.
    """

    def __init__(self, msg, best_s=None, gap=None):
        super().__init__(msg)
        self.best_s = best_s
        self.gap = gap


@dataclass
class BatchResult:
    s: np.ndarray          # (B, m) complex
    objective: np.ndarray  # (B,) joint objective at s
    gap: np.ndarray        # primal-dual gap s'z
    iterations: np.ndarray
    converged: np.ndarray


# ---------------------------------------------------------------------------
# second-order cone algebra on (..., d) arrays, first entry is the "scalar" part

def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _jdot(a, b):
    return a[..., 0] * b[..., 0] - _dot(a[..., 1:], b[..., 1:])


def _jprod(a, b):
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = _dot(a, b)
    out[..., 1:] = a[..., :1] * b[..., 1:] + b[..., :1] * a[..., 1:]
    return out


def _jdiv(lam, r):
    """Solve ``lam o x = r`` for x."""
    det = _jdot(lam, lam)
    x = np.empty_like(r)
    x[..., 0] = (lam[..., 0] * r[..., 0] - _dot(lam[..., 1:], r[..., 1:])) / det
    x[..., 1:] = (r[..., 1:] - x[..., :1] * lam[..., 1:]) / lam[..., :1]
    return x


def _det(a):
    n1 = np.linalg.norm(a[..., 1:], axis=-1)
    return (a[..., 0] - n1) * (a[..., 0] + n1)


def _max_step(lam, d):
    """Largest t with ``lam + t d`` in the cone (``lam`` interior); inf if unbounded."""
    a0 = _det(lam)
    a1 = 2 * _jdot(lam, d)
    a2 = _jdot(d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = a1 * a1 - 4 * a2 * a0
        sq = np.sqrt(np.maximum(disc, 0.0))
        qq = -0.5 * (a1 + np.where(a1 >= 0, sq, -sq))
        r1 = qq / a2
        r2 = a0 / qq
        lin = np.where(a1 < 0, -a0 / a1, np.inf)
    r1 = np.where(np.isfinite(r1) & (r1 > 0), r1, np.inf)
    r2 = np.where(np.isfinite(r2) & (r2 > 0), r2, np.inf)
    quad = np.where(disc >= 0, np.minimum(r1, r2), np.inf)
    t = np.where(a2 == 0, lin, quad)
    # a direction along the cone axis never leaves it; guard the scalar part as well
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(d[..., 0] < 0, -lam[..., 0] / d[..., 0], np.inf)
    return np.minimum(t, t0)


class _Scaling:
    """Nesterov-Todd scaling ``W = beta (2 w w' - J)`` per cone, ``W z = W^{-1} s``."""

    def __init__(self, s, z):
        ns = np.sqrt(_det(s))
        nz = np.sqrt(_det(z))
        sb = s / ns[..., None]
        zb = z / nz[..., None]
        gamma = np.sqrt((1 + _dot(sb, zb)) / 2)
        zb[..., 1:] *= -1
        wbar = (sb + zb) / (2 * gamma[..., None])  # NT scaling point
        wbar[..., 0] += 1
        self.w = wbar / np.sqrt(2 * wbar[..., :1])  # reflection vector
        self.beta = np.sqrt(ns / nz)
        self.a = self.w.copy()
        self.a[..., 1:] *= -1  # J w

    def apply(self, v):
        """W v"""
        wv = _dot(self.w, v)
        out = 2 * wv[..., None] * self.w
        out[..., 0] -= v[..., 0]
        out[..., 1:] += v[..., 1:]
        return self.beta[..., None] * out

    def apply_inv(self, v):
        """W^{-1} v"""
        av = _dot(self.a, v)
        out = 2 * av[..., None] * self.a
        out[..., 0] -= v[..., 0]
        out[..., 1:] += v[..., 1:]
        return out / self.beta[..., None]


# ---------------------------------------------------------------------------

def _realmat(M: np.ndarray) -> np.ndarray:
    """Real (rows x 2m) map of ``s -> [Re(M s); Im(M s)]`` stacked per row pair."""
    return np.stack(
        [np.concatenate([M.real, -M.imag], axis=-1), np.concatenate([M.imag, M.real], axis=-1)],
        axis=-2,
    )


class _Cones:
    """Problem data laid out as groups of equal-dimension cones."""

    def __init__(self, Fs, Q, lam):
        r, m = Fs.shape
        n = Q.shape[0]
        m2 = 2 * m
        self.m2 = m2
        self.use_u = lam < 1.0
        self.use_v = lam > 0.0
        self.nvar = m2 + self.use_u + self.use_v
        iu = m2 if self.use_u else None
        iv = m2 + self.use_u if self.use_v else None
        self.iu, self.iv = iu, iv
        c = np.zeros(self.nvar)
        if self.use_u:
            c[iu] = 1.0 - lam
        if self.use_v:
            c[iv] = lam
        self.c = c

        groups = []  # (name, G block of shape (k, d, nvar))
        if self.use_u:
            d = 1 + 2 * r
            Gk = np.zeros((1, d, self.nvar))
            Gk[0, 0, iu] = -1.0
            Fr = _realmat(Fs)  # (r, 2, 2m)
            Gk[0, 1:1 + r, :m2] = -Fr[:, 0]
            Gk[0, 1 + r:, :m2] = -Fr[:, 1]
            groups.append(("oob", Gk))
        if self.use_v:
            Gk = np.zeros((n, 3, self.nvar))
            Gk[:, 0, iv] = -1.0
            Gk[:, 1:, :m2] = -_realmat(Q)
            groups.append(("papr", Gk))
            self._papr_setup(Q)
        Gk = np.zeros((1, 1 + m2, self.nvar))
        Gk[0, 1:, :m2] = -np.eye(m2)
        groups.append(("budget", Gk))
        self.groups = groups
        self.flat = [G.reshape(-1, self.nvar) for _, G in groups]
        self.gram = [
            None if name == "papr" else np.einsum("kdi,kdj->kij", G, G).reshape(G.shape[0], -1)
            for name, G in groups
        ]
        self.ncones = sum(G.shape[0] for _, G in groups)

    def h(self, fd, x, eps):
        out = []
        for name, G in self.groups:
            hk = np.zeros((fd.shape[0],) + G.shape[:2])
            if name == "oob":
                r = fd.shape[1]
                hk[:, 0, 1:1 + r] = fd.real
                hk[:, 0, 1 + r:] = fd.imag
            elif name == "papr":
                hk[:, :, 1] = x.real
                hk[:, :, 2] = x.imag
            else:
                hk[:, 0, 0] = np.sqrt(eps)
            out.append(hk)
        return out

    def Gx(self, xv):
        return [(xv @ Gf.T).reshape((-1,) + G.shape[:2]) for (_, G), Gf in zip(self.groups, self.flat)]

    def Gt(self, zs):
        return sum(zk.reshape(zk.shape[0], -1) @ Gf for zk, Gf in zip(zs, self.flat))

    def _papr_setup(self, Q):
        Qr = _realmat(Q)  # (n, 2, 2m): gradients of Re y_i and Im y_i
        gR, gI = Qr[:, 0], Qr[:, 1]
        outer = lambda u, v: np.einsum("ki,kj->kij", u, v).reshape(len(u), -1)
        self._papr_quad = np.concatenate([outer(gR, gR), outer(gR, gI) + outer(gI, gR), outer(gI, gI)])
        self._papr_lin = np.concatenate([gR, gI])

    def _papr_kkt(self, W, K):
        # per-cone W^{-2} = (1/beta^2) (I + 4|w|^2 a a' - 2 a w' - 2 w a'), a = J w
        a, w = W.a, W.w
        ib2 = (1 / W.beta**2)[..., None, None]
        aw = a[..., :, None] * w[..., None, :]
        M = 4 * _dot(w, w)[..., None, None] * a[..., :, None] * a[..., None, :]
        M -= 2 * (aw + aw.swapaxes(-1, -2))
        M += np.eye(3)
        M *= ib2
        m2, iv = self.m2, self.iv
        coef = np.concatenate([M[..., 1, 1], M[..., 1, 2], M[..., 2, 2]], axis=1)
        K[:, :m2, :m2] += (coef @ self._papr_quad).reshape(-1, m2, m2)
        # G_k = -[[0, e_v], [Qr_k, 0]] so the v/s cross terms keep a plus sign
        cross = np.concatenate([M[..., 0, 1], M[..., 0, 2]], axis=1) @ self._papr_lin
        K[:, iv, :m2] += cross
        K[:, :m2, iv] += cross
        K[:, iv, iv] += M[..., 0, 0].sum(axis=1)

    def kkt_matrix(self, scal):
        nb = scal[0].beta.shape[0]
        K = np.zeros((nb, self.nvar, self.nvar))
        for (name, G), gram, W in zip(self.groups, self.gram, scal):
            if name == "papr":
                self._papr_kkt(W, K)
                continue
            ib2 = 1 / W.beta**2
            K += (ib2 @ gram).reshape(nb, self.nvar, self.nvar)
            Gaw = np.stack([W.a[:, 0], W.w[:, 0]], axis=1) @ G[0]
            Ga, Gw = Gaw[:, :1], Gaw[:, 1:]
            coef = (4 * _dot(W.w, W.w) * ib2)[..., None]
            c2 = (2 * ib2)[..., None]
            # ib2 [4|w|^2 Ga Ga' - 2 Ga Gw' - 2 Gw Ga']
            U = np.concatenate([Ga, Gw], axis=1)
            V = np.concatenate([coef * Ga - c2 * Gw, -c2 * Ga], axis=1)
            K += U.transpose(0, 2, 1) @ V
        return K


def _initial_point(cones: _Cones, fd, x):
    nb = fd.shape[0]
    xv = np.zeros((nb, cones.nvar))
    if cones.use_u:
        xv[:, cones.iu] = 1.25 * np.linalg.norm(fd, axis=1) + 1e-3 * (1 + np.abs(x).max(axis=1))
    if cones.use_v:
        xv[:, cones.iv] = 1.25 * np.abs(x).max(axis=1) + 1e-3
    return xv


def solve_batch(fd, Fs, x, Q, eps, lam, *, tol=1e-7, feastol=1e-8, max_iter=200) -> BatchResult:
    """Solve a batch of joint problems sharing ``Fs`` and ``Q``.

    An instance stops once its primal-dual gap ``s'z`` is below
    ``tol * (1 + |objective|)`` and its residuals below ``feastol``.
    Instances still running after ``max_iter`` steps come back with
    ``converged = False``. Budgets too small to move the objective by more
    than a tenth of the tolerance return ``s = 0`` without iterating.
    """
    fd = np.atleast_2d(np.asarray(fd, dtype=complex))
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    Fs = np.asarray(Fs, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (fd.shape[0],)).copy()
    nb = fd.shape[0]
    cones = _Cones(Fs, Q, lam)
    c = cones.c

    xv = _initial_point(cones, fd, x)
    iters = np.zeros(nb, dtype=int)
    gap = np.zeros(nb)
    # Budgets so small that s = 0 is certifiably within tolerance: the
    # objective is Lipschitz in s, so it can drop by at most lip * sqrt(eps).
    lip = (1 - lam) * np.linalg.norm(Fs, 2) + lam * np.linalg.norm(Q, axis=1).max()
    f0 = (1 - lam) * np.linalg.norm(fd, axis=1) + lam * np.abs(x).max(axis=1)
    bound = lip * np.sqrt(np.maximum(eps, 0))
    trivial = bound <= 0.1 * tol * (1 + f0)
    gap[trivial] = bound[trivial]
    converged = trivial.copy()
    active = np.flatnonzero(~converged)

    # state of the active instances
    h_all = cones.h(fd, x, np.maximum(eps, 0))
    xa = xv[active]
    ha = [hk[active] for hk in h_all]
    sa = [hk - gk for hk, gk in zip(ha, cones.Gx(xa))]
    za = [np.zeros_like(sk) for sk in sa]
    for zk in za:
        zk[..., 0] = 1.0
    hnorm = np.sqrt(sum(np.sum(hk**2, axis=(1, 2)) for hk in ha))
    cnorm = max(1.0, np.linalg.norm(c))

    for _ in range(max_iter):
        if active.size == 0:
            break
        rx = cones.Gt(za) + c
        rz = [sk + gk - hk for sk, gk, hk in zip(sa, cones.Gx(xa), ha)]
        mu_gap = sum(np.sum(sk * zk, axis=(1, 2)) for sk, zk in zip(sa, za))
        pcost = xa @ c
        pres = np.sqrt(sum(np.sum(r**2, axis=(1, 2)) for r in rz)) / np.maximum(1.0, hnorm)
        dres = np.linalg.norm(rx, axis=1) / cnorm
        done = (mu_gap <= tol * (1 + np.abs(pcost))) & (pres <= feastol) & (dres <= feastol)
        gap[active] = mu_gap
        xv[active] = xa
        if done.any():
            converged[active[done]] = True
            keep = ~done
            active = active[keep]
            xa, rx = xa[keep], rx[keep]
            ha = [hk[keep] for hk in ha]
            sa = [sk[keep] for sk in sa]
            za = [zk[keep] for zk in za]
            rz = [r[keep] for r in rz]
            mu_gap = mu_gap[keep]
            hnorm = hnorm[keep]
            if active.size == 0:
                break
        iters[active] += 1

        scal = [_Scaling(sk, zk) for sk, zk in zip(sa, za)]
        lmb = [W.apply(zk) for W, zk in zip(scal, za)]
        K = cones.kkt_matrix(scal)
        mu = mu_gap / cones.ncones

        def direction(r3):
            q = [lk_r for lk_r in (_jdiv(lk, rk) for lk, rk in zip(lmb, r3))]
            v1 = [W.apply_inv(W.apply_inv(r) + qk) for W, r, qk in zip(scal, rz, q)]
            rhs = -rx - cones.Gt(v1)
            dx = np.linalg.solve(K, rhs[..., None])[..., 0]
            gdx = cones.Gx(dx)
            dz_s = [W.apply_inv(g + r) + qk for W, g, r, qk in zip(scal, gdx, rz, q)]
            ds_s = [qk - dk for qk, dk in zip(q, dz_s)]
            return dx, ds_s, dz_s

        def steplen(ds_s, dz_s):
            t = np.full(active.size, np.inf)
            for lk, a, b in zip(lmb, ds_s, dz_s):
                t = np.minimum(t, _max_step(lk, a).min(axis=1))
                t = np.minimum(t, _max_step(lk, b).min(axis=1))
            return t

        r3 = [-_jprod(lk, lk) for lk in lmb]
        _, ds_a, dz_a = direction(r3)
        alpha = np.minimum(1.0, steplen(ds_a, dz_a))
        sigma = (1 - alpha) ** 3
        r3 = []
        for lk, a, b in zip(lmb, ds_a, dz_a):
            rk = -_jprod(lk, lk) - _jprod(a, b)
            rk[..., 0] += (sigma * mu)[:, None]
            r3.append(rk)
        dx, ds_s, dz_s = direction(r3)
        alpha = np.minimum(1.0, 0.99 * steplen(ds_s, dz_s))
        xa = xa + alpha[:, None] * dx
        sa = [sk + alpha[:, None, None] * W.apply(d) for sk, W, d in zip(sa, scal, ds_s)]
        za = [zk + alpha[:, None, None] * W.apply_inv(d) for zk, W, d in zip(za, scal, dz_s)]
    else:
        if active.size:
            xv[active] = xa
            gap[active] = sum(np.sum(sk * zk, axis=(1, 2)) for sk, zk in zip(sa, za))

    s = xv[:, : cones.m2 // 2] + 1j * xv[:, cones.m2 // 2: cones.m2]
    s[trivial] = 0.0
    objective = np.zeros(nb)
    if cones.use_u:
        objective += (1 - lam) * np.linalg.norm(fd + s @ Fs.T, axis=1)
    if cones.use_v:
        objective += lam * np.abs(x + s @ Q.T).max(axis=1)
    return BatchResult(s=s, objective=objective, gap=gap, iterations=iters, converged=converged)
