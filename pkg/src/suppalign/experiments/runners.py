"""Experiment runners.

Monte Carlo work is split into chunks of ``scenario.chunk_symbols`` symbols.
Chunk ``k`` of experiment ``e`` draws from its own generator seeded by
``(seed, e, k)``, so results do not depend on the number of workers or on
execution order. Within a chunk every sweep point sees the same channels
and data (common random numbers).
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..alignment import alignment_basis, alignment_residual
from ..analysis import (ber_curve, binomial_halfwidth, ccdf, horizontal_shift_db,
                        leakage_trial_block, measurement_bins, merge_psd, oob_reduction, papr,
                        papr_at_probability, psi_weights, psi_weights_bruteforce, welch_psd,
                        band_level_db)
from ..channel import draw_channel, toeplitz_channel
from ..ofdm import SystemConfig, build_maps, qam_modulate, random_bits
from ..oracles import projected_subgradient_joint
from ..suppressor import power_budget, solve_joint_batch, solve_lsqi_batch, spectral_operators, suppress
from .results import ResultTable
from .scenario import Scenario


def chunk_rng(seed: int, experiment: str, *key: int) -> np.random.Generator:
    tag = zlib.crc32(experiment.encode())
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, *map(int, key)]))


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _chunks(total: int, size: int):
    n = math.ceil(total / size)
    return [min(size, total - k * size) for k in range(n)]


def _table(scenario: Scenario, name: str) -> ResultTable:
    return ResultTable(scenario.name, name, scenario.seed, __version__)


# ---------------------------------------------------------------------------
# symbol-level chunk: shared by psd, tradeoff, power and ccdf

@dataclass(frozen=True)
class Point:
    alpha: float
    lam: float
    R: int = 0

    @classmethod
    def of(cls, d) -> "Point":
        return cls(float(d["alpha"]), float(d["lam"]), int(d.get("R", 0)))

    def axes(self) -> dict:
        return {"alpha": self.alpha, "lam": self.lam, "R": self.R}


@dataclass(frozen=True)
class _SymbolTask:
    system: SystemConfig
    points: tuple
    num_symbols: int
    symbols_per_channel: int
    seed: int
    experiment: str
    chunk: int
    stream: bool
    nperseg: int


def _symbol_chunk(task: _SymbolTask) -> dict:
    rng = chunk_rng(task.seed, task.experiment, task.chunk)
    base = task.system
    maps = build_maps(base)
    keys = ["plain", *task.points]
    frames = {k: [] for k in keys}
    paprs = {k: [] for k in keys}
    s_pow = {k: 0.0 for k in keys}
    x_pow = 0.0
    for n in _chunks(task.num_symbols, task.symbols_per_channel):
        H = toeplitz_channel(draw_channel(base.L + 1, rng), base.frame_length)
        d = qam_modulate(random_bits(rng, (n, base.bits_per_symbol)), base.mod_order)
        x = d @ maps.G.T
        x_pow += float(np.sum(np.abs(x) ** 2))
        frames["plain"].append(x)
        paprs["plain"].append(papr(x))
        bases = {}
        for p in task.points:
            if p.R not in bases:
                bases[p.R] = alignment_basis(maps.B, H, p.R)
            cfg = base.replace(alpha=p.alpha, lam=p.lam, R=p.R)
            t, _, sol = suppress(cfg, maps, bases[p.R], d)
            frames[p].append(t)
            paprs[p].append(papr(t))
            s_pow[p] += float(np.sum(sol.power_used))
    out = {"x_power": x_pow, "count": task.num_symbols, "papr": {}, "psd": {}, "s_power": s_pow}
    for k in keys:
        out["papr"][k] = np.concatenate(paprs[k])
        if task.stream:
            out["psd"][k] = welch_psd(np.concatenate(frames[k]).ravel(), task.nperseg)
    return out


def _run_symbols(scenario: Scenario, experiment: str, points, num_symbols, spc, *, stream, jobs):
    cfg = scenario.system
    sizes = _chunks(int(num_symbols), scenario.chunk_symbols)
    tasks = [
        _SymbolTask(cfg, tuple(points), n, int(spc), scenario.seed, experiment, k, stream,
                    cfg.zeta * cfg.N)
        for k, n in enumerate(sizes)
    ]
    parts = _map(_symbol_chunk, tasks, jobs)
    keys = ["plain", *points]
    merged = {
        "x_power": sum(p["x_power"] for p in parts),
        "count": sum(p["count"] for p in parts),
        "papr": {k: np.concatenate([p["papr"][k] for p in parts]) for k in keys},
        "s_power": {k: sum(p["s_power"][k] for p in parts) for k in keys},
    }
    if stream:
        merged["psd"] = {k: merge_psd(p["psd"][k] for p in parts) for k in keys}
    return merged


# ---------------------------------------------------------------------------

def run_psd_experiment(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """PSD of suppressed and plain streams plus notch-band summaries."""
    c = scenario.sections["psd"]
    points = [Point.of(p) for p in c["points"]]
    res = _run_symbols(scenario, "psd", points, c["num_symbols"], c["symbols_per_channel"],
                       stream=True, jobs=jobs)
    bins = measurement_bins(scenario.system)
    tab = _table(scenario, "psd")
    plain = res["psd"]["plain"]
    tab.add("notch_level_db", band_level_db(plain, bins), {"variant": "plain"})
    for k, est in res["psd"].items():
        ax = {"variant": "plain"} if k == "plain" else k.axes()
        for b, v in enumerate(est.power_db):
            tab.add("psd_db", v, {**ax, "bin": b})
    for p in points:
        est = res["psd"][p]
        tab.add("notch_level_db", band_level_db(est, bins), p.axes())
        tab.add("oob_reduction_db", oob_reduction(est, plain, bins), p.axes())
    return tab


def run_tradeoff_experiment(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """Mean OOB and PAPR reductions against ``lam`` at fixed ``alpha``."""
    c = scenario.sections["tradeoff"]
    points = [Point(float(c["alpha"]), float(lam)) for lam in c["lams"]]
    res = _run_symbols(scenario, "tradeoff", points, c["num_symbols"], c["symbols_per_channel"],
                       stream=True, jobs=jobs)
    bins = measurement_bins(scenario.system)
    tab = _table(scenario, "tradeoff")
    plain_papr = res["papr"]["plain"]
    tab.add("mean_papr_db", float(plain_papr.mean()), {"variant": "plain"})
    for p in points:
        diff = plain_papr - res["papr"][p]
        ax = {"alpha": p.alpha, "lam": p.lam}
        tab.add("oob_reduction_db", oob_reduction(res["psd"][p], res["psd"]["plain"], bins), ax)
        tab.add("mean_papr_db", float(res["papr"][p].mean()), ax)
        half = 1.96 * diff.std(ddof=1) / math.sqrt(diff.size) if diff.size > 1 else 0.0
        m = float(diff.mean())
        tab.add("mean_papr_reduction_db", m, ax, ci=(m - half, m + half))
    return tab


def run_power_utilization(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """Average suppressor power ``E||s||^2 / E||x||^2`` against ``alpha`` for each ``lam``."""
    c = scenario.sections["power"]
    points = [Point(float(a), float(lam)) for lam in c["lams"] for a in c["alphas"]]
    res = _run_symbols(scenario, "power", points, c["num_symbols"], c["symbols_per_channel"],
                       stream=False, jobs=jobs)
    tab = _table(scenario, "power")
    for p in points:
        tab.add("power_ratio", res["s_power"][p] / res["x_power"], {"alpha": p.alpha, "lam": p.lam})
    return tab


def _quantile_ci(samples, prob, z=2.576):
    x = np.sort(samples)
    n = x.size
    centre = n * (1 - prob)
    half = z * math.sqrt(n * prob * (1 - prob))
    lo = int(max(0, math.floor(centre - half)))
    hi = int(min(n - 1, math.ceil(centre + half)))
    return float(x[lo]), float(x[hi])


def run_papr_ccdf(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """PAPR CCDF curves and their level at the target probability."""
    c = scenario.sections["ccdf"]
    points = [Point.of(p) for p in c["points"]]
    prob = float(c["probability"])
    res = _run_symbols(scenario, "ccdf", points, c["num_symbols"], c["symbols_per_channel"],
                       stream=False, jobs=jobs)
    tab = _table(scenario, "ccdf")
    plain_level = papr_at_probability(res["papr"]["plain"], prob)
    for k, samples in res["papr"].items():
        ax = {"variant": "plain"} if k == "plain" else k.axes()
        level = papr_at_probability(samples, prob)
        tab.add("papr_db_at_prob", level, ax, ci=_quantile_ci(samples, prob))
        if k != "plain":
            tab.add("papr_reduction_db_at_prob", plain_level - level, ax)
        curve = ccdf(samples, min_prob=prob)
        for thr, pr in zip(curve.thresholds_db, curve.prob):
            tab.add("ccdf_prob", pr, {**ax, "threshold_db": float(thr)})
    return tab


# ---------------------------------------------------------------------------
# leakage

@dataclass(frozen=True)
class _LeakTask:
    system: SystemConfig
    sigma_e2: tuple
    num_symbols: int
    symbols_per_channel: int
    mode: str
    lam0_rule: str
    seed: int
    chunk: int


def _leak_chunk(task: _LeakTask):
    rng = chunk_rng(task.seed, f"leakage-{task.mode}", task.chunk)
    leak = np.zeros(len(task.sigma_e2))
    cf = np.zeros(len(task.sigma_e2))
    count = 0
    for n in _chunks(task.num_symbols, task.symbols_per_channel):
        l, k, c = leakage_trial_block(task.system, list(task.sigma_e2), 1, n, rng, task.mode,
                                      closed_form=task.mode == "lsqi", lam0_rule=task.lam0_rule)
        leak += l
        cf += c
        count += k
    return leak, cf, count


def run_leakage_validation(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """Closed-form against simulated leaked power (LSQI path) and simulated joint-mode leakage."""
    c = scenario.sections["leakage"]
    sig = tuple(float(s) for s in c["sigma_e2"])
    tab = _table(scenario, "leakage")
    runs = [("lsqi", scenario.system.replace(alpha=float(c["alpha"]), lam=0.0), c["num_trials"]),
            ("joint", scenario.system.replace(alpha=float(c["alpha"]), lam=float(c["joint_lam"])),
             c["joint_trials"])]
    for mode, cfg, total in runs:
        tasks = [_LeakTask(cfg, sig, n, int(c["symbols_per_channel"]), mode, c["lam0_rule"],
                           scenario.seed, k)
                 for k, n in enumerate(_chunks(int(total), scenario.chunk_symbols))]
        parts = _map(_leak_chunk, tasks, jobs)
        leak = sum(p[0] for p in parts)
        cf = sum(p[1] for p in parts)
        count = sum(p[2] for p in parts)
        for j, s in enumerate(sig):
            ax = {"sigma_e2": s, "alpha": cfg.alpha, "lam": cfg.lam}
            mc = leak[j] / count
            tab.add("xi_monte_carlo", mc, ax)
            tab.add("mse_over_leak_db", 10 * math.log10(s / mc), ax)
            if mode == "lsqi":
                xi = cf[j] / count
                tab.add("xi_closed_form", xi, ax)
                tab.add("closed_form_minus_mc_db", 10 * math.log10(xi / mc), ax)
    return tab


# ---------------------------------------------------------------------------
# BER

@dataclass(frozen=True)
class _BerTask:
    system: SystemConfig
    snr_db: tuple
    sigma_e2: float
    num_symbols: int
    symbols_per_channel: int
    seed: int
    point: int
    chunk: int


def _ber_chunk(task: _BerTask):
    rng = chunk_rng(task.seed, "ber", task.point, task.chunk)
    return ber_curve(task.system, task.snr_db, task.num_symbols, task.sigma_e2, rng,
                     symbols_per_channel=task.symbols_per_channel)


def _z_scores(e1, e2, n):
    p1, p2 = e1 / n, e2 / n
    pooled = (e1 + e2) / (2 * n)
    se = np.sqrt(np.maximum(2 * pooled * (1 - pooled) / n, 1e-300))
    return np.where(e1 == e2, 0.0, (p1 - p2) / se)


def run_ber(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """BER of the suppressed, plain and power-matched plain arms per SNR."""
    c = scenario.sections["ber"]
    snr = tuple(float(s) for s in c["snr_db"])
    tab = _table(scenario, "ber")
    combos = [(int(m), float(s)) for m in c["mod_orders"] for s in c["sigma_e2"]]
    for idx, (mod, sig) in enumerate(combos):
        cfg = scenario.system.replace(mod_order=mod, alpha=float(c["alpha"]), lam=float(c["lam"]))
        tasks = [_BerTask(cfg, snr, sig, n, int(c["symbols_per_channel"]), scenario.seed, idx, k)
                 for k, n in enumerate(_chunks(int(c["num_symbols"]), scenario.chunk_symbols))]
        parts = _map(_ber_chunk, tasks, jobs)
        curve = parts[0]
        for p in parts[1:]:
            curve = curve.merge(p)
        base = {"mod_order": mod, "sigma_e2": sig}
        for arm in curve.errors:
            ber = curve.ber(arm)
            half = binomial_halfwidth(ber, curve.bits)
            for s, b, h in zip(snr, ber, half):
                tab.add("ber", b, {**base, "arm": arm, "snr_db": s}, ci=(max(0.0, b - h), b + h))
        z = _z_scores(curve.errors["sa"], curve.errors["plain_matched"], curve.bits)
        tab.add("max_abs_z_sa_vs_matched", float(np.max(np.abs(z))), base)
        sa, plain = curve.ber("sa"), curve.ber("plain")
        try:
            shift = horizontal_shift_db(snr, plain, sa)
        except ValueError:
            shift = float("nan")
        tab.add("shift_db", shift, base)
        tab.add("sa_ber_at_max_snr", float(sa[-1]), base)
        nz = sa[sa > 0]
        tab.add("sa_monotone", float(np.all(np.diff(nz) < 0)) if nz.size > 1 else 1.0, base)
        tab.add("bits", float(curve.bits), base)
    return tab


# ---------------------------------------------------------------------------
# property suites

def run_properties(scenario: Scenario, jobs: int = 1) -> ResultTable:
    """Numerical invariants: alignment residual, LSQI budget activity, oracle gap, Psi weights."""
    c = scenario.sections["properties"]
    cfg = scenario.system
    maps = build_maps(cfg)
    tab = _table(scenario, "properties")
    rng = chunk_rng(scenario.seed, "properties", 0)

    worst = 0.0
    for _ in range(int(c["channels"])):
        H = toeplitz_channel(draw_channel(cfg.L + 1, rng), cfg.frame_length)
        basis = alignment_basis(maps.B, H)
        s = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
        leak = np.linalg.norm(maps.F @ (maps.B @ (H @ (basis.basis @ s))))
        worst = max(worst, leak / np.linalg.norm(s))
    tab.add("alignment_leak_ratio_max", worst)
    tab.add("alignment_residual_last", alignment_residual(basis, maps.B, H))

    n_lsqi = int(c["lsqi_instances"])
    spc = 100
    worst, binding = 0.0, 0
    for n in _chunks(n_lsqi, spc):
        H = toeplitz_channel(draw_channel(cfg.L + 1, rng), cfg.frame_length)
        basis = alignment_basis(maps.B, H)
        d = qam_modulate(random_bits(rng, (n, cfg.bits_per_symbol)), cfg.mod_order)
        ops = spectral_operators(cfg, maps, basis, d)
        eps = power_budget(float(rng.uniform(0.01, 0.5)), d @ maps.G.T)
        sol = solve_lsqi_batch(ops.F_d, ops.F_s, eps)
        b = sol.lagrange_multiplier > 0
        binding += int(b.sum())
        if b.any():
            worst = max(worst, float(np.max(np.abs(sol.power_used[b] - eps[b]) / eps[b])))
    tab.add("lsqi_budget_rel_err_max", worst)
    tab.add("lsqi_binding_instances", binding)

    small = SystemConfig(N=16, L=4, notch_start=5, notch_width=3, alpha=0.25, lam=0.5)
    sm = build_maps(small)
    Fd, Fs, X, Q, E, ref = [], [], [], [], [], []
    for _ in range(int(c["oracle_instances"])):
        H = toeplitz_channel(draw_channel(small.L + 1, rng), small.frame_length)
        basis = alignment_basis(sm.B, H)
        d = qam_modulate(random_bits(rng, (1, small.bits_per_symbol)), small.mod_order)
        ops = spectral_operators(small, sm, basis, d)
        x = d @ sm.G.T
        eps = power_budget(small.alpha, x)
        sol = solve_joint_batch(ops.F_d, ops.F_s, x, basis.basis, eps, small.lam)
        Fd.append(ops.F_d[0]), Fs.append(ops.F_s), X.append(x[0]), Q.append(basis.basis)
        E.append(eps[0])
        ref.append((1 - small.lam) * sol.objective_oob[0] + small.lam * sol.objective_papr[0])
    best, _ = projected_subgradient_joint(np.array(Fd), np.array(Fs), np.array(X), np.array(Q),
                                          np.array(E), small.lam)
    ref = np.array(ref)
    tab.add("joint_oracle_rel_gap_max", float(np.max(np.abs(ref - best) / best)))

    mismatches = 0
    for N in range(2, int(c["psi_max_N"]) + 1):
        for L in range(1, min(int(c["psi_max_L"]), N - 1) + 1):
            if not np.array_equal(psi_weights(N, L), psi_weights_bruteforce(N, L)):
                mismatches += 1
    tab.add("psi_mismatches", mismatches)
    return tab


RUNNERS = {
    "psd": run_psd_experiment,
    "tradeoff": run_tradeoff_experiment,
    "power": run_power_utilization,
    "ccdf": run_papr_ccdf,
    "leakage": run_leakage_validation,
    "ber": run_ber,
    "properties": run_properties,
}


def run_scenario(scenario: Scenario, jobs: int = 1, only=None) -> dict:
    """Run every experiment section of ``scenario``; returns ``name -> ResultTable``."""
    names = [e for e in scenario.experiments if only is None or e in only]
    return {name: RUNNERS[name](scenario, jobs) for name in names}
