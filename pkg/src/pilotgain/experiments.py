"""Parameter sweeps and the Monte-Carlo estimation runner.

Everything here returns plain rows (lists of dicts) so that the CLI can
stream them to CSV and the tests can assert on them directly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import analysis, codebooks
from .channel import ScenarioConfig, exact_covariance, simulate_trial, trial_rng
from .estimator import estimate, r_hat_from_covariance
from .model import DEFAULT_RANK_TOL, CodebookKind, PilotCodebook, build_design_matrix


def max_workers(requested: int | None = None) -> int:
    """Worker count, capped by ``PILOTGAIN_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("PILOTGAIN_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def average_db(p: PilotCodebook):
    """Average noise enhancement of a codebook, None if ``D`` is rank deficient."""
    rep = analysis.noise_enhancement(build_design_matrix(p))
    return rep.average_db


# -- figures ----------------------------------------------------------------


def fig1_rows(q_values, seed=0, packing: codebooks.PackingConfig | None = None, workers=1):
    """Average enhancement at ``K = Q^2`` for Gaussian, packed and ideal codebooks."""
    packing = packing or codebooks.PackingConfig(seed=seed)

    def row(q):
        k = q * q
        gauss = codebooks.gen_gaussian_complex(q, k, seed)
        packed = codebooks.gen_grassmannian(q, k, packing)
        info = packed.info
        return {
            "q": q,
            "k": k,
            "gaussian_db": average_db(gauss),
            "packed_db": average_db(packed),
            "theoretical_db": analysis.theoretical_avg_enhancement_db(q, k),
            "asymptote_db": analysis.asymptotic_avg_enhancement_db(q),
            "packed_converged": info.converged,
            "packed_max_coherence": info.max_coherence,
            "welch_bound": info.welch_bound,
        }

    return _pmap(row, q_values, workers)


def fig2_rows(q=6, seed=0, packing: codebooks.PackingConfig | None = None):
    """Per-dimension enhancement at ``K = Q^2`` (dimensions sorted by Gram eigenvalue)."""
    packing = packing or codebooks.PackingConfig(seed=seed)
    k = q * q
    gauss = analysis.noise_enhancement(build_design_matrix(codebooks.gen_gaussian_complex(q, k, seed)))
    packed_cb = codebooks.gen_grassmannian(q, k, packing)
    packed = analysis.noise_enhancement(build_design_matrix(packed_cb))
    _, lam = analysis.etf_gram_spectrum(q, k)
    theory = 10 * np.log10(1 / lam)
    rows = []
    for i in range(k):
        rows.append(
            {
                "dimension": i + 1,
                "gaussian_db": None if gauss.per_dimension_db is None else float(gauss.per_dimension_db[i]),
                "packed_db": None if packed.per_dimension_db is None else float(packed.per_dimension_db[i]),
                "theoretical_db": float(theory[i]),
                "packed_converged": packed_cb.info.converged,
            }
        )
    return rows


FIG3_FAMILIES = ("theoretical", "grassmannian", "gaussian_complex", "gaussian_real", "random_phase")


def fig3_rows(q=6, k_values=None, seed=0, packing: codebooks.PackingConfig | None = None, workers=1):
    """Average enhancement versus ``K`` for the five codebook families.

    Families whose design matrix is rank deficient at a given ``K`` (real
    pilots beyond ``Q(Q+1)/2``, random phases beyond ``Q^2-Q+1``) get an
    empty cell.
    """
    packing = packing or codebooks.PackingConfig(seed=seed)
    if k_values is None:
        k_values = range(q, q * q + 1)

    def row(k):
        packed = codebooks.gen_grassmannian(q, k, packing)
        return {
            "q": q,
            "k": k,
            "theoretical": 0.0 if k <= q else analysis.theoretical_avg_enhancement_db(q, k),
            "grassmannian": average_db(packed),
            "gaussian_complex": average_db(codebooks.gen_gaussian_complex(q, k, seed)),
            "gaussian_real": average_db(codebooks.gen_gaussian_real(q, k, seed)),
            "random_phase": average_db(codebooks.gen_random_phase(q, k, seed)),
            "packed_converged": packed.info.converged,
            "packed_max_coherence": packed.info.max_coherence,
            "welch_bound": packed.info.welch_bound,
        }

    return _pmap(row, k_values, workers)


def theory_rows(q_values, k_values=None):
    """Closed-form equiangular-frame quantities over a ``(Q, K)`` grid.

    With ``k_values`` None every ``K`` in ``(Q, Q^2]`` is listed.
    """
    rows = []
    for q in q_values:
        ks = [k for k in (k_values or range(q + 1, q * q + 1)) if q < k <= q * q]
        for k in ks:
            c_d, lam = analysis.etf_gram_spectrum(q, k)
            rows.append(
                {
                    "q": q,
                    "k": k,
                    "welch_bound": codebooks.welch_bound(q, k),
                    "c_d": c_d,
                    "lambda_max": float(lam[0]),
                    "lambda_min": float(lam[-1]),
                    "average_db": analysis.theoretical_avg_enhancement_db(q, k),
                    "asymptote_db": analysis.asymptotic_avg_enhancement_db(q),
                }
            )
    return rows


# -- Monte-Carlo estimation -------------------------------------------------


@dataclass(frozen=True)
class SimulationSpec:
    m_values: tuple
    trials: int
    seed: int
    sigma_w2: float
    method: str = "NNLS"
    exact_covariance: bool = False
    assumed_sigma_w2: float | None = None
    active: int | None = None
    support_threshold: float = 1e-6
    max_iters: int | None = None


def _trial_gains(g, spec: SimulationSpec, trial: int):
    if spec.active is None:
        return np.asarray(g, dtype=float)
    # A separate stream keyed past the channel draws picks the active users.
    rng = trial_rng(spec.seed, 2**32 + trial)
    idx = rng.choice(len(g), size=spec.active, replace=False)
    out = np.zeros(len(g))
    out[idx] = np.asarray(g, dtype=float)[idx]
    return out


def run_trial(p: PilotCodebook, d, g, spec: SimulationSpec, m: int, trial: int):
    """Simulate and estimate one ``(M, trial)`` point; returns a CSV-ready row."""
    g_t = _trial_gains(g, spec, trial)
    if spec.exact_covariance:
        cov = exact_covariance(p, g_t, spec.sigma_w2)
    else:
        cfg = ScenarioConfig(g_t, m, spec.sigma_w2, spec.trials, spec.seed)
        cov = simulate_trial(p, cfg, trial).sample_cov
    assumed = spec.sigma_w2 if spec.assumed_sigma_w2 is None else spec.assumed_sigma_w2
    kw = {"max_iters": spec.max_iters} if spec.method == "NNLS" and spec.max_iters is not None else {}
    est = estimate(d, r_hat_from_covariance(cov, assumed), spec.method, **kw)
    thr = spec.support_threshold * max(float(np.max(g_t)), np.finfo(float).tiny)
    support_ok = bool(np.array_equal(est.g_hat > thr, g_t > 0))
    return {
        "m": m,
        "trial": trial,
        "nmse": analysis.nmse(g_t, est.g_hat),
        "residual_norm": est.residual_norm,
        "iterations": est.iterations,
        "active_set_size": est.active_set_size,
        "kkt_max_violation": est.kkt_max_violation,
        "converged": est.converged,
        "support_recovered": support_ok,
    }


def run_simulation(p: PilotCodebook, g, spec: SimulationSpec, workers: int = 1):
    """Run every ``(M, trial)`` pair; rows come back sorted by ``(M, trial)``."""
    g = np.asarray(g, dtype=float)
    if g.size != p.k:
        raise ValueError(f"{g.size} gains for K={p.k} users")
    if spec.active is not None and not (1 <= spec.active <= p.k):
        raise ValueError(f"active user count must be in [1, {p.k}]")
    if spec.active is None and not np.any(g > 0):
        raise ValueError("all gains are zero")
    d = build_design_matrix(p)
    jobs = [(m, t) for m in spec.m_values for t in range(spec.trials)]
    rows = _pmap(lambda mt: run_trial(p, d, g, spec, *mt), jobs, workers)
    return sorted(rows, key=lambda r: (r["m"], r["trial"]))


def summarize(rows):
    """Median / quartile NMSE and diagnostics per antenna count."""
    out = []
    for m in sorted({r["m"] for r in rows}):
        sel = [r for r in rows if r["m"] == m]
        nm = np.array([r["nmse"] for r in sel])
        q1, med, q3 = np.quantile(nm, [0.25, 0.5, 0.75])
        out.append(
            {
                "m": m,
                "trials": len(sel),
                "nmse_median": float(med),
                "nmse_q1": float(q1),
                "nmse_q3": float(q3),
                "support_recovery_rate": float(np.mean([r["support_recovered"] for r in sel])),
                "unconverged_fraction": float(np.mean([not r["converged"] for r in sel])),
            }
        )
    return out


def rank_table(q_values, seeds, rel_tol=DEFAULT_RANK_TOL):
    """Numerical rank of ``D`` at ``K = Q^2`` for the three random families."""
    rows = []
    for q in q_values:
        k = q * q
        for s in seeds:
            for kind in (CodebookKind.GAUSSIAN_COMPLEX, CodebookKind.GAUSSIAN_REAL, CodebookKind.RANDOM_PHASE):
                d = build_design_matrix(codebooks.generate(kind, q, k, s))
                rows.append({"q": q, "seed": s, "kind": kind.value, "rank": d.rank(rel_tol)})
    return rows
