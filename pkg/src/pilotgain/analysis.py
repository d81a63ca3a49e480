"""Noise-enhancement analysis of pilot designs.

The zero-forcing gain estimate has error covariance proportional to
``(D^H D)^{-1}``, so a pilot design is scored by the eigenvalues of that
inverse Gram matrix: per dimension and on average (trace / K), in dB.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import DEFAULT_RANK_TOL, DesignMatrix, RankDeficientError, numerical_rank

LOG10_E_DB = 10.0 * math.log10(math.e)


@dataclass(frozen=True, eq=False)
class NoiseEnhancementReport:
    """Spectrum of ``D^H D`` and the enhancement it implies.

    ``eigenvalues_gram`` is sorted descending and ``eigenvalues_inv[k]`` is
    ``1 / eigenvalues_gram[k]``.  When the Gram is singular
    (``condition_flag`` False) the inverse and dB fields are None.
    """

    eigenvalues_gram: np.ndarray
    eigenvalues_inv: np.ndarray | None
    per_dimension_db: np.ndarray | None
    average_db: float | None
    condition_flag: bool

    @property
    def k(self):
        return self.eigenvalues_gram.size

    def to_dict(self):
        def lst(a):
            return None if a is None else [float(v) for v in a]

        return {
            "k": self.k,
            "condition_flag": self.condition_flag,
            "average_db": self.average_db,
            "eigenvalues_gram": lst(self.eigenvalues_gram),
            "eigenvalues_inv": lst(self.eigenvalues_inv),
            "per_dimension_db": lst(self.per_dimension_db),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        """One row per dimension: ``index,lambda,lambda_inv,db``."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["index", "lambda", "lambda_inv", "db"])
        for i, lam in enumerate(self.eigenvalues_gram):
            if self.condition_flag:
                wr.writerow([i, _f(lam), _f(self.eigenvalues_inv[i]), _f(self.per_dimension_db[i])])
            else:
                wr.writerow([i, _f(lam), "", ""])
        return buf.getvalue()


def _f(x):
    return format(float(x), ".17g")


def noise_enhancement(d: DesignMatrix, rel_tol: float = DEFAULT_RANK_TOL) -> NoiseEnhancementReport:
    lam = np.linalg.eigvalsh(d.gram)[::-1].copy()
    ok = numerical_rank(d.d, rel_tol) == d.k and lam[-1] > rel_tol * lam[0]
    if not ok:
        return NoiseEnhancementReport(lam, None, None, None, False)
    inv = 1.0 / lam
    return NoiseEnhancementReport(lam, inv, 10.0 * np.log10(inv), float(10.0 * np.log10(np.sum(inv) / inv.size)), True)


def etf_gram_spectrum(q: int, k: int):
    """Squared-coherence ``c_d`` and Gram spectrum of an equiangular frame.

    For ``Q < K <= Q^2`` the Gram ``D^H D`` of an equiangular tight frame is
    ``c_d * ones + (1 - c_d) * I``: one eigenvalue ``1 + (K-1) c_d`` and
    ``K - 1`` eigenvalues ``1 - c_d`` (returned in that order).
    """
    if not (q >= 1 and q < k <= q * q):
        raise ValueError(f"need Q < K <= Q^2, got Q={q}, K={k}")
    c_d = (k - q) / (q * (k - 1))
    lam = np.full(k, 1.0 - c_d)
    lam[0] = 1.0 + (k - 1) * c_d
    return c_d, lam


def theoretical_avg_enhancement_db(q: int, k: int) -> float:
    """Average per-dimension noise enhancement (dB) of an equiangular frame.

    ``10 log10(Q/K^2 + Q (K-1)^2 / ((Q-1) K^2))``; at ``K = Q^2`` this is
    ``10 log10(1 + (Q-1)/Q^2)``, which tends to ``10 log10(e) / Q``.
    """
    if not (q >= 2 and q < k <= q * q):
        raise ValueError(f"need Q >= 2 and Q < K <= Q^2, got Q={q}, K={k}")
    return 10.0 * math.log10(q / k**2 + q * (k - 1) ** 2 / ((q - 1) * k**2))


def asymptotic_avg_enhancement_db(q: int) -> float:
    return LOG10_E_DB / q


def closed_form_Rz(d: DesignMatrix, sigma_e2: float, rel_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Estimation-noise covariance ``sigma_e2 (D^H D)^{-1}`` under isotropic error."""
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be non-negative")
    rank = numerical_rank(d.d, rel_tol)
    if rank < d.k:
        raise RankDeficientError(rank, d.k)
    inv = np.linalg.inv(d.gram)
    return sigma_e2 * 0.5 * (inv + inv.T)


def nmse(g_true, g_hat) -> float:
    g_true = np.asarray(g_true, dtype=float)
    g_hat = np.asarray(g_hat, dtype=float)
    if g_true.shape != g_hat.shape:
        raise ValueError("shape mismatch")
    den = float(np.sum(g_true**2))
    if den == 0:
        raise ValueError("NMSE undefined for an all-zero truth")
    return float(np.sum((g_hat - g_true) ** 2)) / den
