"""Large-scale gain estimators working on the vectorized covariance.

Both estimators act on the real-ified system: the unknown gains are real,
so ``r_hat ~ D theta`` is solved as ``[Re D; Im D] theta ~ [Re r; Im r]``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .model import DesignMatrix, DimensionError, RankDeficientError, numerical_rank, vectorize_covariance


class Method(str, enum.Enum):
    ZF = "ZF"
    NNLS = "NNLS"


@dataclass(frozen=True, eq=False)
class GainEstimate:
    """Estimated gains with solver diagnostics.

    ``active_set_size`` counts coordinates held at the zero bound (always 0
    for ZF).  ``kkt_max_violation`` is the largest violation of the
    non-negative least-squares optimality conditions; for ZF it is the
    largest normal-equation residual.
    """

    g_hat: np.ndarray
    residual_norm: float
    iterations: int
    active_set_size: int
    method: Method
    kkt_max_violation: float = 0.0
    converged: bool = True

    def to_dict(self, include_estimate=True):
        out = {
            "method": self.method.value,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "kkt_max_violation": self.kkt_max_violation,
            "active_set_size": self.active_set_size,
            "converged": self.converged,
        }
        if include_estimate:
            out["g_hat"] = [float(v) for v in self.g_hat]
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _realify(d: DesignMatrix, r_hat):
    r_hat = np.asarray(r_hat, dtype=np.complex128).reshape(-1)
    if r_hat.size != d.d.shape[0]:
        raise DimensionError(f"r_hat has length {r_hat.size}, expected Q^2={d.d.shape[0]}")
    return d.realified(), np.concatenate([r_hat.real, r_hat.imag]), r_hat


def estimate_zf(d: DesignMatrix, r_hat, rel_tol: float = 1e-9) -> GainEstimate:
    """Unconstrained estimate ``(D^H D)^{-1} D^H r_hat``.

    Computed as a least-squares solve on ``D`` rather than through the
    Gram matrix, which squares the condition number.

    Raises
    ------
    RankDeficientError
        If ``D`` does not have full column rank.
    ValueError
        If ``r_hat`` is not consistent with a Hermitian covariance, which
        shows up as a non-negligible imaginary part of the estimate.
    """
    rank = numerical_rank(d.d, rel_tol)
    if rank < d.k:
        raise RankDeficientError(rank, d.k)
    a, b, r_hat = _realify(d, r_hat)
    g_hat, *_ = np.linalg.lstsq(a, b, rcond=None)
    # Im(D^H r) vanishes for Hermitian r; its image under the inverse Gram
    # is the imaginary part the complex formula would have produced.
    im = np.linalg.solve(d.gram, (d.d.conj().T @ r_hat).imag)
    if np.linalg.norm(im) > 1e-6 * np.linalg.norm(g_hat) + 1e-12 * np.linalg.norm(r_hat):
        raise ValueError(f"estimate has imaginary residue {np.linalg.norm(im):.3e}; r_hat is not Hermitian")
    resid = b - a @ g_hat
    kkt = float(np.max(np.abs(a.T @ resid)))
    return GainEstimate(g_hat, float(np.linalg.norm(resid)), 1, 0, Method.ZF, kkt, True)


def nnls_active_set(a, b, kkt_tol=1e-10, max_iters=None):
    """Lawson-Hanson active-set solver for ``min ||a x - b||`` s.t. ``x >= 0``.

    Returns ``(x, iterations, converged)`` where ``iterations`` counts the
    least-squares subproblems solved.  On hitting ``max_iters`` the current
    (feasible) iterate is returned with ``converged=False``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[1]
    if max_iters is None:
        max_iters = 10 * n
    # Dual feasibility is judged relative to the problem scale.
    tol = kkt_tol * max(1.0, float(np.max(np.abs(a.T @ b), initial=0.0)))
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    # Columns whose positive multiplier is a rounding artefact: they cannot
    # leave the bound, so they are skipped until the iterate changes.
    blocked = np.zeros(n, dtype=bool)
    iters = 0
    while True:
        w = a.T @ (b - a @ x)
        cand = np.where(passive | blocked, -np.inf, w)
        j = int(np.argmax(cand))
        if cand[j] <= tol:
            return x, iters, True
        if iters >= max_iters:
            return x, iters, False
        passive[j] = True
        entering = True
        while True:
            iters += 1
            s = np.zeros(n)
            s[passive], *_ = np.linalg.lstsq(a[:, passive], b, rcond=None)
            if np.all(s[passive] > 0):
                x = s
                blocked[:] = False
                break
            if entering and s[j] <= 0:
                passive[j] = False
                blocked[j] = True
                break
            entering = False
            neg = passive & (s <= 0)
            step = x[neg] - s[neg]
            ratios = np.divide(x[neg], step, out=np.zeros_like(step), where=step > 0)
            alpha = float(np.min(ratios))
            x = x + alpha * (s - x)
            drop = passive & (x <= 0)
            drop[np.flatnonzero(neg)[np.argmin(ratios)]] = True
            x[drop] = 0.0
            passive &= ~drop
            blocked[:] = False
            if iters >= max_iters:
                return x, iters, False
            if not passive.any():
                break


def kkt_violation(a, b, x) -> float:
    """Largest violation of the NNLS optimality conditions at ``x >= 0``."""
    w = a.T @ (b - a @ x)  # negative gradient of 0.5 ||a x - b||^2
    free = x > 0
    viol = np.concatenate([np.abs(w[free]), np.maximum(w[~free], 0.0), np.maximum(-x, 0.0)])
    return float(np.max(viol, initial=0.0))


def estimate_nnls(d: DesignMatrix, r_hat, kkt_tol: float = 1e-10, max_iters: int | None = None) -> GainEstimate:
    """Non-negative least-squares estimate ``argmin_{theta >= 0} ||r_hat - D theta||``.

    No rank condition is needed, so this also covers overloaded designs
    with ``K > Q^2`` where only a few users are active.
    """
    a, b, _ = _realify(d, r_hat)
    x, iters, converged = nnls_active_set(a, b, kkt_tol, max_iters if max_iters is not None else 10 * d.k)
    resid = float(np.linalg.norm(b - a @ x))
    return GainEstimate(
        x,
        resid,
        iters,
        int(np.count_nonzero(x == 0)),
        Method.NNLS,
        kkt_violation(a, b, x),
        converged,
    )


def r_hat_from_covariance(cov, sigma_w2: float) -> np.ndarray:
    return vectorize_covariance(cov, sigma_w2).r


def build_r_hat(realization: ChannelRealization, sigma_w2: float) -> np.ndarray:
    """``vec(sample covariance) - vec(sigma_w2 I)`` for one realization."""
    return r_hat_from_covariance(realization.sample_cov, sigma_w2)


def estimate(d: DesignMatrix, r_hat, method="NNLS", **kw) -> GainEstimate:
    method = Method(method)
    if method is Method.ZF:
        return estimate_zf(d, r_hat, **kw)
    return estimate_nnls(d, r_hat, **kw)
