"""Core matrix types: pilot codebooks, the covariance design matrix and vec().

Conventions
-----------
``vec`` stacks columns (column-major / Fortran order), so for a ``Q x Q``
matrix ``A`` the entry ``A[i, j]`` lands at index ``i + j*Q``.  With this
ordering ``vec(p p^H) == kron(conj(p), p)``, which is what makes the
design matrix columns Kronecker products.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np

#: Upper bound on ``Q**2 * K`` elements for a design matrix.
DEFAULT_ELEMENT_BUDGET = 10**8

UNIT_NORM_TOL = 1e-12
GRAM_TOL = 1e-12
DEFAULT_RANK_TOL = 1e-9


class PilotGainError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(PilotGainError, ValueError):
    pass


class RankDeficientError(PilotGainError, np.linalg.LinAlgError):
    """Raised when a solve needs a full-column-rank design matrix."""

    def __init__(self, rank: int, k: int):
        super().__init__(f"design matrix has rank {rank} < K={k}")
        self.rank = rank
        self.k = k


class CodebookKind(str, enum.Enum):
    GAUSSIAN_COMPLEX = "GaussianComplex"
    GAUSSIAN_REAL = "GaussianReal"
    RANDOM_PHASE = "RandomPhase"
    VANDERMONDE = "Vandermonde"
    GRASSMANNIAN = "Grassmannian"
    EXTERNAL = "External"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PilotCodebook:
    """A ``Q x K`` complex pilot matrix, one unit-norm column per user.

    Construction validates the invariants of ``kind``; use
    :meth:`from_matrix` with ``normalize=True`` to column-normalize
    arbitrary input first.

    ``info`` carries generator diagnostics (e.g. packing convergence) and
    does not take part in validation.
    """

    entries: np.ndarray
    kind: CodebookKind = CodebookKind.EXTERNAL
    info: Any = field(default=None, compare=False)

    def __post_init__(self):
        p = np.asarray(self.entries)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise DimensionError(f"pilot matrix must be 2-D with Q, K >= 1, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("pilot matrix has non-finite entries")
        kind = CodebookKind(self.kind)
        p = p.astype(np.complex128)
        norms = np.linalg.norm(p, axis=0)
        bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
        if np.any(bad):
            raise ValueError(
                f"pilot columns {np.flatnonzero(bad).tolist()} are not unit norm "
                f"(max deviation {np.max(np.abs(norms - 1.0)):.3e})"
            )
        if kind is CodebookKind.GAUSSIAN_REAL and np.any(p.imag != 0):
            raise ValueError("GaussianReal codebook has non-zero imaginary parts")
        if kind is CodebookKind.RANDOM_PHASE:
            q = p.shape[0]
            if np.max(np.abs(np.abs(p) - 1 / np.sqrt(q))) > UNIT_NORM_TOL:
                raise ValueError("RandomPhase codebook entries must have modulus 1/sqrt(Q)")
        object.__setattr__(self, "entries", _frozen(p))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "_column_norms", _frozen(norms))

    @classmethod
    def from_matrix(cls, p, kind=CodebookKind.EXTERNAL, normalize=False, info=None):
        p = np.asarray(p, dtype=np.complex128)
        if normalize:
            if p.ndim != 2:
                raise DimensionError(f"pilot matrix must be 2-D, got shape {p.shape}")
            norms = np.linalg.norm(p, axis=0)
            if np.any(norms == 0):
                raise ValueError("cannot normalize a zero pilot column")
            p = p / norms
        return cls(p, kind, info)

    @property
    def q(self) -> int:
        return self.entries.shape[0]

    @property
    def k(self) -> int:
        return self.entries.shape[1]

    @property
    def column_norms(self) -> np.ndarray:
        return self._column_norms

    def __repr__(self):
        return f"PilotCodebook(q={self.q}, k={self.k}, kind={self.kind.value})"


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """``Q^2 x K`` matrix mapping gains to the vectorized noise-free covariance.

    Column ``k`` is ``kron(conj(p_k), p_k) == vec(p_k p_k^H)``.  ``gram`` is
    the real matrix ``D^H D`` which equals ``|P^H P|**2`` entrywise.
    """

    d: np.ndarray
    gram: np.ndarray
    source: PilotCodebook

    @property
    def q(self) -> int:
        return self.source.q

    @property
    def k(self) -> int:
        return self.source.k

    def realified(self) -> np.ndarray:
        """Stack real and imaginary parts into a ``2 Q^2 x K`` real matrix."""
        return np.vstack([self.d.real, self.d.imag])

    def rank(self, rel_tol: float = DEFAULT_RANK_TOL) -> int:
        return numerical_rank(self.d, rel_tol)


@dataclass(frozen=True, eq=False)
class VecSystem:
    r_y: np.ndarray
    r_w: np.ndarray
    r: np.ndarray


def kron_columns(p: np.ndarray) -> np.ndarray:
    """Columnwise ``kron(conj(p_k), p_k)`` for a ``Q x K`` array."""
    p = np.asarray(p)
    q, k = p.shape
    return (p.conj()[:, None, :] * p[None, :, :]).reshape(q * q, k)


def build_design_matrix(p: PilotCodebook, element_budget: int = DEFAULT_ELEMENT_BUDGET) -> DesignMatrix:
    """Build ``D`` for codebook ``p`` and its real Gram matrix.

    Raises
    ------
    DimensionError
        If ``Q**2 * K`` exceeds ``element_budget``.
    """
    q, k = p.q, p.k
    if q * q * k > element_budget:
        raise DimensionError(f"design matrix of {q * q}x{k} exceeds element budget {element_budget}")
    d = kron_columns(p.entries)
    g = d.conj().T @ d
    if np.max(np.abs(g.imag), initial=0.0) >= GRAM_TOL:
        raise FloatingPointError(f"Gram matrix imaginary residue {np.max(np.abs(g.imag)):.3e}")
    gram = g.real
    pp = p.entries.conj().T @ p.entries
    expected = np.abs(pp) ** 2
    dev = np.max(np.abs(gram - expected))
    if dev >= GRAM_TOL:
        raise FloatingPointError(f"Gram matrix deviates from |P^H P|^2 by {dev:.3e}")
    # Symmetrize so downstream eigensolvers see an exactly symmetric matrix.
    gram = 0.5 * (gram + gram.T)
    return DesignMatrix(_frozen(d), _frozen(gram), p)


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, q: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if q is None:
        q = int(round(np.sqrt(v.size)))
    if q * q != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(q, q, order="F")


def noise_vector(q: int, sigma_w2: float) -> np.ndarray:
    """``vec(sigma_w2 * I_Q)``: ``sigma_w2`` at every ``(Q+1)``-th index."""
    r_w = np.zeros(q * q, dtype=np.complex128)
    r_w[:: q + 1] = sigma_w2
    return r_w


def vectorize_covariance(r: np.ndarray, sigma_w2: float, herm_tol: float = 1e-9) -> VecSystem:
    """Vectorize a covariance and subtract the noise floor.

    >>> vectorize_covariance(np.diag([3.0, 1.0]), 1.0).r.real
    array([2., 0., 0., 0.])
    """
    r = np.asarray(r, dtype=np.complex128)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionError(f"covariance must be square, got shape {r.shape}")
    if sigma_w2 < 0:
        raise ValueError("noise variance must be non-negative")
    scale = max(np.max(np.abs(r), initial=0.0), np.finfo(float).tiny)
    if np.max(np.abs(r - r.conj().T)) > herm_tol * scale:
        raise ValueError("covariance is not Hermitian")
    r_y = vec(r).copy()
    r_w = noise_vector(r.shape[0], sigma_w2)
    return VecSystem(_frozen(r_y), _frozen(r_w), _frozen(r_y - r_w))


def numerical_rank(m: np.ndarray, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Count singular values above ``rel_tol`` times the largest one."""
    m = np.asarray(m)
    if m.size == 0:
        raise DimensionError("numerical rank of an empty matrix")
    try:
        s = np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"SVD did not converge for {m.shape} matrix") from exc
    if s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))
