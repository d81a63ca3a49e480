"""Pilot codebook generators, coherence certification and the codebook file format."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .model import CodebookKind, DimensionError, PilotCodebook, kron_columns

__all__ = [
    "CoherenceReport",
    "PackingConfig",
    "PackingInfo",
    "welch_bound",
    "gen_gaussian_complex",
    "gen_gaussian_real",
    "gen_random_phase",
    "gen_vandermonde",
    "gen_grassmannian",
    "generate",
    "coherence_report",
    "format_codebook",
    "parse_codebook",
    "write_codebook",
    "read_codebook",
]


def _check_dims(q, k):
    if int(q) != q or int(k) != k or q < 1 or k < 1:
        raise DimensionError(f"need integer q >= 1 and k >= 1, got q={q}, k={k}")
    return int(q), int(k)


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def welch_bound(q: int, k: int) -> float:
    """Lower bound on the coherence of ``k`` unit vectors in ``C^q`` (0 if ``k <= q``)."""
    if k <= q:
        return 0.0
    return float(np.sqrt((k - q) / (q * (k - 1))))


def _normalize_columns(p):
    return p / np.linalg.norm(p, axis=0)


def _gaussian_complex_matrix(rng, q, k):
    return _normalize_columns(rng.standard_normal((q, k)) + 1j * rng.standard_normal((q, k)))


def gen_gaussian_complex(q: int, k: int, seed: int = 0) -> PilotCodebook:
    """Draw i.i.d. CN(0, 1) entries and normalize every column."""
    q, k = _check_dims(q, k)
    p = _gaussian_complex_matrix(_rng(seed), q, k)
    return PilotCodebook(p, CodebookKind.GAUSSIAN_COMPLEX)


def gen_gaussian_real(q: int, k: int, seed: int = 0) -> PilotCodebook:
    q, k = _check_dims(q, k)
    p = _normalize_columns(_rng(seed).standard_normal((q, k)))
    return PilotCodebook(p.astype(np.complex128), CodebookKind.GAUSSIAN_REAL)


def gen_random_phase(q: int, k: int, seed: int = 0) -> PilotCodebook:
    """Constant-modulus pilots ``exp(i theta) / sqrt(q)`` with uniform phases."""
    q, k = _check_dims(q, k)
    theta = _rng(seed).uniform(0.0, 2 * np.pi, size=(q, k))
    return PilotCodebook(np.exp(1j * theta) / np.sqrt(q), CodebookKind.RANDOM_PHASE)


_VANDERMONDE_CANDIDATES = 8


def _stratified_generators(rng, q):
    # One draw per equal-width stratum keeps moduli and phases distinct and
    # spread out.
    moduli = 0.5 + 1.5 * (np.arange(q) + rng.random(q)) / q
    phases = 2 * np.pi * (np.arange(q) + rng.random(q)) / q
    return rng.permutation(moduli) * np.exp(1j * phases)


def _vandermonde_matrix(a, k):
    return _normalize_columns(a[:, None] ** np.arange(k)[None, :])


def _default_generators(q, k, seed):
    # High powers make D badly conditioned for unlucky draws; keep the
    # candidate whose D has the largest smallest singular value.
    rng = _rng(seed)
    best, best_s = None, -1.0
    for _ in range(_VANDERMONDE_CANDIDATES):
        a = _stratified_generators(rng, q)
        s_min = np.linalg.svd(kron_columns(_vandermonde_matrix(a, k)), compute_uv=False)[-1]
        if s_min > best_s:
            best, best_s = a, s_min
    return best


def gen_vandermonde(q: int, k: int, generators=None, seed: int = 0) -> PilotCodebook:
    """Vandermonde pilots: row ``i`` is ``a_i**0, a_i**1, ..., a_i**(k-1)``.

    Parameters
    ----------
    generators : array_like of complex, shape (q,), optional
        Pairwise-distinct nodes ``a_i``.  Drawn from ``seed`` when omitted:
        moduli in [0.5, 2] and phases in [0, 2 pi), one per stratum, best
        of 8 such draws by the smallest singular value of ``D``.

    Columns are normalized afterwards; that rescales the columns of ``D``
    and leaves its rank unchanged.
    """
    q, k = _check_dims(q, k)
    if k > q * q:
        raise DimensionError(f"Vandermonde construction needs k <= q^2, got k={k} > {q * q}")
    if generators is None:
        a = _default_generators(q, k, seed)
    else:
        a = np.asarray(generators, dtype=np.complex128).reshape(-1)
        if a.size != q:
            raise DimensionError(f"need {q} generators, got {a.size}")
    if np.any(a == 0):
        raise ValueError("generators must be non-zero")
    if np.unique(a).size != a.size:
        raise ValueError("generators must be pairwise distinct")
    return PilotCodebook(_vandermonde_matrix(a, k), CodebookKind.VANDERMONDE, info={"generators": a})


@dataclass(frozen=True)
class PackingConfig:
    """Settings for :func:`gen_grassmannian`.

    A restart stops once its best coherence is within ``tol`` of the Welch
    bound, or once the iterate has stalled: the Gram matrix moved less than
    ``tol`` (Frobenius) over the last 100 iterations.

    With ``polish`` enabled, a restart whose coherence gets within
    ``polish_gap`` of the Welch bound is refined once by nonlinear least
    squares on the equiangularity conditions.
    """

    max_iters: int = 20000
    tol: float = 1e-7
    seed: int = 0
    restarts: int = 8
    polish: bool = True
    polish_gap: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1 or self.tol <= 0 or self.seed < 0:
            raise ValueError(f"invalid packing configuration {self}")


@dataclass(frozen=True)
class PackingInfo:
    converged: bool
    iterations: int
    restart: int
    max_coherence: float
    welch_bound: float
    history: np.ndarray = field(repr=False)

    @property
    def gap(self) -> float:
        return self.max_coherence - self.welch_bound


_CHECK_EVERY = 100


def _equiangular_polish(p, mu, max_nfev=200):
    """Solve ``|p_i^H p_j|^2 = mu^2`` and ``|p_i|^2 = 1`` by least squares.

    Alternating projection approaches equiangular frames only sublinearly
    when they form a continuous family (e.g. 9 lines in C^3); a few
    trust-region steps from a nearby iterate finish the job.
    """
    q, k = p.shape
    iu, ju = np.triu_indices(k, 1)
    n = iu.size
    rows = np.arange(n)
    cols = np.arange(k)

    def unpack(x):
        return (x[: q * k] + 1j * x[q * k :]).reshape(q, k)

    def fun(x):
        pp = unpack(x)
        g = pp.conj().T @ pp
        return np.concatenate([np.abs(g[iu, ju]) ** 2 - mu**2, np.sum(np.abs(pp) ** 2, axis=0) - 1.0])

    def jac(x):
        pp = unpack(x)
        gij = (pp.conj().T @ pp)[iu, ju]
        jm = np.zeros((n + k, 2 * q * k))
        for r in range(q):
            re, im = r * k, q * k + r * k
            t = 2 * gij * pp[r, iu]  # d/d p_j
            s = 2 * np.conj(gij) * pp[r, ju]  # d/d p_i
            jm[rows, re + ju] += t.real
            jm[rows, im + ju] += t.imag
            jm[rows, re + iu] += s.real
            jm[rows, im + iu] += s.imag
            jm[n + cols, re + cols] = 2 * pp[r].real
            jm[n + cols, im + cols] = 2 * pp[r].imag
        return jm

    x0 = np.concatenate([p.real.ravel(), p.imag.ravel()])
    res = least_squares(fun, x0, jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return _normalize_columns(unpack(res.x))


def _max_coherence(p):
    mag = np.abs(p.conj().T @ p)
    np.fill_diagonal(mag, 0.0)
    return mag.max()


def _pack_once(rng, q, k, cfg, mu):
    p = _gaussian_complex_matrix(rng, q, k)
    off = ~np.eye(k, dtype=bool)
    scale = np.sqrt(k / q)
    best, best_c = p, np.inf
    checkpoint = None
    history = np.empty(cfg.max_iters)
    converged = False
    polished = not cfg.polish
    it = 0
    while it < cfg.max_iters:
        g = p.conj().T @ p
        mag = np.abs(g)
        c = mag[off].max()
        if c < best_c:
            best, best_c = p, c
        history[it] = best_c
        it += 1
        if best_c - mu <= cfg.tol:
            converged = True
            break
        if not polished and best_c - mu <= cfg.polish_gap:
            polished = True
            cand = _equiangular_polish(best, mu)
            cand_c = _max_coherence(cand)
            if cand_c < best_c:
                best, best_c = cand, cand_c
                history[it - 1] = best_c
            if best_c - mu <= cfg.tol:
                converged = True
                break
        if it % _CHECK_EVERY == 0:
            # Best-so-far coherence can sit flat for hundreds of iterations
            # while the iterate is still travelling, so stall detection
            # watches the iterate itself.
            if checkpoint is not None and np.linalg.norm(g - checkpoint) < cfg.tol:
                converged = True
                break
            checkpoint = g
        # Structural step: pull large off-diagonal magnitudes toward the
        # Welch bound by at most 10% per iteration, keep phases.
        factor = np.ones_like(mag)
        big = off & (mag > mu)
        factor[big] = np.maximum(mu / mag[big], 0.9)
        h = g * factor
        np.fill_diagonal(h, 1.0)
        # Spectral step: nearest Gram of a unit-norm tight frame, i.e. rank q
        # with its q non-zero eigenvalues all equal to k/q.
        _, v = np.linalg.eigh(h)
        p = _normalize_columns(scale * v[:, -q:].conj().T)
    return best, best_c, converged, it, history[:it].copy()


def gen_grassmannian(q: int, k: int, cfg: PackingConfig | None = None) -> PilotCodebook:
    """Low-coherence pilots by alternating projection between Gram-matrix sets.

    Each restart starts from a complex Gaussian codebook and alternates
    between shrinking the off-diagonal Gram magnitudes toward the Welch
    bound and projecting onto Grams of rank-``q`` tight frames.  The
    restart with the smallest maximum coherence is returned (lowest restart
    index on ties); remaining restarts are skipped once one meets the Welch
    bound.

    The returned codebook's ``info`` is a :class:`PackingInfo`.  Its
    ``converged`` flag is False when a restart ran out of ``max_iters``
    before meeting the stopping rule; the best iterate is still returned.
    """
    q, k = _check_dims(q, k)
    if k > q * q:
        raise DimensionError(f"complex line packing needs k <= q^2, got k={k} > {q * q}")
    cfg = cfg or PackingConfig()
    mu = welch_bound(q, k)
    root = np.random.SeedSequence(int(cfg.seed))

    if k <= q:
        rng = np.random.default_rng(root.spawn(1)[0])
        a = rng.standard_normal((q, k)) + 1j * rng.standard_normal((q, k))
        u, _ = np.linalg.qr(a)
        u = _normalize_columns(u)
        mc = float(np.max(np.abs(u.conj().T @ u) - np.eye(k), initial=0.0)) if k > 1 else 0.0
        info = PackingInfo(True, 0, 0, mc, 0.0, np.array([mc]))
        return PilotCodebook(u, CodebookKind.GRASSMANNIAN, info=info)

    best = None
    for r, child in enumerate(root.spawn(cfg.restarts)):
        p, c, converged, iters, history = _pack_once(np.random.default_rng(child), q, k, cfg, mu)
        if best is None or c < best[1]:
            best = (p, c, converged, iters, history, r)
        if c - mu <= cfg.tol:
            break
    p, c, converged, iters, history, r = best
    info = PackingInfo(bool(converged), int(iters), int(r), float(c), mu, history)
    return PilotCodebook(p, CodebookKind.GRASSMANNIAN, info=info)


GENERATORS = {
    "gaussian-complex": CodebookKind.GAUSSIAN_COMPLEX,
    "gaussian-real": CodebookKind.GAUSSIAN_REAL,
    "random-phase": CodebookKind.RANDOM_PHASE,
    "vandermonde": CodebookKind.VANDERMONDE,
    "grassmannian": CodebookKind.GRASSMANNIAN,
}


def generate(kind, q: int, k: int, seed: int = 0, packing: PackingConfig | None = None) -> PilotCodebook:
    """Dispatch to a generator by :class:`CodebookKind` or CLI-style name."""
    if isinstance(kind, str) and kind in GENERATORS:
        kind = GENERATORS[kind]
    kind = CodebookKind(kind)
    if kind is CodebookKind.GAUSSIAN_COMPLEX:
        return gen_gaussian_complex(q, k, seed)
    if kind is CodebookKind.GAUSSIAN_REAL:
        return gen_gaussian_real(q, k, seed)
    if kind is CodebookKind.RANDOM_PHASE:
        return gen_random_phase(q, k, seed)
    if kind is CodebookKind.VANDERMONDE:
        return gen_vandermonde(q, k, seed=seed)
    if kind is CodebookKind.GRASSMANNIAN:
        if packing is None:
            packing = PackingConfig(seed=seed)
        return gen_grassmannian(q, k, packing)
    raise ValueError(f"no generator for kind {kind.value}")


@dataclass(frozen=True)
class CoherenceReport:
    max_coherence: float
    min_coherence: float
    welch_bound: float
    spread: float
    is_full_frame: bool

    def to_dict(self):
        return {
            "max_coherence": self.max_coherence,
            "min_coherence": self.min_coherence,
            "welch_bound": self.welch_bound,
            "spread": self.spread,
            "is_full_frame": self.is_full_frame,
        }


def coherence_report(p: PilotCodebook, tol: float = 1e-3) -> CoherenceReport:
    """Pairwise coherence statistics of ``p`` against the Welch bound.

    ``is_full_frame`` holds when every off-diagonal coherence is within
    ``tol`` of the Welch bound.  A single-column codebook has no pairs and
    reports zeros.
    """
    q, k = p.q, p.k
    wb = welch_bound(q, k)
    if k < 2:
        return CoherenceReport(0.0, 0.0, wb, 0.0, True)
    mag = np.abs(p.entries.conj().T @ p.entries)[~np.eye(k, dtype=bool)]
    hi, lo = float(mag.max()), float(mag.min())
    return CoherenceReport(hi, lo, wb, hi - lo, bool(np.all(np.abs(mag - wb) <= tol)))


# -- file format ------------------------------------------------------------
#
# line 1:  Q,K,kind
# then Q lines of K whitespace-separated "re:im" entries, 17 significant digits.


def _fmt(x: float) -> str:
    return format(x, ".17g")


def format_codebook(p: PilotCodebook) -> str:
    buf = io.StringIO()
    buf.write(f"{p.q},{p.k},{p.kind.value}\n")
    for row in p.entries:
        buf.write(" ".join(f"{_fmt(z.real)}:{_fmt(z.imag)}" for z in row))
        buf.write("\n")
    return buf.getvalue()


class CodebookFormatError(ValueError):
    pass


def parse_codebook(text: str) -> PilotCodebook:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CodebookFormatError("empty codebook file")
    try:
        qs, ks, kind = (s.strip() for s in lines[0].split(","))
        q, k = int(qs), int(ks)
        kind = CodebookKind(kind)
    except ValueError as exc:
        raise CodebookFormatError(f"bad header {lines[0]!r}; expected 'Q,K,kind'") from exc
    if len(lines) != q + 1:
        raise CodebookFormatError(f"expected {q} data rows, found {len(lines) - 1}")
    p = np.empty((q, k), dtype=np.complex128)
    for i, line in enumerate(lines[1:]):
        tokens = line.split()
        if len(tokens) != k:
            raise CodebookFormatError(f"row {i + 1} has {len(tokens)} entries, expected {k}")
        for j, tok in enumerate(tokens):
            try:
                re_s, im_s = tok.split(":")
                p[i, j] = complex(float(re_s), float(im_s))
            except ValueError as exc:
                raise CodebookFormatError(f"bad entry {tok!r} at row {i + 1}") from exc
    try:
        return PilotCodebook(p, kind)
    except ValueError as exc:
        raise CodebookFormatError(f"invalid codebook: {exc}") from exc


def write_codebook(path: str | os.PathLike, p: PilotCodebook) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_codebook(p))


def read_codebook(path: str | os.PathLike) -> PilotCodebook:
    with open(path, encoding="utf-8") as fh:
        return parse_codebook(fh.read())
