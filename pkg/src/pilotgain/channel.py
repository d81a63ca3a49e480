"""Seeded Monte-Carlo generation of uplink pilot observations.

Each trial draws its own generator from ``SeedSequence(seed).spawn``-style
keys ``(seed, trial_index)``, so a trial's realization depends only on the
master seed and its index, never on the order trials are executed in.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .model import DimensionError, PilotCodebook


@dataclass(frozen=True)
class ScenarioConfig:
    """Large-scale gains ``g`` (linear power, zero for inactive users),
    antenna count ``m``, noise variance and trial bookkeeping."""

    g: np.ndarray
    m: int
    sigma_w2: float
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        g = np.array(self.g, dtype=float).reshape(-1)
        if g.size < 1 or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gains must be a non-empty vector of finite non-negative values")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"antenna count must be a positive integer, got {self.m}")
        if not (np.isfinite(self.sigma_w2) and self.sigma_w2 >= 0):
            raise ValueError("noise variance must be finite and non-negative")
        if self.trials < 1 or self.seed < 0:
            raise ValueError("trials must be positive and seed non-negative")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "m", int(self.m))

    @property
    def k(self) -> int:
        return self.g.size


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h: np.ndarray  # K x M
    y: np.ndarray  # Q x M
    sample_cov: np.ndarray  # Q x Q
    trial_index: int = 0


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Generator for one trial, keyed by ``(seed, trial_index)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial_index),)))


def _cn(rng, shape, var):
    """Circularly-symmetric complex normal samples with variance ``var``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_trial(p: PilotCodebook, cfg: ScenarioConfig, trial_index: int = 0) -> ChannelRealization:
    """Draw channels and noise, form ``Y = P H + W`` and its sample covariance."""
    if cfg.k != p.k:
        raise DimensionError(f"scenario has {cfg.k} gains but codebook has K={p.k} users")
    rng = trial_rng(cfg.seed, trial_index)
    h = _cn(rng, (p.k, cfg.m), cfg.g[:, None])
    w = _cn(rng, (p.q, cfg.m), cfg.sigma_w2)
    y = p.entries @ h + w
    r = (y @ y.conj().T) / cfg.m
    r = 0.5 * (r + r.conj().T)
    return ChannelRealization(h, y, r, int(trial_index))


def exact_covariance(p: PilotCodebook, g, sigma_w2: float) -> np.ndarray:
    """``P diag(g) P^H + sigma_w2 I``, the limit of the sample covariance."""
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.size != p.k:
        raise DimensionError(f"{g.size} gains for K={p.k} users")
    if np.any(g < 0):
        raise ValueError("gains must be non-negative")
    pe = p.entries
    r = (pe * g) @ pe.conj().T + sigma_w2 * np.eye(p.q)
    return 0.5 * (r + r.conj().T)


def pathloss_gains(distances, alpha: float = 3.8, ref_distance: float = 1.0) -> np.ndarray:
    """Convenience gains ``(d / ref_distance) ** -alpha``."""
    d = np.asarray(distances, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    return (d / ref_distance) ** (-alpha)


def read_gains(path: str | os.PathLike) -> np.ndarray:
    """Read a gains file: one non-negative decimal per line."""
    vals = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                v = float(line)
            except ValueError as exc:
                raise ValueError(f"{path}:{n}: not a number: {line!r}") from exc
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{path}:{n}: gain must be finite and non-negative")
            vals.append(v)
    if not vals:
        raise ValueError(f"{path}: no gains found")
    return np.array(vals)


def write_gains(path: str | os.PathLike, g) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(g, dtype=float).reshape(-1):
            fh.write(f"{v:.17g}\n")
