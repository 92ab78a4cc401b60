"""Cluster factor models: simulation, exact correlations and spectra.

Assets are ordered cluster by cluster, background (non-cluster) assets
last. A background asset follows

    r_i = g_N m_N + (1 - g_N) e_i

and an asset in cluster k follows

    r_i = g_k m_k + (1 - g_k) g_N m_N + (1 - g_k)(1 - g_N) e_i

with every mode and noise term an independent standard normal series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ValidationError
from .linalg import CorrelationEstimate, ReturnMatrix
from .rng import parallel_map, stream

__all__ = [
    "FactorModelConfig",
    "BlockModel",
    "AnalyticSpectrum",
    "simulate",
    "theoretical_correlation",
    "analytic_spectrum_strong_clusters",
    "block_correlation",
    "analytic_spectrum_single_cluster",
    "analytic_spectrum_block",
    "gamma_for_rho",
    "single_cluster_config",
]


def _unit_interval(x: float, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"{name}={x} outside [0, 1]")
    return x


@dataclass(frozen=True)
class FactorModelConfig:
    n_assets: int
    n_obs: int
    clusters: tuple[tuple[int, float], ...] = ()
    common_mode: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        clusters = tuple((int(n), float(g)) for n, g in self.clusters)
        object.__setattr__(self, "clusters", clusters)
        if self.n_assets < 1:
            raise ValidationError("n_assets must be >= 1")
        if self.n_obs < 2:
            raise ValidationError("n_obs must be >= 2")
        for size, gamma in clusters:
            if size < 1:
                raise ValidationError("cluster sizes must be >= 1")
            _unit_interval(gamma, "cluster coupling")
        _unit_interval(self.common_mode, "common_mode")
        if self.n_clustered > self.n_assets:
            raise ValidationError(
                f"clusters hold {self.n_clustered} assets but n_assets={self.n_assets}"
            )

    @property
    def n_clustered(self) -> int:
        return sum(n for n, _ in self.clusters)

    @property
    def q(self) -> float:
        return self.n_assets / self.n_obs

    def labels(self) -> NDArray[np.int64]:
        """Cluster index per asset, -1 for background assets."""
        lab = np.full(self.n_assets, -1, dtype=np.int64)
        start = 0
        for k, (size, _) in enumerate(self.clusters):
            lab[start:start + size] = k
            start += size
        return lab


@dataclass(frozen=True)
class BlockModel:
    """Block-diagonal correlation: equicorrelated clusters plus identity."""

    clusters: tuple[tuple[int, float], ...]
    n_background: int = 0

    def __post_init__(self) -> None:
        clusters = tuple((int(n), float(r)) for n, r in self.clusters)
        object.__setattr__(self, "clusters", clusters)
        for size, rho in clusters:
            if size < 1:
                raise ValidationError("cluster sizes must be >= 1")
            _unit_interval(rho, "rho")
        if self.n_background < 0:
            raise ValidationError("n_background must be >= 0")

    @property
    def n_assets(self) -> int:
        return sum(n for n, _ in self.clusters) + self.n_background


@dataclass(frozen=True)
class AnalyticSpectrum:
    """Eigenvalue multiset as (value, multiplicity) pairs."""

    entries: tuple[tuple[float, int], ...]

    def __post_init__(self) -> None:
        entries = tuple((float(v), int(m)) for v, m in self.entries if int(m) > 0)
        if any(m < 0 for _, m in self.entries):
            raise ValidationError("negative multiplicity")
        object.__setattr__(self, "entries", entries)

    @property
    def total(self) -> int:
        return sum(m for _, m in self.entries)

    def values(self) -> NDArray[np.float64]:
        """All eigenvalues with repetition, ascending."""
        out = np.concatenate([np.full(m, v) for v, m in self.entries]) if self.entries else np.empty(0)
        return np.sort(out)

    def largest(self) -> float:
        return max(v for v, _ in self.entries)


def gamma_for_rho(rho: float) -> float:
    """Cluster coupling giving intra-cluster correlation ``rho`` when g_N = 0."""
    rho = _unit_interval(rho, "rho")
    a, b = math.sqrt(rho), math.sqrt(1.0 - rho)
    return a / (a + b)


def single_cluster_config(
    n_assets: int, n_cluster: int, rho: float, n_obs: int, seed: int = 0
) -> FactorModelConfig:
    """Factor model whose exact correlation is one equicorrelated block plus identity."""
    return FactorModelConfig(
        n_assets, n_obs, clusters=((n_cluster, gamma_for_rho(rho)),), common_mode=0.0, seed=seed
    )


def _simulate_rows(cfg: FactorModelConfig, replicate: int, rows: Sequence[int],
                   modes: dict[int, NDArray]) -> NDArray[np.float64]:
    lab = cfg.labels()
    gn = cfg.common_mode
    out = np.empty((len(rows), cfg.n_obs))
    for r, i in enumerate(rows):
        eps = stream(cfg.seed, "noise", i, replicate).standard_normal(cfg.n_obs)
        k = lab[i]
        if k < 0:
            out[r] = gn * modes[-1] + (1.0 - gn) * eps
        else:
            gk = cfg.clusters[k][1]
            out[r] = gk * modes[k] + (1.0 - gk) * gn * modes[-1] + (1.0 - gk) * (1.0 - gn) * eps
    return out


def simulate(cfg: FactorModelConfig, replicate: int = 0, workers: int = 1) -> ReturnMatrix:
    """One N x T realisation of the model (rows are not standardized).

    Output depends only on ``(cfg, replicate)``; ``workers`` only changes
    how rows are distributed across threads.
    """
    t = cfg.n_obs
    modes = {-1: stream(cfg.seed, "common", 0, replicate).standard_normal(t)}
    for k in range(len(cfg.clusters)):
        modes[k] = stream(cfg.seed, "cluster", k, replicate).standard_normal(t)
    n = cfg.n_assets
    nchunks = max(1, min(workers, n))
    chunks = [list(c) for c in np.array_split(np.arange(n), nchunks) if c.size]
    parts = parallel_map(lambda rows: _simulate_rows(cfg, replicate, rows, modes), chunks, workers)
    return ReturnMatrix(np.vstack(parts))


def theoretical_correlation(cfg: FactorModelConfig) -> CorrelationEstimate:
    """Exact model correlation from the four covariance cases."""
    lab = cfg.labels()
    n = cfg.n_assets
    gn = cfg.common_mode
    gam = np.array([cfg.clusters[k][1] if k >= 0 else 0.0 for k in lab])
    bg = lab < 0
    same = (lab[:, None] == lab[None, :]) & ~bg[:, None]
    eye = np.eye(n)

    cov = np.empty((n, n))
    # background / background
    m = bg[:, None] & bg[None, :]
    cov[m] = ((1 - gn) ** 2 * eye + gn**2)[m]
    # background / cluster, both orders
    one_minus = 1.0 - gam
    m = bg[:, None] & ~bg[None, :]
    cov[m] = np.broadcast_to(one_minus[None, :] * gn**2, (n, n))[m]
    m = ~bg[:, None] & bg[None, :]
    cov[m] = np.broadcast_to(one_minus[:, None] * gn**2, (n, n))[m]
    # same cluster
    g2 = np.broadcast_to(gam[:, None] ** 2, (n, n))
    om2 = np.broadcast_to(one_minus[:, None] ** 2, (n, n))
    cov[same] = (om2 * (1 - gn) ** 2 * eye + om2 * gn**2 + g2)[same]
    # different clusters
    m = ~bg[:, None] & ~bg[None, :] & ~same
    cov[m] = (np.outer(one_minus, one_minus) * gn**2)[m]

    var = np.diag(cov).copy()
    if np.any(var <= 0):
        raise ValidationError("model has a zero-variance asset")
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return CorrelationEstimate(corr, rect_ratio=cfg.q)


def analytic_spectrum_strong_clusters(cfg: FactorModelConfig) -> AnalyticSpectrum:
    """Spectrum of the model correlation in the g_k -> 1 limit."""
    n, nbar, gn = cfg.n_assets, cfg.n_clustered, cfg.common_mode
    nbg = n - nbar
    if nbg == 0 and gn > 0:
        raise ValidationError("common mode needs at least one background asset")
    denom = (1 - gn) ** 2 + gn**2
    entries = [(0.0, nbar - len(cfg.clusters))]
    entries += [(float(size), 1) for size, _ in cfg.clusters]
    if nbg > 0:
        entries.append(((nbg * gn**2 + (1 - gn) ** 2) / denom, 1))
        entries.append(((1 - gn) ** 2 / denom, nbg - 1))
    return AnalyticSpectrum(tuple(entries))


def block_correlation(model: BlockModel) -> CorrelationEstimate:
    n = model.n_assets
    c = np.zeros((n, n))
    start = 0
    for size, rho in model.clusters:
        c[start:start + size, start:start + size] = rho
        start += size
    np.fill_diagonal(c, 1.0)
    return CorrelationEstimate(c)


def analytic_spectrum_block(model: BlockModel) -> AnalyticSpectrum:
    """Closed-form spectrum of :func:`block_correlation`."""
    entries = []
    for size, rho in model.clusters:
        entries.append((1.0 - rho, size - 1))
        entries.append((size * rho + (1.0 - rho), 1))
    entries.append((1.0, model.n_background))
    return AnalyticSpectrum(tuple(entries))


def analytic_spectrum_single_cluster(n: int, n_bar: int, rho: float) -> AnalyticSpectrum:
    if not 1 <= n_bar <= n:
        raise ValidationError("need 1 <= n_bar <= n")
    rho = _unit_interval(rho, "rho")
    return AnalyticSpectrum((
        (1.0 - rho, n_bar - 1),
        (1.0, n - n_bar),
        (n_bar * rho + (1.0 - rho), 1),
    ))
