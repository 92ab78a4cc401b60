"""Threshold-based cluster extraction and bootstrap spectra.

Starting from an empirical correlation matrix, pick a small set of
strongly mutually correlated assets (the cluster, I_U) and a set of assets
weakly correlated with the cluster and with each other (the background,
I_D). The assembled block matrix is then compared with the spectrum of an
equicorrelated block plus identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ValidationError
from .linalg import (
    CorrelationEstimate,
    DensityCurve,
    ReturnMatrix,
    _as_matrix,
    histogram,
    pearson_estimator,
    standardize,
    sym_eigen,
)
from .rmt import DegenerateSpectrum
from .rng import parallel_map, stream

__all__ = [
    "FilterThresholds",
    "ClusterPartition",
    "BootstrapSpec",
    "BootstrapResult",
    "find_cluster",
    "find_background",
    "filter_partition",
    "partition_is_valid",
    "mean_rho",
    "assemble",
    "reshuffle",
    "bootstrap_spectra",
    "overlay_spectrum",
    "right_bulk_mean",
]


@dataclass(frozen=True)
class FilterThresholds:
    rho_U: float
    rho_D1: float
    rho_D2: float

    def __post_init__(self) -> None:
        if not 0 < self.rho_D1 <= self.rho_D2 < self.rho_U <= 1:
            raise ValidationError(
                "thresholds need 0 < rho_D1 <= rho_D2 < rho_U <= 1, got "
                f"({self.rho_D1}, {self.rho_D2}, {self.rho_U})"
            )


@dataclass(frozen=True)
class ClusterPartition:
    cluster_idx: tuple[int, ...]
    background_idx: tuple[int, ...]
    source_dim: int

    def __post_init__(self) -> None:
        cu = tuple(int(i) for i in self.cluster_idx)
        cd = tuple(int(i) for i in self.background_idx)
        object.__setattr__(self, "cluster_idx", cu)
        object.__setattr__(self, "background_idx", cd)
        both = cu + cd
        if len(set(both)) != len(both):
            raise ValidationError("cluster and background indices must be distinct")
        if any(i < 0 or i >= self.source_dim for i in both):
            raise ValidationError(f"index out of range for dimension {self.source_dim}")

    @property
    def order(self) -> tuple[int, ...]:
        return self.cluster_idx + self.background_idx

    @property
    def n_cluster(self) -> int:
        return len(self.cluster_idx)

    @property
    def n_total(self) -> int:
        return len(self.cluster_idx) + len(self.background_idx)


@dataclass(frozen=True)
class BootstrapSpec:
    iterations: int = 100
    keep_background: int | None = None  # None keeps every background asset
    reshuffle: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.keep_background is not None and self.keep_background < 0:
            raise ValidationError("keep_background must be >= 0")


@dataclass(frozen=True)
class BootstrapResult:
    samples: tuple[NDArray[np.float64], ...]
    density: DensityCurve
    meta: dict = field(default_factory=dict, compare=False)

    def pooled(self) -> NDArray[np.float64]:
        return np.concatenate(self.samples)


def find_cluster(
    c: CorrelationEstimate | NDArray,
    rho_U: float,
    min_size: int = 2,
    max_size: int | None = None,
) -> tuple[int, ...] | None:
    """Greedy seed-and-grow search for a set with all pairs >= ``rho_U``.

    The seed is the most correlated pair; each step adds the asset whose
    smallest correlation to the current set is largest. Ties go to the
    lowest index. Returns None when no set of ``min_size`` qualifies.
    """
    a = _as_matrix(c)
    n = a.shape[0]
    if not 0 < rho_U < 1 + 1e-12:
        raise ValidationError("rho_U must lie in (0, 1]")
    if min_size < 1:
        raise ValidationError("min_size must be >= 1")
    max_size = n if max_size is None else int(max_size)
    if n < 2 or max_size < 2:
        return None
    off = a.copy()
    np.fill_diagonal(off, -np.inf)
    # argmax over the flattened upper triangle picks the lowest (i, j) on ties
    iu, ju = np.triu_indices(n, 1)
    k = int(np.argmax(off[iu, ju]))
    i, j = int(iu[k]), int(ju[k])
    if off[i, j] < rho_U:
        return None if min_size > 1 else (0,)
    members = [i, j]
    worst = np.minimum(off[i], off[j])
    worst[members] = -np.inf
    while len(members) < max_size:
        v = int(np.argmax(worst))
        if worst[v] < rho_U:
            break
        members.append(v)
        worst = np.minimum(worst, off[v])
        worst[members] = -np.inf
    if len(members) < min_size:
        return None
    return tuple(sorted(members))


def find_background(
    c: CorrelationEstimate | NDArray,
    cluster_idx: Sequence[int],
    rho_D1: float,
    rho_D2: float,
) -> tuple[int, ...]:
    """Assets weakly tied to the cluster and to each other.

    Candidates have ``|c_ij| <= rho_D1`` against every cluster member. Among
    them a maximal set with pairwise ``|c_kl| <= rho_D2`` is chosen by the
    minimum-degree greedy rule on the conflict graph (lowest index on ties).
    May be empty.
    """
    a = np.abs(_as_matrix(c))
    n = a.shape[0]
    cu = list(cluster_idx)
    if any(i < 0 or i >= n for i in cu):
        raise ValidationError("cluster index out of range")
    cand = np.setdiff1d(np.arange(n), cu)
    if cu:
        cand = cand[a[np.ix_(cu, cand)].max(axis=0) <= rho_D1]
    if cand.size == 0:
        return ()
    conflict = a[np.ix_(cand, cand)] > rho_D2
    np.fill_diagonal(conflict, False)
    alive = np.ones(cand.size, dtype=bool)
    chosen = []
    while alive.any():
        deg = np.where(alive, (conflict & alive[None, :]).sum(axis=1), np.iinfo(np.int64).max)
        v = int(np.argmin(deg))
        chosen.append(int(cand[v]))
        alive[v] = False
        alive &= ~conflict[v]
    return tuple(sorted(chosen))


def filter_partition(
    c: CorrelationEstimate | NDArray,
    thresholds: FilterThresholds,
    min_size: int = 2,
    max_size: int | None = None,
) -> ClusterPartition | None:
    """Cluster then background search in one call; None if no cluster is found."""
    a = _as_matrix(c)
    cu = find_cluster(a, thresholds.rho_U, min_size, max_size)
    if cu is None:
        return None
    cd = find_background(a, cu, thresholds.rho_D1, thresholds.rho_D2)
    return ClusterPartition(cu, cd, a.shape[0])


def partition_is_valid(
    c: CorrelationEstimate | NDArray, partition: ClusterPartition, thresholds: FilterThresholds
) -> bool:
    """Re-check every threshold condition of a partition against ``c``."""
    a = _as_matrix(c)
    if a.shape[0] != partition.source_dim:
        return False
    cu, cd = list(partition.cluster_idx), list(partition.background_idx)
    if len(cu) >= 2:
        blk = a[np.ix_(cu, cu)]
        if blk[~np.eye(len(cu), dtype=bool)].min() < thresholds.rho_U:
            return False
    if cu and cd and np.abs(a[np.ix_(cu, cd)]).max() > thresholds.rho_D1:
        return False
    if len(cd) >= 2:
        blk = np.abs(a[np.ix_(cd, cd)])
        if blk[~np.eye(len(cd), dtype=bool)].max() > thresholds.rho_D2:
            return False
    return True


def mean_rho(c: CorrelationEstimate | NDArray, idx: Sequence[int]) -> float:
    """Average off-diagonal correlation within ``idx``."""
    idx = list(idx)
    k = len(idx)
    if k < 2:
        raise ValidationError("mean correlation needs at least two assets")
    blk = _as_matrix(c)[np.ix_(idx, idx)]
    return float((blk.sum() - np.trace(blk)) / (k * (k - 1)))


def assemble(c: CorrelationEstimate | NDArray, partition: ClusterPartition) -> CorrelationEstimate:
    """Submatrix reordered as [cluster, background]."""
    a = _as_matrix(c)
    if a.shape[0] != partition.source_dim:
        raise ValidationError(
            f"partition was built for dimension {partition.source_dim}, matrix has {a.shape[0]}"
        )
    order = np.array(partition.order, dtype=np.int64)
    rect = c.rect_ratio if isinstance(c, CorrelationEstimate) else None
    return CorrelationEstimate(a[np.ix_(order, order)], rect_ratio=rect)


def reshuffle(r: ReturnMatrix, rows: Sequence[int], seed: int, replicate: int = 0) -> ReturnMatrix:
    """Independently permute the time index of each selected row."""
    data = np.array(r.data)
    n = data.shape[0]
    for i in rows:
        i = int(i)
        if not 0 <= i < n:
            raise ValidationError(f"row {i} out of range")
        data[i] = data[i, stream(seed, "reshuffle", i, replicate).permutation(data.shape[1])]
    return ReturnMatrix(data, standardized=False, tickers=r.tickers)


def _bootstrap_once(r: ReturnMatrix, partition: ClusterPartition, spec: BootstrapSpec,
                    keep: int, b: int) -> NDArray[np.float64]:
    bg = np.array(partition.background_idx, dtype=np.int64)
    picked = np.sort(stream(spec.seed, "bootstrap", 0, b).choice(bg, size=keep, replace=False)) \
        if keep < bg.size else bg
    rows = list(partition.cluster_idx) + [int(i) for i in picked]
    sub = r.rows(rows)
    if spec.reshuffle and keep > 0:
        # position k in ``sub`` holds source row rows[k]; key streams on the source row
        data = np.array(sub.data)
        for k in range(partition.n_cluster, len(rows)):
            perm = stream(spec.seed, "reshuffle", rows[k], b).permutation(data.shape[1])
            data[k] = data[k, perm]
        sub = ReturnMatrix(data)
    c = pearson_estimator(standardize(sub))
    return np.asarray(sym_eigen(c).eigenvalues)


def bootstrap_spectra(
    r: ReturnMatrix,
    partition: ClusterPartition,
    spec: BootstrapSpec,
    bins: int = 100,
    workers: int = 1,
) -> BootstrapResult:
    """Eigenvalues of re-estimated correlations over bootstrap draws.

    Cluster rows are always kept; ``keep_background`` background rows are
    drawn without replacement per iteration and optionally reshuffled in
    time. The pooled eigenvalues also come back as a histogram.
    """
    if r.n_assets != partition.source_dim:
        raise ValidationError("return matrix does not match the partition dimension")
    n_bg = len(partition.background_idx)
    keep = n_bg if spec.keep_background is None else spec.keep_background
    if keep > n_bg:
        raise ValidationError(f"keep_background={keep} exceeds background size {n_bg}")
    samples = parallel_map(lambda b: _bootstrap_once(r, partition, spec, keep, b),
                           range(spec.iterations), workers)
    pooled = np.concatenate(samples)
    density = histogram(pooled, bins)
    return BootstrapResult(tuple(samples), density,
                           meta={"keep_background": keep, "iterations": spec.iterations,
                                 "reshuffle": spec.reshuffle, "seed": spec.seed})


def right_bulk_mean(eigenvalues: NDArray, n_cluster: int, large_eig_count: int) -> float:
    """Mean of the eigenvalues left after removing the small and the isolated ones."""
    v = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    lo, hi = n_cluster - 1, v.size - large_eig_count
    if hi <= lo:
        raise ValidationError("no eigenvalues left in the right bulk")
    return float(v[lo:hi].mean())


def overlay_spectrum(
    partition: ClusterPartition,
    c: CorrelationEstimate | NDArray,
    large_eig_count: int,
    lambda2: float | str = 1.0,
    n_total: int | None = None,
) -> DegenerateSpectrum:
    """Two-atom reference spectrum {1 - rho, Lambda_2} for density overlays.

    Lambda_1 = 1 - mean_rho carries weight (N_bar - 1)/(N - large_eig_count);
    Lambda_2 takes the rest. ``lambda2`` is a number, or "empirical" for the
    right-bulk mean of the assembled matrix. ``n_total`` overrides N (e.g.
    the bootstrap subsample size).
    """
    rho = mean_rho(c, partition.cluster_idx)
    n = partition.n_total if n_total is None else int(n_total)
    nbar = partition.n_cluster
    if lambda2 == "empirical":
        eig = sym_eigen(assemble(c, partition)).eigenvalues
        lam2 = right_bulk_mean(eig, nbar, large_eig_count)
    elif isinstance(lambda2, str):
        raise ValidationError(f"unknown lambda2 option {lambda2!r}")
    else:
        lam2 = float(lambda2)
    denom = n - large_eig_count
    w1 = (nbar - 1) / denom if denom > 0 else -1.0
    w2 = 1.0 - w1
    if not (w1 > 0 and w2 > 0):
        raise ValidationError(f"overlay weights must be positive, got ({w1}, {w2})")
    return DegenerateSpectrum.from_counts([(1.0 - rho, w1), (lam2, w2)])
