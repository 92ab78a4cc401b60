"""Synthetic panels with a planted cluster/background structure.

Used where the original market data cannot be redistributed: the planted
index sets are known, so cluster extraction can be checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import CorrelationEstimate, ReturnMatrix
from .rng import stream

__all__ = ["PlantedPanel", "planted_panel"]


@dataclass(frozen=True)
class PlantedPanel:
    returns: ReturnMatrix
    population: CorrelationEstimate
    cluster_idx: tuple[int, ...]
    background_idx: tuple[int, ...]
    decoy_idx: tuple[int, ...] = ()


def planted_panel(
    n_cluster: int,
    rho_cluster: float,
    n_background: int,
    n_obs: int,
    *,
    rho_background: float = 0.0,
    rho_cross: float = 0.0,
    n_decoy: int = 0,
    rho_decoy: float = 0.4,
    seed: int = 0,
    scramble: bool = False,
) -> PlantedPanel:
    """Gaussian returns with an equicorrelated block structure.

    Cluster pairs correlate at ``rho_cluster``, background pairs at
    ``rho_background``, cluster-background pairs at ``rho_cross``. Decoys
    correlate at ``rho_decoy`` with the cluster and with each other, and at
    ``rho_background`` with the background, so a background search must
    exclude them. ``scramble`` permutes the asset order with the seed.
    """
    sizes = (n_cluster, n_background, n_decoy)
    if n_cluster < 2 or n_background < 0 or n_decoy < 0:
        raise ValidationError("need n_cluster >= 2 and non-negative group sizes")
    n = sum(sizes)
    group = np.repeat([0, 1, 2], sizes)
    table = np.array([
        [rho_cluster, rho_cross, rho_decoy],
        [rho_cross, rho_background, rho_background],
        [rho_decoy, rho_background, rho_decoy],
    ])
    c = table[group[:, None], group[None, :]]
    np.fill_diagonal(c, 1.0)
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise ValidationError("planted correlations do not form a positive definite matrix") from None

    order = np.arange(n)
    if scramble:
        order = stream(seed, "misc", 1).permutation(n)
    z = stream(seed, "misc", 0).standard_normal((n, n_obs))
    data = (chol @ z)[order]
    pop = c[np.ix_(order, order)]
    where = np.argsort(order)  # position of each original asset after the shuffle

    def positions(g: int) -> tuple[int, ...]:
        return tuple(sorted(int(where[i]) for i in np.flatnonzero(group == g)))

    return PlantedPanel(
        ReturnMatrix(data),
        CorrelationEstimate(pop, rect_ratio=n / n_obs),
        positions(0),
        positions(1),
        positions(2),
    )
