"""Return preprocessing, Pearson estimation and a symmetric eigensolver.

Everything here is a pure function of its inputs. Containers freeze their
arrays on construction so they can be shared across threads.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels
from .errors import (
    ContractViolation,
    ConvergenceError,
    DegenerateSeriesError,
    DomainError,
    ValidationError,
)

__all__ = [
    "PriceSeries",
    "ReturnMatrix",
    "CorrelationEstimate",
    "EigenDecomposition",
    "DensityCurve",
    "log_returns",
    "standardize",
    "pearson_estimator",
    "sym_eigen",
    "histogram",
    "support_intervals",
    "sample_bulks",
    "JACOBI_MAX_DIM",
]

JACOBI_MAX_DIM = 64
_SYMMETRY_TOL = 1e-9


def _frozen(a: ArrayLike, dtype=np.float64) -> NDArray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceSeries:
    ticker: str
    prices: NDArray[np.float64]
    timestamps: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        prices = _frozen(self.prices)
        if prices.ndim != 1 or prices.size < 2:
            raise ValidationError(f"{self.ticker}: need at least two prices")
        bad = np.flatnonzero(~(prices > 0))
        if bad.size:
            raise DomainError(
                f"{self.ticker}: non-positive price {prices[bad[0]]!r} at index {bad[0]}"
            )
        if self.timestamps is not None and len(self.timestamps) != prices.size:
            raise ValidationError(f"{self.ticker}: timestamps and prices differ in length")
        object.__setattr__(self, "prices", prices)
        if self.timestamps is not None:
            object.__setattr__(self, "timestamps", tuple(self.timestamps))


@dataclass(frozen=True)
class ReturnMatrix:
    """N x T panel of returns, one row per asset."""

    data: NDArray[np.float64]
    standardized: bool = False
    tickers: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        data = _frozen(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError("return matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(data)):
            raise ValidationError("return matrix contains non-finite values")
        if self.tickers is not None and len(self.tickers) != data.shape[0]:
            raise ValidationError("tickers must match the number of rows")
        if self.standardized:
            if data.shape[1] < 2:
                raise ValidationError("standardized rows need T >= 2")
            mu = data.mean(axis=1)
            var = data.var(axis=1, ddof=1)
            if np.any(np.abs(mu) >= 1e-12) or np.any(np.abs(var - 1.0) > 1e-9):
                raise ValidationError("rows flagged standardized are not")
        object.__setattr__(self, "data", data)
        if self.tickers is not None:
            object.__setattr__(self, "tickers", tuple(self.tickers))

    @property
    def n_assets(self) -> int:
        return self.data.shape[0]

    @property
    def n_obs(self) -> int:
        return self.data.shape[1]

    def rows(self, index: Sequence[int]) -> "ReturnMatrix":
        """Sub-panel with the given rows, in the given order."""
        idx = np.asarray(index, dtype=np.intp)
        tickers = None if self.tickers is None else tuple(self.tickers[i] for i in idx)
        return ReturnMatrix(self.data[idx], standardized=self.standardized, tickers=tickers)


@dataclass(frozen=True)
class CorrelationEstimate:
    matrix: NDArray[np.float64]
    rect_ratio: float | None = None

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolation("correlation matrix must be square")
        _check_symmetric(m)
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64] | None = None


@dataclass(frozen=True)
class DensityCurve:
    """Density sampled on a grid.

    For histograms ``lam`` holds bin centres and ``widths`` the bin widths;
    for solved densities ``widths`` is None and ``mass`` is the trapezoid
    integral. ``edges`` lists the detected support intervals and
    ``isolated`` any eigenvalues kept out of the density.
    """

    lam: NDArray[np.float64]
    rho: NDArray[np.float64]
    mass: float
    edges: tuple[tuple[float, float], ...] = ()
    widths: NDArray[np.float64] | None = None
    isolated: tuple[float, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "lam", _frozen(self.lam))
        object.__setattr__(self, "rho", _frozen(self.rho))
        if self.widths is not None:
            object.__setattr__(self, "widths", _frozen(self.widths))
        if self.lam.shape != self.rho.shape:
            raise ValidationError("lam and rho must have the same shape")

    def moment(self, k: int) -> float:
        """k-th moment of the curve (trapezoid, or bin sums for histograms)."""
        if self.widths is not None:
            return float(np.sum(self.lam**k * self.rho * self.widths))
        return float(np.trapezoid(self.lam**k * self.rho, self.lam))


def _check_symmetric(m: NDArray) -> None:
    if m.size and not np.all(np.isfinite(m)):
        raise ContractViolation("matrix contains non-finite entries")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > _SYMMETRY_TOL:
        raise ContractViolation(f"matrix is not symmetric (max asymmetry {asym:.3g})")


def log_returns(series: PriceSeries | ArrayLike) -> NDArray[np.float64]:
    """ln(S[j+1] / S[j]) for consecutive prices."""
    if not isinstance(series, PriceSeries):
        series = PriceSeries("series", np.asarray(series, dtype=np.float64))
    p = series.prices
    return np.log(p[1:]) - np.log(p[:-1])


def standardize(r: ReturnMatrix) -> ReturnMatrix:
    """Centre each row and scale it to unit sample variance (ddof=1)."""
    x = np.array(r.data, dtype=np.float64)
    if x.shape[1] < 2:
        raise DegenerateSeriesError("need at least two observations per row")
    x -= x.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.einsum("ij,ij->i", x, x) / (x.shape[1] - 1))
    flat = np.flatnonzero(~(sd > 0))
    if flat.size:
        name = r.tickers[flat[0]] if r.tickers else f"row {flat[0]}"
        raise DegenerateSeriesError(f"{name} has zero variance")
    x /= sd[:, None]
    # second centring pass removes the rounding residue of the first
    x -= x.mean(axis=1, keepdims=True)
    return ReturnMatrix(x, standardized=True, tickers=r.tickers)


def pearson_estimator(r: ReturnMatrix) -> CorrelationEstimate:
    """c = R R^T / T with the large-T normalization."""
    x = r.data
    n, t = x.shape
    if t < 2:
        raise ValidationError("Pearson estimator needs T >= 2")
    c = (x @ x.T) / t
    c = 0.5 * (c + c.T)
    return CorrelationEstimate(c, rect_ratio=n / t)


def _as_matrix(c: CorrelationEstimate | ArrayLike) -> NDArray[np.float64]:
    if isinstance(c, CorrelationEstimate):
        return np.array(c.matrix, dtype=np.float64)
    m = np.array(c, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolation("matrix must be square")
    _check_symmetric(m)
    return 0.5 * (m + m.T)


def _tridiagonalize(a: NDArray, want_q: bool):
    """Householder reduction a = Q T Q^T; ``a`` is overwritten."""
    n = a.shape[0]
    d = np.empty(n)
    e = np.zeros(n)
    hv = np.zeros((n, n)) if want_q else np.empty((0, 0))
    _kernels.householder_tridiag(a, d, e, hv, want_q)
    q = None
    if want_q:
        q = np.eye(n)
        _kernels.accumulate_reflectors(hv, q)
    return d, e, q


def _canonical_signs(vecs: NDArray) -> NDArray:
    # largest-magnitude component positive, lowest index on ties
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def sym_eigen(
    c: CorrelationEstimate | ArrayLike,
    want_vectors: bool = False,
    method: str = "auto",
) -> EigenDecomposition:
    """Eigenvalues (ascending) and optionally orthonormal eigenvectors.

    ``method`` is ``"jacobi"``, ``"ql"`` (Householder + implicit QL) or
    ``"auto"``, which uses Jacobi up to :data:`JACOBI_MAX_DIM`.
    """
    a = _as_matrix(c)
    n = a.shape[0]
    if n == 0:
        return EigenDecomposition(np.empty(0), np.empty((0, 0)) if want_vectors else None)
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_DIM else "ql"
    if method == "jacobi":
        v = np.eye(n)
        vals = _kernels.jacobi_cyclic(a, v, want_vectors, 100)
        if vals.size != n:
            raise ConvergenceError("Jacobi sweeps did not converge")
    elif method == "ql":
        d, e, q = _tridiagonalize(a, want_vectors)
        v = q if want_vectors else np.empty((0, 0))
        if _kernels.tql_implicit(d, e, v, want_vectors) != 0:
            raise ConvergenceError("implicit QL did not converge")
        vals = d
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = None
    if want_vectors:
        vecs = _canonical_signs(v[:, order])
        vecs.setflags(write=False)
    vals.setflags(write=False)
    return EigenDecomposition(vals, vecs)


def support_intervals(
    x: NDArray, y: NDArray, cutoff: float, release: float | None = None
) -> tuple[tuple[float, float], ...]:
    """Intervals of ``x`` where ``y`` exceeds ``cutoff``.

    An interval opens when ``y > cutoff`` and closes once ``y`` drops to
    ``release`` or below (hysteresis; defaults to ``cutoff / 2``).
    """
    if release is None:
        release = 0.5 * cutoff
    out = []
    start = None
    for i in range(len(x)):
        if start is None:
            if y[i] > cutoff:
                start = i
        elif y[i] <= release:
            out.append((float(x[start]), float(x[i - 1])))
            start = None
    if start is not None:
        out.append((float(x[start]), float(x[-1])))
    return tuple(out)


def histogram(
    values: ArrayLike, bin_count: int, range: tuple[float, float] | None = None
) -> DensityCurve:
    """Normalized histogram; sum(density * width) == 1 over in-range values."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError("histogram of an empty sample")
    if bin_count < 1:
        raise ValidationError("bin_count must be >= 1")
    if range is None:
        range = (float(v.min()), float(v.max()))
    lo, hi = float(range[0]), float(range[1])
    if not hi > lo:
        raise ValidationError("histogram range is degenerate")
    counts, bins = np.histogram(v, bins=bin_count, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        raise ValidationError("no values fall inside the histogram range")
    widths = np.diff(bins)
    dens = counts / (total * widths)
    centres = 0.5 * (bins[1:] + bins[:-1])
    edges = _occupied_runs(bins, counts)
    return DensityCurve(
        centres, dens, float(np.sum(dens * widths)), edges=edges, widths=widths,
        meta={"bins": bins.tolist(), "count": int(total)},
    )


def _occupied_runs(bins: NDArray, counts: NDArray) -> tuple[tuple[float, float], ...]:
    runs = []
    start = None
    for i, c in enumerate(counts):
        if c > 0 and start is None:
            start = i
        elif c == 0 and start is not None:
            runs.append((float(bins[start]), float(bins[i])))
            start = None
    if start is not None:
        runs.append((float(bins[start]), float(bins[-1])))
    return tuple(runs)


@dataclass(frozen=True)
class Bulk:
    lo: float
    hi: float
    count: int
    mean: float


def sample_bulks(values: ArrayLike, bin_count: int | None = None, min_count: int = 1) -> list[Bulk]:
    """Split a sample into bulks separated by empty histogram bins.

    The default bin count, 1.5 * sqrt(n) (at least 10), keeps sparse bulk
    edges in one piece while still resolving gaps between bulks. Runs
    holding fewer than ``min_count`` values are dropped.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValidationError("no values")
    lo, hi = float(v[0]), float(v[-1])
    if hi == lo:
        return [Bulk(lo, hi, int(v.size), lo)]
    if bin_count is None:
        bin_count = max(10, int(1.5 * math.sqrt(v.size)))
    curve = histogram(v, bin_count, (lo, hi))
    out = []
    for a, b in curve.edges:
        sel = v[(v >= a) & (v <= b)]
        if sel.size >= min_count:
            out.append(Bulk(a, b, int(sel.size), float(sel.mean())))
    return out
