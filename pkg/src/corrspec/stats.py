"""Goodness-of-fit battery: Kolmogorov-Smirnov, Jarque-Bera, Lilliefors.

Critical values are asymptotic: ``c(alpha) / sqrt(n)`` for KS and
Lilliefors, chi-square(2) quantiles for Jarque-Bera. A test rejects at
level alpha exactly when its statistic exceeds the critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from .errors import DegenerateSeriesError, ValidationError
from .linalg import DensityCurve

__all__ = [
    "ALPHAS",
    "TestReport",
    "CdfTable",
    "cdf_from_density",
    "ks_test",
    "jarque_bera",
    "lilliefors",
    "normal_fit",
    "normal_cdf",
]

ALPHAS = (0.10, 0.05, 0.01)
KS_COEF = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}
LILLIEFORS_COEF = {0.10: 0.805, 0.05: 0.886, 0.01: 1.031}


@dataclass(frozen=True)
class TestReport:
    test_name: str
    statistic: float
    critical_values: Mapping[float, float]
    sample_size: int

    __test__ = False  # keep pytest from collecting this class

    @property
    def decisions(self) -> dict[float, str]:
        return {a: ("reject" if self.statistic > cv else "fail-to-reject")
                for a, cv in self.critical_values.items()}

    def rejects(self, alpha: float) -> bool:
        return self.statistic > self.critical_values[alpha]

    def as_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "critical_values": {str(a): v for a, v in self.critical_values.items()},
            "decisions": {str(a): d for a, d in self.decisions.items()},
            "sample_size": self.sample_size,
        }


@dataclass(frozen=True)
class CdfTable:
    """Tabulated CDF, linearly interpolated between grid points."""

    x: NDArray[np.float64]
    F: NDArray[np.float64]

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.float64)
        f = np.array(self.F, dtype=np.float64)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ValidationError("CDF table needs matching 1-D x and F")
        if np.any(np.diff(x) <= 0):
            raise ValidationError("CDF grid must be strictly increasing")
        if np.any(np.diff(f) < -1e-12) or f.min() < -1e-12 or f.max() > 1 + 1e-12:
            raise ValidationError("CDF values must be non-decreasing within [0, 1]")
        x.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "F", f)

    def __call__(self, v: ArrayLike) -> NDArray[np.float64]:
        return np.interp(v, self.x, self.F, left=0.0, right=1.0)


def cdf_from_density(curve: DensityCurve, mass_tol: float = 2e-3) -> CdfTable:
    """Cumulative integral of a density curve, renormalised to end at 1."""
    lam = np.asarray(curve.lam)
    rho = np.asarray(curve.rho)
    if abs(curve.mass - 1.0) > mass_tol:
        raise ValidationError(f"density mass {curve.mass:.6f} is not within {mass_tol} of 1")
    if curve.widths is not None:
        # histogram: CDF at the bin edges
        w = np.asarray(curve.widths)
        x = np.concatenate([[lam[0] - 0.5 * w[0]], lam + 0.5 * w])
        f = np.concatenate([[0.0], np.cumsum(rho * w)])
    else:
        x = lam
        f = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(lam))])
    f = np.maximum.accumulate(f / f[-1])
    return CdfTable(x, f)


def _sorted_sample(sample: ArrayLike, n_min: int) -> NDArray[np.float64]:
    x = np.asarray(sample, dtype=np.float64).ravel()
    if np.any(np.isnan(x)):
        raise ValidationError("sample contains NaN")
    if x.size < n_min:
        raise ValidationError(f"need at least {n_min} observations, got {x.size}")
    return np.sort(x)


def _ks_distance(xs: NDArray, cdf: Callable[[NDArray], NDArray]) -> float:
    n = xs.size
    f = np.asarray(cdf(xs), dtype=np.float64)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_test(sample: ArrayLike, cdf: CdfTable | Callable[[NDArray], NDArray]) -> TestReport:
    """One-sample KS test against a fully specified CDF."""
    xs = _sorted_sample(sample, 10)
    n = xs.size
    stat = _ks_distance(xs, cdf)
    cv = {a: KS_COEF[a] / math.sqrt(n) for a in ALPHAS}
    return TestReport("kolmogorov-smirnov", stat, cv, n)


def _moments(xs: NDArray) -> tuple[float, float, float]:
    d = xs - xs.mean()
    m2 = float(np.mean(d**2))
    if m2 == 0:
        raise DegenerateSeriesError("sample has zero variance")
    return m2, float(np.mean(d**3)), float(np.mean(d**4))


def jarque_bera(sample: ArrayLike) -> TestReport:
    xs = _sorted_sample(sample, 20)
    n = xs.size
    m2, m3, m4 = _moments(xs)
    skew = m3 / m2**1.5
    kurt = m4 / m2**2
    stat = n * (skew**2 / 6 + (kurt - 3) ** 2 / 24)
    cv = {a: -2.0 * math.log(a) for a in ALPHAS}
    return TestReport("jarque-bera", float(stat), cv, n)


def normal_cdf(mean: float, sd: float) -> Callable[[NDArray], NDArray]:
    return lambda v: ndtr((np.asarray(v) - mean) / sd)


def normal_fit(sample: ArrayLike) -> tuple[float, float]:
    """Sample mean and standard deviation (ddof=1)."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValidationError("normal fit needs at least two observations")
    return float(x.mean()), float(x.std(ddof=1))


def lilliefors(sample: ArrayLike) -> TestReport:
    """KS distance to the normal with estimated mean and sd."""
    xs = _sorted_sample(sample, 20)
    n = xs.size
    mean, sd = normal_fit(xs)
    if sd == 0:
        raise DegenerateSeriesError("sample has zero variance")
    stat = _ks_distance((xs - mean) / sd, ndtr)
    cv = {a: LILLIEFORS_COEF[a] / math.sqrt(n) for a in ALPHAS}
    return TestReport("lilliefors", stat, cv, n)
