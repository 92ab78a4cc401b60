"""Noise-dressed spectra in the thermodynamic limit.

A true correlation spectrum with L distinct eigenvalues ``Lam_i`` of
weights ``w_i`` has moment generating function

    M(Z) = sum_i w_i Lam_i / (Z - Lam_i).

The sample moment generating function ``m(z)`` satisfies
``m = M(z / (1 + q m))``; clearing denominators gives a polynomial of
degree L + 1 in ``m``. For ``Im z > 0`` exactly one of its roots has
``Im m < 0``, and that root is the physical branch (it is the one that
behaves as ``(sum_i w_i Lam_i) / z`` for large ``z``). The sample density
is ``rho(lam) = -Im m(lam + i eps) / (pi lam)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from .errors import (
    BranchSelectionError,
    DomainError,
    SingularityError,
    ValidationError,
)
from .linalg import DensityCurve, histogram, support_intervals
from .polyroots import aberth, horner, poly_mul_linear

__all__ = [
    "MPParams",
    "DegenerateSpectrum",
    "SolverConfig",
    "MPFit",
    "mp_edges",
    "mp_density",
    "mp_cdf",
    "moment_gen_C",
    "mc_polynomial",
    "solve_mc",
    "density_from_spectrum",
    "default_grid",
    "green_from_mgf",
    "conformal_map",
    "mp_fit",
]

EDGE_CUTOFF = 1e-4


@dataclass(frozen=True)
class MPParams:
    q: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (self.q > 0 and self.sigma > 0):
            raise ValidationError(f"MP parameters must be positive (q={self.q}, sigma={self.sigma})")


@dataclass(frozen=True)
class DegenerateSpectrum:
    """Distinct eigenvalues with weights summing to one."""

    entries: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        entries = tuple((float(v), float(w)) for v, w in self.entries)
        if not entries:
            raise ValidationError("spectrum needs at least one eigenvalue")
        lam = [v for v, _ in entries]
        if any(not v > 0 for v in lam):
            raise ValidationError("eigenvalues must be positive")
        if len(set(lam)) != len(lam):
            raise ValidationError("eigenvalues must be distinct")
        if any(not 0 < w <= 1 for _, w in entries):
            raise ValidationError("weights must lie in (0, 1]")
        if abs(sum(w for _, w in entries) - 1.0) > 1e-12:
            raise ValidationError("weights must sum to 1")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_counts(cls, pairs: Iterable[tuple[float, float]]) -> "DegenerateSpectrum":
        """Build from (eigenvalue, multiplicity) pairs, merging equal values."""
        acc: dict[float, float] = {}
        for v, n in pairs:
            if n > 0:
                acc[float(v)] = acc.get(float(v), 0.0) + float(n)
        total = sum(acc.values())
        return cls(tuple((v, n / total) for v, n in sorted(acc.items())))

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def eigenvalues(self) -> NDArray[np.float64]:
        return np.array([v for v, _ in self.entries])

    @property
    def weights(self) -> NDArray[np.float64]:
        return np.array([w for _, w in self.entries])

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.eigenvalues**k))


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-6
    grid: NDArray[np.float64] | None = None
    branch_seed_z: float = 1e6

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.grid is not None:
            g = np.array(self.grid, dtype=np.float64)
            if g.ndim != 1 or g.size < 2:
                raise ValidationError("grid needs at least two points")
            if np.any(g <= 0):
                raise ValidationError("grid points must be positive")
            steps = np.diff(g)
            if np.any(steps <= 0):
                raise ValidationError("grid must be strictly increasing")
            if steps.min() < 10 * self.epsilon:
                raise ValidationError("grid spacing must be at least 10 * epsilon")
            g.setflags(write=False)
            object.__setattr__(self, "grid", g)


# -- Marchenko-Pastur --------------------------------------------------------

def mp_edges(p: MPParams) -> tuple[float, float]:
    s2 = p.sigma**2
    r = math.sqrt(p.q)
    return s2 * (1 - r) ** 2, s2 * (1 + r) ** 2


def mp_density(lam: ArrayLike, p: MPParams) -> NDArray[np.float64] | float:
    """Marchenko-Pastur density (continuous part)."""
    x = np.asarray(lam, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError("MP density is defined for lambda > 0")
    lo, hi = mp_edges(p)
    inside = (x >= lo) & (x <= hi)
    val = np.zeros_like(x)
    xi = x[inside]
    val[inside] = np.sqrt(np.clip((hi - xi) * (xi - lo), 0, None)) / (
        2 * np.pi * p.q * p.sigma**2 * xi
    )
    return float(val) if np.ndim(lam) == 0 else val


def mp_cdf(lam: ArrayLike, p: MPParams) -> NDArray[np.float64] | float:
    """Closed-form CDF of the continuous MP part, normalised to one.

    For q > 1 the atom at zero is dropped so the returned CDF describes
    the non-zero eigenvalues only.
    """
    x = np.asarray(lam, dtype=np.float64)
    lo, hi = mp_edges(p)
    y = np.clip(x, lo, hi)
    a, b = lo, hi
    r = np.sqrt(np.clip((b - y) * (y - a), 0, None))
    # antiderivative of sqrt((b-x)(x-a))/x
    th1 = np.arcsin(np.clip((2 * y - a - b) / (b - a), -1, 1))
    arg = ((a + b) * y - 2 * a * b) / (y * (b - a))
    th2 = np.arcsin(np.clip(arg, -1, 1))
    prim = r + 0.5 * (a + b) * th1 - math.sqrt(a * b) * th2

    def prim_at(v):
        rv = math.sqrt(max((b - v) * (v - a), 0.0))
        t1 = math.asin(max(-1.0, min(1.0, (2 * v - a - b) / (b - a))))
        t2 = math.asin(max(-1.0, min(1.0, ((a + b) * v - 2 * a * b) / (v * (b - a)))))
        return rv + 0.5 * (a + b) * t1 - math.sqrt(a * b) * t2

    total = prim_at(b) - prim_at(a)
    out = (prim - prim_at(a)) / total
    out = np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, out))
    return float(out) if np.ndim(lam) == 0 else out


# -- generating functions ----------------------------------------------------

def moment_gen_C(spec: DegenerateSpectrum, Z: complex | NDArray) -> complex | NDArray:
    """M(Z) = sum_i w_i Lam_i / (Z - Lam_i)."""
    z = np.asarray(Z, dtype=complex)
    lam = spec.eigenvalues
    w = spec.weights
    diff = z[..., None] - lam
    if np.any(diff == 0):
        raise SingularityError(f"Z hits a pole of M (Z={Z})")
    out = np.sum(w * lam / diff, axis=-1)
    return complex(out) if out.ndim == 0 else out


def green_from_mgf(M: complex, Z: complex) -> complex:
    """G(Z) = (M(Z) + 1) / Z."""
    if Z == 0:
        raise DomainError("Z must be non-zero")
    return (M + 1) / Z


def conformal_map(z: complex, m: complex, q: float) -> complex:
    """Z = z / (1 + q m)."""
    den = 1 + q * m
    if den == 0:
        raise SingularityError("1 + q m vanishes")
    return z / den


def mc_polynomial(spec: DegenerateSpectrum, q: float, z: ArrayLike) -> NDArray[np.complex128]:
    """Ascending coefficients in ``m`` of the cleared self-consistency equation.

    With ``a_i(m) = (z - Lam_i) - q Lam_i m`` the polynomial is

        m prod_i a_i - sum_i w_i Lam_i (1 + q m) prod_{j != i} a_j.

    Returns shape (P, L + 2) for P values of ``z``.
    """
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    lam = spec.eigenvalues
    w = spec.weights
    nl = lam.size
    p = zz.size
    # prefix/suffix products avoid division when forming prod_{j != i}
    ones = np.ones((p, 1), dtype=complex)
    prefix = [ones]
    for i in range(nl):
        prefix.append(poly_mul_linear(prefix[-1], zz - lam[i], -q * lam[i]))
    suffix = [ones]
    for i in range(nl - 1, -1, -1):
        suffix.append(poly_mul_linear(suffix[-1], zz - lam[i], -q * lam[i]))
    suffix = suffix[::-1]
    full = prefix[nl]
    coef = np.zeros((p, nl + 2), dtype=complex)
    coef[:, 1:] += full
    for i in range(nl):
        others = _poly_mul(prefix[i], suffix[i + 1])
        term = poly_mul_linear(others, w[i] * lam[i], w[i] * lam[i] * q)
        coef[:, : term.shape[1]] -= term
    return coef


def _poly_mul(a: NDArray, b: NDArray) -> NDArray:
    out = np.zeros((a.shape[0], a.shape[1] + b.shape[1] - 1), dtype=complex)
    for k in range(b.shape[1]):
        out[:, k:k + a.shape[1]] += a * b[:, k:k + 1]
    return out


def _newton_polish(coef: NDArray, m: NDArray, steps: int = 3) -> NDArray:
    for _ in range(steps):
        p, dp = horner(coef, m[:, None])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp[:, 0] != 0, p[:, 0] / dp[:, 0], 0)
        step = np.where(np.isfinite(step), step, 0)
        m = m - step
    return m


def _im_tol(roots: NDArray) -> NDArray:
    return 1e-12 * np.maximum(1.0, np.abs(roots))


def _select(roots: NDArray, prev: NDArray | None) -> tuple[NDArray, NDArray]:
    """Physical root per row; second output flags rows needing the anchor path.

    Rows with exactly one root of clearly negative imaginary part are
    resolved directly. Otherwise the candidates are the roots with
    ``Im m <= tol``; with ``prev`` available the nearest candidate wins.
    """
    tol = _im_tol(roots)
    neg = roots.imag < -tol
    nneg = neg.sum(axis=1)
    pick = np.argmax(neg, axis=1)
    unresolved = nneg != 1
    if prev is not None and np.any(unresolved):
        cand = roots.imag <= tol
        dist = np.abs(roots - prev[:, None])
        dist = np.where(cand, dist, np.inf)
        alt = np.argmin(dist, axis=1)
        ok = unresolved & np.isfinite(dist[np.arange(len(alt)), alt])
        pick = np.where(ok, alt, pick)
        unresolved = unresolved & ~ok
    return roots[np.arange(roots.shape[0]), pick], unresolved


def _anchor_path(spec: DegenerateSpectrum, q: float, z: complex, seed_z: float) -> complex:
    """Follow the physical root from a far anchor down to ``z``."""
    mu1 = spec.moment(1)
    height = max(seed_z, 10 * abs(z))
    start = complex(z.real, height)
    coef = mc_polynomial(spec, q, start)
    roots = aberth(coef)[0]
    target = mu1 / start
    m = roots[np.argmin(np.abs(roots - target))]
    if abs(m - target) > 1e-2 * abs(target):
        raise BranchSelectionError("no root matches the large-z asymptote", z=start, roots=roots)
    heights = np.geomspace(height, z.imag, 400)[1:]
    for h in heights:
        zh = complex(z.real, h)
        coef = mc_polynomial(spec, q, zh)
        roots = aberth(coef)[0]
        m = roots[np.argmin(np.abs(roots - m))]
    return complex(_newton_polish(mc_polynomial(spec, q, z), np.array([m]))[0])


def solve_mc(
    spec: DegenerateSpectrum,
    q: float,
    z: complex,
    prev: complex | None = None,
    branch_seed_z: float = 1e6,
) -> complex:
    """Physical root ``m_c(z)`` of the degree-(L+1) polynomial, ``Im z > 0``."""
    if not q > 0:
        raise ValidationError("q must be positive")
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("z must lie in the upper half plane")
    coef = mc_polynomial(spec, q, z)
    roots = aberth(coef)
    if roots.shape[1] != spec.count + 1:
        raise BranchSelectionError("wrong number of roots", z=z, roots=roots[0])
    pv = None if prev is None else np.array([complex(prev)])
    m, unresolved = _select(roots, pv)
    if unresolved[0]:
        if not np.any(roots[0].imag <= _im_tol(roots[0])):
            raise BranchSelectionError(
                f"no root with Im m <= 0 at z={z}", z=z, roots=roots[0]
            )
        return _anchor_path(spec, q, z, branch_seed_z)
    return complex(_newton_polish(coef, m)[0])


def default_grid(spec: DegenerateSpectrum, q: float, n: int = 4001) -> NDArray[np.float64]:
    """Uniform grid covering the dressed support with a margin."""
    lam = spec.eigenvalues
    r = math.sqrt(q)
    lo = lam.min() * (1 - r) ** 2 if q < 1 else 0.0
    hi = lam.max() * (1 + r) ** 2
    span = hi - lo
    # stay clear of lambda -> 0, where the eps-tail of rho grows like eps/lambda
    lo = max(lo - 0.05 * span, 0.5 * lo, 1e-3 * hi)
    hi = hi + 0.05 * span
    return np.linspace(lo, hi, n)


def density_from_spectrum(
    spec: DegenerateSpectrum, q: float, cfg: SolverConfig | None = None
) -> DensityCurve:
    """Sample eigenvalue density of the noise-dressed spectrum on a grid."""
    if not q > 0:
        raise ValidationError("q must be positive")
    cfg = cfg or SolverConfig()
    grid = cfg.grid if cfg.grid is not None else default_grid(spec, q)
    eps = cfg.epsilon
    z = grid + 1j * eps
    coef = mc_polynomial(spec, q, z)
    roots = aberth(coef)
    if roots.shape[1] != spec.count + 1:
        raise BranchSelectionError("polynomial root count mismatch")
    m, unresolved = _select(roots, None)
    if np.any(unresolved):
        # thread continuity left to right through the ambiguous points
        prev = None
        for i in range(len(grid)):
            if unresolved[i]:
                if prev is None:
                    m[i] = _anchor_path(spec, q, complex(z[i]), cfg.branch_seed_z)
                else:
                    cand = roots[i][roots[i].imag <= _im_tol(roots[i])]
                    if cand.size == 0:
                        raise BranchSelectionError(
                            f"no admissible root at lambda={grid[i]}", z=complex(z[i]), roots=roots[i]
                        )
                    m[i] = cand[np.argmin(np.abs(cand - prev))]
            prev = m[i]
    m = _newton_polish(coef, m)
    if np.any(m.imag > 0):
        bad = int(np.flatnonzero(m.imag > 0)[0])
        raise BranchSelectionError(
            f"selected root violates Im m <= 0 at lambda={grid[bad]}", z=complex(z[bad])
        )
    # self-check through the conformal map: M(Z(m)) must reproduce m
    zc = z / (1 + q * m)
    resid = np.abs(moment_gen_C(spec, zc) - m) / np.maximum(1.0, np.abs(m))
    rho = np.clip(-m.imag / (np.pi * grid), 0.0, None)
    mass = float(np.trapezoid(rho, grid))
    edges = support_intervals(grid, rho, EDGE_CUTOFF)
    return DensityCurve(
        grid, rho, mass, edges=edges,
        meta={
            "q": q,
            "epsilon": eps,
            "spectrum": [list(e) for e in spec.entries],
            "max_roundtrip_residual": float(resid.max()),
            "m": m,
        },
    )


# -- Marchenko-Pastur fitting -------------------------------------------------

@dataclass(frozen=True)
class MPFit:
    params: MPParams
    residual: float
    converged: bool
    iterations: int
    history: tuple = field(default=(), compare=False)


_JITTER = ((1.0, 1.0), (1.15, 0.95), (0.85, 1.05))


def mp_fit(
    data: DensityCurve | ArrayLike,
    *,
    q0: float | None = None,
    sigma0: float | None = None,
    bins: int = 100,
    max_iter: int = 200,
) -> MPFit:
    """Least-squares MP fit (q, sigma) to a histogram or density curve.

    Minimises the squared L2 distance between the MP density and the
    empirical density over the empirical support, by Nelder-Mead in
    log-parameters from three deterministic starting points.
    """
    if isinstance(data, DensityCurve):
        x, y = np.asarray(data.lam), np.asarray(data.rho)
        w = data.widths if data.widths is not None else np.gradient(x)
        n_obs = None
    else:
        vals = np.asarray(data, dtype=np.float64).ravel()
        if vals.size < 20:
            raise ValidationError("MP fit needs at least 20 eigenvalues")
        h = histogram(vals, bins, (float(vals.min()), float(vals.max())))
        x, y, w = np.asarray(h.lam), np.asarray(h.rho), np.asarray(h.widths)
        n_obs = vals
    if x.size == 0:
        raise ValidationError("empty density curve")
    keep = x > 0
    x, y, w = x[keep], y[keep], w[keep]
    if sigma0 is None:
        mean = float(np.mean(n_obs)) if n_obs is not None else float(np.sum(x * y * w) / np.sum(y * w))
        sigma0 = math.sqrt(max(mean, 1e-12))
    if q0 is None:
        if n_obs is not None:
            # variance of MP is q sigma^4
            q0 = max(float(np.var(n_obs)) / sigma0**4, 1e-3)
        else:
            mean = float(np.sum(x * y * w) / np.sum(y * w))
            var = float(np.sum((x - mean) ** 2 * y * w) / np.sum(y * w))
            q0 = max(var / sigma0**4, 1e-3)

    def loss(theta):
        q, s = math.exp(theta[0]), math.exp(theta[1])
        dens = mp_density(x, MPParams(q, s))
        return float(np.sum((dens - y) ** 2 * w))

    best = None
    total_iter = 0
    history = []
    for jq, js in _JITTER:
        start = np.array([math.log(q0 * jq), math.log(sigma0 * js)])
        res = minimize(loss, start, method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-6, "fatol": 1e-12})
        total_iter += int(res.nit)
        history.append((float(math.exp(res.x[0])), float(math.exp(res.x[1])), float(res.fun), bool(res.success)))
        if best is None or res.fun < best.fun:
            best = res
    params = MPParams(float(math.exp(best.x[0])), float(math.exp(best.x[1])))
    return MPFit(params, float(best.fun), bool(best.success), total_iter, tuple(history))
