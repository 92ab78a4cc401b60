"""All-roots solver for batches of complex polynomials (Aberth-Ehrlich).

Coefficients are stored in ascending order: ``c[..., k]`` multiplies
``x**k``. Every polynomial in a batch has the same nominal degree.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConvergenceError, ValidationError

__all__ = ["horner", "aberth", "poly_mul_linear"]


def horner(coef: NDArray, x: NDArray) -> tuple[NDArray, NDArray]:
    """Values and first derivatives at ``x``.

    ``coef`` has shape (P, d + 1) and ``x`` shape (P, r); returns two
    (P, r) arrays.
    """
    p = np.broadcast_to(coef[:, -1:], x.shape).astype(complex)
    dp = np.zeros_like(p)
    for k in range(coef.shape[1] - 2, -1, -1):
        dp = dp * x + p
        p = p * x + coef[:, k:k + 1]
    return p, dp


def poly_mul_linear(coef: NDArray, a0: ArrayLike, a1: ArrayLike) -> NDArray:
    """Multiply each polynomial in ``coef`` by ``a0 + a1 x``."""
    a0 = np.asarray(a0)[..., None] if np.ndim(a0) else a0
    a1 = np.asarray(a1)[..., None] if np.ndim(a1) else a1
    out = np.zeros(coef.shape[:-1] + (coef.shape[-1] + 1,), dtype=complex)
    out[..., :-1] += a0 * coef
    out[..., 1:] += a1 * coef
    return out


def _initial_guesses(coef: NDArray) -> NDArray:
    d = coef.shape[1] - 1
    lead = coef[:, -1]
    # Fujiwara-type bound on root moduli
    ratios = np.abs(coef[:, :-1] / lead[:, None]) ** (1.0 / np.arange(d, 0, -1))
    radius = 2.0 * np.max(ratios, axis=1)
    radius = np.where(radius > 0, radius, 1.0)
    angles = 2.0 * np.pi * np.arange(d) / d + 0.4
    return radius[:, None] * 0.5 * np.exp(1j * angles)[None, :]


def aberth(
    coef: ArrayLike,
    init: ArrayLike | None = None,
    tol: float = 2e-14,
    max_iter: int = 500,
) -> NDArray[np.complex128]:
    """Roots of every polynomial in the batch, shape (P, degree).

    ``init`` optionally seeds the iteration (e.g. roots at a neighbouring
    grid point); all roots of one polynomial must start distinct.
    """
    c = np.atleast_2d(np.asarray(coef, dtype=complex))
    if c.shape[1] < 2:
        raise ValidationError("polynomial degree must be >= 1")
    if np.any(c[:, -1] == 0):
        raise ValidationError("leading coefficient is zero")
    d = c.shape[1] - 1
    if d == 1:
        return (-c[:, 0] / c[:, 1])[:, None]
    z = _initial_guesses(c) if init is None else np.array(init, dtype=complex, copy=True)
    active = np.ones(c.shape[0], dtype=bool)
    offdiag = ~np.eye(d, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        zs = z[idx]
        p, dp = horner(c[idx], zs)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = zs[:, :, None] - zs[:, None, :]
            inv = np.where(offdiag, 1.0 / np.where(offdiag, diff, 1.0), 0.0)
            s = inv.sum(axis=2)
            step = ratio / (1.0 - ratio * s)
        step = np.where(p == 0, 0.0, step)
        bad = ~np.isfinite(step)
        if np.any(bad):
            # nudge colliding iterates apart
            step = np.where(bad, 1e-8 * (1 + np.abs(zs)) * np.exp(1j * 0.7), step)
        zs = zs - step
        z[idx] = zs
        done = np.all(np.abs(step) <= tol * np.maximum(np.abs(zs), 1e-300) + 1e-300, axis=1)
        active[idx[done]] = False
    if np.any(active):
        # tolerate roots that stalled at the rounding floor
        idx = np.flatnonzero(active)
        p, dp = horner(c[idx], z[idx])
        scale = np.abs(c[idx]).sum(axis=1)[:, None] * np.maximum(1.0, np.abs(z[idx])) ** d
        if np.any(np.abs(p) > 1e-10 * scale):
            raise ConvergenceError(f"Aberth iteration failed for {idx.size} polynomial(s)")
    return z
