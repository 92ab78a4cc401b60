import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from corrspec.errors import ValidationError
from corrspec.polyroots import aberth, horner, poly_mul_linear


def sort_roots(r):
    return r[np.lexsort((r.imag.round(9), r.real.round(9)))]


def test_quadratic():
    roots = aberth([[2.0, -3.0, 1.0]])[0]  # (x - 1)(x - 2)
    assert_allclose(np.sort(roots.real), [1.0, 2.0], atol=1e-13)
    assert_allclose(roots.imag, 0.0, atol=1e-13)


def test_linear_solved_directly():
    assert_allclose(aberth([[3.0, 2.0]]), [[-1.5]])


def test_complex_roots_of_unity():
    coef = np.zeros(7, dtype=complex)
    coef[0], coef[-1] = -1.0, 1.0
    roots = aberth(coef[None, :])[0]
    assert_allclose(np.abs(roots), 1.0, atol=1e-13)
    assert_allclose(np.sort(np.angle(roots) % (2 * np.pi)), 2 * np.pi * np.arange(6) / 6, atol=1e-12)


@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=6, unique=True))
def test_recovers_planted_roots(planted):
    planted = np.array(planted)
    if np.min(np.abs(planted[:, None] - planted[None, :]) + np.eye(planted.size) * 9) < 1e-2:
        return  # near-multiple roots are ill-conditioned
    coef = np.array([[1.0 + 0j]])
    for r in planted:
        coef = poly_mul_linear(coef, -r, 1.0)
    found = aberth(coef)[0]
    for r in planted:
        assert np.min(np.abs(found - r)) < 1e-8


def test_batch_matches_numpy(rng):
    coef = rng.standard_normal((20, 5)) + 1j * rng.standard_normal((20, 5))
    got = aberth(coef)
    for c, r in zip(coef, got):
        ref = np.roots(c[::-1])
        assert_allclose(sort_roots(r), sort_roots(ref), atol=1e-9)


def test_horner_value_and_derivative():
    coef = np.array([[1.0, 2.0, 3.0]])  # 1 + 2x + 3x^2
    p, dp = horner(coef, np.array([[2.0]]))
    assert p[0, 0] == 17.0
    assert dp[0, 0] == 14.0


def test_zero_leading_coefficient_rejected():
    with pytest.raises(ValidationError):
        aberth([[1.0, 0.0]])
