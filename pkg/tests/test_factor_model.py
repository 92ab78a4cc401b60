import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from corrspec.errors import ValidationError
from corrspec.factor_model import (
    BlockModel,
    FactorModelConfig,
    analytic_spectrum_block,
    analytic_spectrum_single_cluster,
    analytic_spectrum_strong_clusters,
    block_correlation,
    gamma_for_rho,
    simulate,
    single_cluster_config,
    theoretical_correlation,
)
from corrspec.linalg import pearson_estimator, standardize, sym_eigen


def test_pure_noise_rows_have_unit_variance():
    r = simulate(FactorModelConfig(20, 2000, seed=3))
    var = r.data.var(axis=1, ddof=1)
    assert np.all((var > 0.9) & (var < 1.1))


def test_full_common_mode_copies_market():
    r = simulate(FactorModelConfig(5, 100, common_mode=1.0, seed=1)).data
    for row in r[1:]:
        assert_array_equal(row, r[0])


def test_two_bulk_cluster_correlation_matches_exact_value():
    cfg = FactorModelConfig(500, 2000, clusters=((100, 0.7),), common_mode=0.3, seed=11)
    c = pearson_estimator(standardize(simulate(cfg))).matrix
    exact = theoretical_correlation(cfg).matrix[0, 1]
    blk = c[:100, :100][~np.eye(100, dtype=bool)]
    assert abs(blk.mean() - exact) < 0.02


def test_identity_without_modes():
    c = theoretical_correlation(FactorModelConfig(6, 10)).matrix
    assert_array_equal(c, np.eye(6))


def test_background_pair_value():
    c = theoretical_correlation(FactorModelConfig(4, 10, common_mode=0.3)).matrix
    assert c[0, 1] == pytest.approx(0.09 / 0.58, abs=1e-12)
    assert c[0, 1] == pytest.approx(0.15517, abs=1e-5)


def test_strong_cluster_pair_tends_to_one():
    c = theoretical_correlation(FactorModelConfig(6, 10, clusters=((3, 1 - 1e-9),), common_mode=0.3))
    assert c.matrix[0, 1] == pytest.approx(1.0, abs=1e-8)


def test_exact_correlation_against_monte_carlo():
    cfg = FactorModelConfig(20, 50000, clusters=((6, 0.6), (5, 0.4)), common_mode=0.25, seed=5)
    est = pearson_estimator(standardize(simulate(cfg))).matrix
    assert np.max(np.abs(est - theoretical_correlation(cfg).matrix)) < 0.03


@given(st.integers(1, 12), st.lists(st.tuples(st.integers(1, 5), st.floats(0, 1)), max_size=3),
       st.floats(0, 0.95))
def test_exact_correlation_has_unit_trace_and_is_psd(n_bg, clusters, gn):
    n = n_bg + sum(s for s, _ in clusters)
    c = theoretical_correlation(FactorModelConfig(n, 10, tuple(clusters), gn)).matrix
    assert np.trace(c) == pytest.approx(n, abs=1e-12)
    assert np.linalg.eigvalsh(c).min() > -1e-9


def test_two_bulk_degenerate_value():
    spec = analytic_spectrum_strong_clusters(
        FactorModelConfig(500, 2000, clusters=((100, 1.0),), common_mode=0.3))
    values = dict((round(v, 12), m) for v, m in spec.entries)
    assert values[round(0.49 / 0.58, 12)] == 399
    assert 0.49 / 0.58 == pytest.approx(0.84, abs=5e-3)
    assert spec.total == 500


def test_strong_limit_without_common_mode():
    spec = analytic_spectrum_strong_clusters(FactorModelConfig(12, 10, clusters=((3, 1.0), (4, 1.0))))
    assert_allclose(spec.values(), [0] * 5 + [1] * 5 + [3, 4])


def test_single_cluster_eigenvalue_equals_size():
    spec = analytic_spectrum_strong_clusters(FactorModelConfig(150, 10, clusters=((100, 1.0),)))
    assert spec.largest() == 100.0


def test_strong_limit_requires_background_with_common_mode():
    with pytest.raises(ValidationError):
        analytic_spectrum_strong_clusters(FactorModelConfig(3, 10, clusters=((3, 1.0),), common_mode=0.2))


@given(st.integers(1, 6), st.lists(st.integers(1, 4), min_size=1, max_size=3), st.floats(0, 0.9))
def test_exact_spectrum_matches_strong_limit(n_bg, sizes, gn):
    cfg = FactorModelConfig(n_bg + sum(sizes), 10, tuple((s, 1.0) for s in sizes), gn)
    vals = sym_eigen(theoretical_correlation(cfg)).eigenvalues
    assert_allclose(vals, analytic_spectrum_strong_clusters(cfg).values(), atol=1e-6)


def test_block_correlation_layout():
    c = block_correlation(BlockModel(((2, 0.5),), 1)).matrix
    assert_array_equal(c, [[1, 0.5, 0], [0.5, 1, 0], [0, 0, 1]])
    assert_array_equal(block_correlation(BlockModel(((3, 0.0), (2, 0.0)), 2)).matrix, np.eye(7))


def test_block_spectrum_matches_single_cluster_formula():
    c = block_correlation(BlockModel(((30, 0.4),), 20))
    ref = analytic_spectrum_single_cluster(50, 30, 0.4).values()
    assert_allclose(sym_eigen(c).eigenvalues, ref, atol=1e-10)


def test_single_cluster_largest_values():
    assert analytic_spectrum_single_cluster(500, 100, 0.85).largest() == pytest.approx(85.15)
    assert analytic_spectrum_single_cluster(28, 7, 0.707).largest() == pytest.approx(5.242, abs=5e-4)
    assert_allclose(analytic_spectrum_single_cluster(9, 4, 0.0).values(), np.ones(9))


def test_gamma_for_rho_reproduces_rho():
    cfg = single_cluster_config(10, 4, 0.707, 100)
    assert theoretical_correlation(cfg).matrix[0, 1] == pytest.approx(0.707, abs=1e-12)
    assert gamma_for_rho(0.0) == 0.0 and gamma_for_rho(1.0) == 1.0


def test_multiplicities_conserved():
    m = BlockModel(((3, 0.2), (5, 0.9), (1, 0.5)), 4)
    assert analytic_spectrum_block(m).total == m.n_assets


def test_simulation_is_reproducible_across_workers():
    cfg = FactorModelConfig(37, 300, clusters=((10, 0.6),), common_mode=0.2, seed=9)
    a = simulate(cfg, replicate=2, workers=1).data
    b = simulate(cfg, replicate=2, workers=8).data
    assert_array_equal(a, b)
    assert not np.array_equal(a, simulate(cfg, replicate=3).data)


@pytest.mark.parametrize("kwargs", [
    dict(n_assets=0, n_obs=10),
    dict(n_assets=5, n_obs=1),
    dict(n_assets=5, n_obs=10, clusters=((6, 0.5),)),
    dict(n_assets=5, n_obs=10, clusters=((2, 1.5),)),
    dict(n_assets=5, n_obs=10, common_mode=-0.1),
])
def test_invalid_configs(kwargs):
    with pytest.raises(ValidationError):
        FactorModelConfig(**kwargs)
