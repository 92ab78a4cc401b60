import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from corrspec.cluster_filter import (
    BootstrapSpec,
    ClusterPartition,
    FilterThresholds,
    assemble,
    bootstrap_spectra,
    filter_partition,
    find_background,
    find_cluster,
    mean_rho,
    overlay_spectrum,
    partition_is_valid,
    reshuffle,
    right_bulk_mean,
)
from corrspec.errors import ValidationError
from corrspec.factor_model import BlockModel, analytic_spectrum_block, block_correlation
from corrspec.linalg import ReturnMatrix, pearson_estimator, standardize, sym_eigen
from corrspec.surrogates import planted_panel


def planted_matrix(seed, n=40, k=7, rho=0.71, noise=0.2):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-noise, noise, (n, n))
    a = np.triu(a, 1)
    a = a + a.T
    members = np.sort(rng.choice(n, k, replace=False))
    a[np.ix_(members, members)] = rho + rng.uniform(0, 0.05, (k, k))
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, 1.0)
    return a, tuple(int(i) for i in members)


def max_cliques(a, rho_u):
    g = nx.Graph()
    g.add_nodes_from(range(a.shape[0]))
    g.add_edges_from((i, j) for i, j in itertools.combinations(range(a.shape[0]), 2) if a[i, j] >= rho_u)
    best = max(len(c) for c in nx.find_cliques(g))
    return {tuple(sorted(c)) for c in nx.find_cliques(g) if len(c) == best}


# -- cluster search ----------------------------------------------------------------------

def test_complete_graph():
    assert find_cluster(np.ones((5, 5)), 0.9) == (0, 1, 2, 3, 4)


def test_identity_has_no_cluster():
    assert find_cluster(np.eye(5), 0.5, min_size=2) is None


@pytest.mark.parametrize("seed", range(20))
def test_planted_clique_matches_exhaustive_search(seed):
    a, members = planted_matrix(seed)
    cliques = max_cliques(a, 0.5)
    assert cliques == {members}
    assert find_cluster(a, 0.5) == members


def test_max_size_caps_growth():
    assert len(find_cluster(np.ones((6, 6)), 0.9, max_size=3)) == 3


def test_min_size_not_reached():
    a, _ = planted_matrix(0, k=3)
    assert find_cluster(a, 0.5, min_size=4) is None


def test_ties_go_to_lowest_index():
    a = np.eye(6)
    a[0, 1] = a[1, 0] = a[4, 5] = a[5, 4] = 0.8
    assert find_cluster(a, 0.5) == (0, 1)


# -- background search ------------------------------------------------------------------

def test_block_model_background_is_identity_block():
    c = block_correlation(BlockModel(((5, 0.8),), 10)).matrix
    cluster = find_cluster(c, 0.5)
    assert cluster == tuple(range(5))
    assert find_background(c, cluster, 0.1, 0.1) == tuple(range(5, 15))
    assert find_background(c, cluster, 0.0, 0.0) == tuple(range(5, 15))


def test_zero_thresholds_on_noisy_matrix():
    a, members = planted_matrix(3)
    assert find_background(a, members, 0.0, 0.0) == ()


def test_background_respects_bounds():
    a, members = planted_matrix(5, noise=0.3)
    bg = find_background(a, members, 0.28, 0.2)
    assert len(bg) >= 2
    assert np.abs(a[np.ix_(members, bg)]).max() <= 0.28
    sub = np.abs(a[np.ix_(bg, bg)])
    assert sub[~np.eye(len(bg), dtype=bool)].max() <= 0.2
    # maximal: every other eligible asset conflicts with a chosen one
    for j in set(range(40)) - set(members) - set(bg):
        if np.abs(a[list(members), j]).max() <= 0.28:
            assert np.abs(a[list(bg), j]).max() > 0.2


def test_sp_style_background():
    panel = planted_panel(7, 0.712, 33, 3400, rho_background=0.099, rho_cross=0.096,
                          n_decoy=6, rho_decoy=0.45, seed=2, scramble=True)
    c = pearson_estimator(standardize(panel.returns))
    cluster = find_cluster(c, 0.6)
    assert cluster == panel.cluster_idx
    bg = find_background(c, cluster, 0.25, 0.25)
    assert len(bg) >= 30
    assert not set(bg) & set(panel.decoy_idx)
    assert mean_rho(c, cluster) == pytest.approx(0.712, abs=0.02)


# -- small helpers -------------------------------------------------------------------------

def test_mean_rho():
    assert mean_rho(np.ones((4, 4)), range(4)) == 1.0
    assert mean_rho(np.array([[1.0, 0.3], [0.3, 1.0]]), [0, 1]) == pytest.approx(0.3)
    with pytest.raises(ValidationError):
        mean_rho(np.eye(3), [1])


def test_thresholds_ordering():
    FilterThresholds(0.6, 0.2, 0.25)
    for bad in [(0.6, 0.3, 0.2), (0.2, 0.1, 0.3), (0.6, 0.0, 0.2), (1.2, 0.1, 0.2)]:
        with pytest.raises(ValidationError):
            FilterThresholds(*bad)


def test_partition_validation():
    with pytest.raises(ValidationError):
        ClusterPartition((0, 1), (1, 2), 4)
    with pytest.raises(ValidationError):
        ClusterPartition((0, 1), (5,), 4)


# -- assembly ----------------------------------------------------------------------------------

def test_assemble_identity_ordering():
    a, _ = planted_matrix(1, n=8, k=3)
    out = assemble(a, ClusterPartition(range(3), range(3, 8), 8))
    assert_array_equal(out.matrix, a)


def test_assemble_unscrambles_block_model():
    c = block_correlation(BlockModel(((4, 0.7),), 6)).matrix
    perm = np.random.default_rng(0).permutation(10)
    scrambled = c[np.ix_(perm, perm)]
    cluster = find_cluster(scrambled, 0.5)
    part = ClusterPartition(cluster, find_background(scrambled, cluster, 0.1, 0.1), 10)
    assert_array_equal(assemble(scrambled, part).matrix, c)


def test_assemble_rejects_wrong_dimension():
    with pytest.raises(ValidationError):
        assemble(np.eye(5), ClusterPartition((0, 1), (2,), 4))


@given(st.integers(2, 6), st.floats(0.3, 0.95), st.integers(0, 5), st.integers(0, 10_000))
def test_pipeline_reproduces_block_spectrum(n_bar, rho, n_bg, seed):
    model = BlockModel(((n_bar, rho),), n_bg)
    c = block_correlation(model).matrix
    perm = np.random.default_rng(seed).permutation(model.n_assets)
    scrambled = c[np.ix_(perm, perm)]
    part = filter_partition(scrambled, FilterThresholds(rho - 1e-9, 0.01, 0.01))
    assert part is not None
    assert partition_is_valid(scrambled, part, FilterThresholds(rho - 1e-9, 0.01, 0.01))
    eig = sym_eigen(assemble(scrambled, part)).eigenvalues
    assert_allclose(eig, analytic_spectrum_block(model).values(), atol=1e-10)
    assert_allclose(eig, sym_eigen(scrambled).eigenvalues, atol=1e-12)


def test_validity_predicate_detects_violations():
    c = block_correlation(BlockModel(((3, 0.8),), 3)).matrix.copy()
    part = ClusterPartition((0, 1, 2), (3, 4, 5), 6)
    th = FilterThresholds(0.7, 0.1, 0.1)
    assert partition_is_valid(c, part, th)
    c[0, 4] = c[4, 0] = 0.3
    assert not partition_is_valid(c, part, th)


# -- reshuffle and bootstrap ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def ftse_like():
    panel = planted_panel(7, 0.707, 21, 1423, seed=4)
    c = pearson_estimator(standardize(panel.returns))
    part = filter_partition(c, FilterThresholds(0.5, 0.2, 0.2))
    return panel, c, part


def test_reshuffle_preserves_rows(rng):
    r = ReturnMatrix(rng.standard_normal((4, 50)))
    out = reshuffle(r, [1, 3], seed=3)
    for i in range(4):
        assert_array_equal(np.sort(out.data[i]), np.sort(r.data[i]))
    assert_array_equal(out.data[[0, 2]], r.data[[0, 2]])
    assert_array_equal(out.data, reshuffle(r, [1, 3], seed=3).data)


def test_reshuffle_decorrelates_identical_rows(rng):
    t = 500
    row = rng.standard_normal(t)
    r = ReturnMatrix(np.vstack([row, row]))
    hits = sum(abs(np.corrcoef(reshuffle(r, [0, 1], seed=s).data)[0, 1]) < 3 / np.sqrt(t)
               for s in range(200))
    assert hits >= 198


def test_single_full_bootstrap_equals_direct_pipeline(ftse_like):
    panel, c, part = ftse_like
    res = bootstrap_spectra(panel.returns, part, BootstrapSpec(iterations=1))
    direct = sym_eigen(pearson_estimator(standardize(panel.returns.rows(part.order)))).eigenvalues
    assert_array_equal(res.samples[0], direct)


def test_bootstrap_small_bulk_multiplicity(ftse_like):
    panel, c, part = ftse_like
    res = bootstrap_spectra(panel.returns, part, BootstrapSpec(100, 18, False, seed=1))
    for eig in res.samples:
        assert eig.size == 25
        assert np.sum(eig < 0.5) == 6
    assert abs(res.density.mass - 1) < 1e-12


def test_reshuffled_background_bulk(ftse_like):
    panel, c, part = ftse_like
    res = bootstrap_spectra(panel.returns, part, BootstrapSpec(100, 18, True, seed=1))
    means = [right_bulk_mean(e, part.n_cluster, 1) for e in res.samples]
    assert np.mean(means) == pytest.approx(1.0, abs=0.03)


def test_bootstrap_deterministic_across_workers(ftse_like):
    panel, c, part = ftse_like
    spec = BootstrapSpec(12, 15, True, seed=7)
    a = bootstrap_spectra(panel.returns, part, spec, workers=1)
    b = bootstrap_spectra(panel.returns, part, spec, workers=8)
    for x, y in zip(a.samples, b.samples):
        assert_array_equal(x, y)


def test_bootstrap_keep_too_many(ftse_like):
    panel, c, part = ftse_like
    with pytest.raises(ValidationError):
        bootstrap_spectra(panel.returns, part, BootstrapSpec(1, 22))


# -- overlays ------------------------------------------------------------------------------------

def test_ftse_overlay_values():
    c = block_correlation(BlockModel(((7, 0.707),), 21))
    part = ClusterPartition(range(7), range(7, 28), 28)
    spec = overlay_spectrum(part, c, large_eig_count=1)
    assert spec.entries[0][0] == pytest.approx(0.293)
    assert spec.entries[0][1] == pytest.approx(6 / 27)
    assert spec.entries[1] == (1.0, pytest.approx(21 / 27))


def test_sp_overlay_with_given_lambda2():
    c = block_correlation(BlockModel(((7, 0.712),), 33))
    part = ClusterPartition(range(7), range(7, 40), 40)
    spec = overlay_spectrum(part, c, large_eig_count=2, lambda2=0.887)
    assert spec.entries[0][0] == pytest.approx(0.288)
    assert spec.entries[1][0] == 0.887
    assert spec.entries[0][1] == pytest.approx(6 / 38)
    assert sum(spec.weights) == pytest.approx(1.0)


def test_empirical_lambda2(ftse_like):
    panel, c, part = ftse_like
    spec = overlay_spectrum(part, c, large_eig_count=1, lambda2="empirical")
    eig = sym_eigen(assemble(c, part)).eigenvalues
    assert spec.entries[1][0] == pytest.approx(np.sort(eig)[6:-1].mean())


def test_uncorrelated_overlay_collapses():
    part = ClusterPartition(range(3), range(3, 6), 6)
    spec = overlay_spectrum(part, np.eye(6), large_eig_count=1)
    assert spec.entries == ((1.0, 1.0),)
