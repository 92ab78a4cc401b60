"""One strongly correlated cluster splits the bulk in two.

Simulates the single-cluster factor model at a strong and a weak cluster
correlation, counts the bulks, and compares how well the dressed density
and a best-fit MP law describe the merged bulk.
"""

import numpy as np

from corrspec.factor_model import simulate, single_cluster_config
from corrspec.linalg import pearson_estimator, sample_bulks, standardize, sym_eigen
from corrspec.rmt import DegenerateSpectrum, density_from_spectrum, mp_cdf, mp_fit
from corrspec.stats import cdf_from_density, ks_test

SIMS = 20


def pooled(rho):
    eigs = []
    for s in range(SIMS):
        r = simulate(single_cluster_config(500, 100, rho, 2000, seed=s))
        eigs.append(sym_eigen(pearson_estimator(standardize(r))).eigenvalues[:-1])
    return np.concatenate(eigs)


for rho in (0.84, 0.30):
    bulks = sample_bulks(pooled(rho))
    print(f"rho = {rho:.2f}: {len(bulks)} bulk(s) at means " + ", ".join(f"{b.mean:.3f}" for b in bulks))

sample = pooled(0.30)
solved = cdf_from_density(density_from_spectrum(DegenerateSpectrum.from_counts([(0.7, 99), (1.0, 400)]), 499 / 2000))
fit = mp_fit(sample)
print(f"MP fit: q = {fit.params.q:.3f}, sigma = {fit.params.sigma:.3f}")
for name, cdf in (("dressed density", solved), ("MP fit", lambda x: mp_cdf(x, fit.params))):
    rep = ks_test(sample, cdf)
    print(f"KS vs {name:15s} D = {rep.statistic:.2e}  reject at 5%: {rep.rejects(0.05)}")
