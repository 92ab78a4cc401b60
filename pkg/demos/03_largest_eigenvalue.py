"""The cluster mode's sample eigenvalue is close to Gaussian.

Collects the largest eigenvalue over repeated simulations and runs the
normality battery on it.
"""

import numpy as np

from corrspec.factor_model import simulate, single_cluster_config
from corrspec.linalg import pearson_estimator, standardize, sym_eigen
from corrspec.stats import jarque_bera, ks_test, lilliefors, normal_cdf, normal_fit

lam = np.array([
    sym_eigen(pearson_estimator(standardize(simulate(single_cluster_config(500, 100, 0.85, 2000, seed=s))))).eigenvalues[-1]
    for s in range(100)
])
mean, sd = normal_fit(lam)
print(f"largest eigenvalue: mean {mean:.3f}, sd {sd:.3f} over {lam.size} runs")
for rep in (jarque_bera(lam), lilliefors(lam), ks_test(lam, normal_cdf(mean, sd))):
    print(f"{rep.test_name:20s} {rep.statistic:.4f}  {rep.decisions}")
