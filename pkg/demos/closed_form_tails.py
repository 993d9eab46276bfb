"""
Limit laws of the path maxima
=============================

Under the null the normalized cumulative walk is close to Brownian motion
(uncentered) or a Brownian bridge (centered). The series tails give
asymptotic p-values without any permutations.
"""

import numpy as np

from walktest import dist
from walktest.stats import path_statistic

for kind in dist.TailKind:
    q = dist.quantile(kind, 0.05)
    print(f"{kind.value:>13}: 95% quantile {q:.5f}, tail at 1.5 = {dist.tail(kind, 1.5):.5f}")

# compare with simulated bridges of length 1000
rng = np.random.default_rng(0)
e = rng.standard_normal((20_000, 1000))
e -= e.mean(axis=1, keepdims=True)
z = np.cumsum(e, axis=1) / np.sqrt(1000 * e.var(axis=1, ddof=1))[:, None]
for stat, kind in (("MaxB", "BridgeMax"), ("MaxBE", "ExcursionMax")):
    s = path_statistic(stat, z)
    q = dist.quantile(kind, 0.05)
    # discrete walks sit slightly below the continuous limit
    print(f"{stat:>6}: simulated P[S > q95] = {np.mean(s > q):.4f} (limit 0.05)")
