"""
Why the response is centered per arm
====================================

Subtracting each arm's mean response shrinks the variance of the modified
outcome without touching its covariance with any covariate. With a large
shared baseline the uncentered walk drowns the interaction.
"""

import numpy as np

from walktest import McConfig, run_single_test
from walktest.data import TrialDataset
from walktest.preprocess import prepare, variance_diagnostics

rng = np.random.default_rng(3)
n = 300
x = rng.uniform(size=n)
T = rng.choice([-1.0, 1.0], size=n)
# baseline of 5 in both arms, interaction 1.5 (x - 1/2) T
R = 5.0 + 1.5 * (x - 0.5) * T + rng.standard_normal(n)
data = TrialDataset(x.reshape(-1, 1), ("x",), T, R)

diag = variance_diagnostics(data)
print(f"var uncentered {diag.var_mod:.3f}, centered {diag.var_centered:.3f}")
print(f"ratio {diag.empirical_ratio:.4f}, closed form {diag.gamma:.4f}")

y = prepare(data, centered=True)
y_raw = prepare(data, centered=False)
cfg = McConfig(m=5000, seed=1)
p_max = run_single_test(y, x, "Max", cfg, y_raw=y_raw).p_value
p_maxb = run_single_test(y, x, "MaxB", cfg).p_value
print(f"Max (uncentered walk) p = {p_max:.4f}")
print(f"MaxB (centered bridge) p = {p_maxb:.4f}")
