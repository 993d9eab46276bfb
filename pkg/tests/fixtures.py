"""Frozen reference values produced by ``oracles/make_fixtures.py``.

10^5 Gaussian random walks pinned to zero, scored by code that does not
import the package.
"""

MAXB_N_Q95_N250 = 3.1383
MAXBE_N_Q95_N250 = 3.871
AREAB_MEAN_N100 = 31.3789
AREAB_MEAN_N100_SE = 0.0424
SAREAB_MEAN_N100 = 16.6658
SAREAB_MEAN_N100_SE = 0.0461
