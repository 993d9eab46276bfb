import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from walktest.cumproc import CumulativeProcess, circular_shift_to_min, cumulative
from walktest.stats import (
    PATH_KINDS,
    StatisticKind,
    molin_tstats,
    path_statistic,
    stat_areaB,
    stat_max,
    stat_maxB,
    stat_maxB_N,
    stat_maxBE,
    stat_maxBE_N,
    stat_molin,
    stat_sareaB,
)
import fixtures

PATH_FUNCS = (stat_max, stat_maxB, stat_maxB_N, stat_maxBE, stat_maxBE_N, stat_areaB, stat_sareaB)
PROPERTY = settings(max_examples=1000, deadline=None)


def proc(c, sigma2=1.0):
    return CumulativeProcess(np.asarray(c, dtype=float), sigma2)


def gaussian_bridges(rng, walks, n):
    e = rng.standard_normal((walks, n))
    e -= e.mean(axis=1, keepdims=True)
    return np.cumsum(e, axis=1) / np.sqrt(n * e.var(axis=1, ddof=1))[:, None]


# -- kinds --

def test_kind_parsing_and_flags():
    assert StatisticKind.parse("maxb") is StatisticKind.MAXB
    assert StatisticKind.parse("MAXBE_N") is StatisticKind.MAXBE_N
    assert StatisticKind.parse("sareab") is StatisticKind.SAREAB
    assert {k for k in StatisticKind if k.has_closed_form} == {
        StatisticKind.MAX, StatisticKind.MAXB, StatisticKind.MAXBE}
    with pytest.raises(ValueError, match="MaxBE_N"):
        StatisticKind.parse("nope")


# -- worked examples --

def test_alternating_path():
    p = cumulative([1.0, -1, 1, -1])
    assert stat_max(p) == pytest.approx(1 / math.sqrt(4 * 4 / 3))
    assert stat_maxB(p) == stat_max(p)


def test_area_examples():
    p = proc([1, 0, 1, 0])  # sqrt(N sigma2) = 2
    assert stat_areaB(p) == pytest.approx(1.0)
    assert stat_sareaB(p) == pytest.approx(0.5)


@pytest.mark.parametrize("f", PATH_FUNCS)
def test_zero_path(f):
    assert f(cumulative(np.zeros(8))) == 0.0


def test_tent_path():
    k = 10
    c = np.concatenate([np.arange(1, k + 1), np.arange(k - 1, -1, -1)])
    p = proc(c)
    assert stat_maxB(p) == pytest.approx(k / math.sqrt(2 * k))
    # hull maximum sits at the center, where sqrt(t(1-t)) = 1/2
    assert stat_maxB_N(p) == pytest.approx(k / math.sqrt(2 * k) / 0.5)
    # non-negative path: range equals max
    assert stat_maxBE(p) == pytest.approx(stat_maxB(p))


def test_early_spike_is_amplified():
    c = np.zeros(100)
    c[0] = 1.0
    p = proc(c, sigma2=0.01)  # sqrt(N sigma2) = 1
    assert stat_maxB(p) == pytest.approx(1.0)
    assert stat_maxB_N(p) == pytest.approx(1 / math.sqrt(0.01 * 0.99))


def test_range_example():
    p = proc(np.array([0.2, 0.4, -0.1, -0.6, 0.0]) * math.sqrt(5), sigma2=1.0)
    assert stat_maxBE(p) == pytest.approx(1.0)


def test_excursion_hull_on_centered_ring():
    c = np.array([-1.0, -2, -1, 0, 1, 2, 1, 0])
    p = proc(c)
    t = np.arange(1, 8) / 8
    up = circular_shift_to_min(p).c
    down = circular_shift_to_min(proc(-c)).c
    expect = max(np.max(up[:-1] / np.sqrt(t * (1 - t))), np.max(down[:-1] / np.sqrt(t * (1 - t))))
    assert stat_maxBE_N(p) == pytest.approx(expect / math.sqrt(8))


def test_degenerate_variance_gives_zero():
    p = proc([1.0, 2.0, 3.0], sigma2=0.0)
    assert all(f(p) == 0.0 for f in PATH_FUNCS)


# -- MoLin --

def test_molin_perfect_fit_is_capped():
    x = np.linspace(0, 1, 20)
    fit = stat_molin(3 * x - 1, x)
    assert fit.perfect_fit
    assert fit.statistic == 1e12
    assert fit.beta == pytest.approx(3.0)


def test_molin_constant_covariate():
    fit = stat_molin(np.arange(10.0), np.ones(10))
    assert fit.degenerate and fit.statistic == 0.0 and fit.p_value == 1.0


def test_molin_null(rng):
    fit = stat_molin(rng.normal(size=10_000), rng.uniform(size=10_000))
    assert abs(fit.beta) < 0.1
    assert fit.statistic < 4
    assert fit.dof == 9998
    assert stat_molin(rng.normal(size=50), rng.uniform(size=50), intercept=False).dof == 49


def test_molin_matches_least_squares(rng):
    from walktest.preprocess import prepare
    from walktest.synth import SyntheticSpec, generate

    ds, _ = generate(SyntheticSpec("L", n=2000, w1=2.0, w2=1.5, delta=0.25, seed=3))
    y = prepare(ds).y
    x = ds.covariates[:, 0]
    A = np.column_stack([np.ones_like(x), x])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    se = math.sqrt(res[0] / (len(x) - 2) / np.sum((x - x.mean()) ** 2))
    fit = stat_molin(y, x)
    assert fit.beta == pytest.approx(coef[1], rel=1e-10)
    assert fit.alpha == pytest.approx(coef[0], rel=1e-8, abs=1e-12)
    assert fit.beta_t_stat == pytest.approx(coef[1] / se, rel=1e-8)
    # the modified-outcome slope estimates W2 (T^2 = 1)
    assert abs(fit.beta - 1.5) < 3 * se


def test_molin_batched_matches_single(rng):
    x = rng.uniform(size=30)
    Y = rng.normal(size=(5, 30))
    t, _ = molin_tstats(Y, x)
    for row, tt in zip(Y, t):
        assert stat_molin(row, x).beta_t_stat == pytest.approx(tt)


# -- null distributions --

def test_brownian_max_null_quantile(rng):
    e = rng.standard_normal((20_000, 1000))
    z = np.cumsum(e, axis=1) / np.sqrt(1000 * e.var(axis=1, ddof=1))[:, None]
    q = np.quantile(path_statistic("Max", z), 0.95)
    # discrete monitoring sits a little below the continuous 2.2414
    assert 2.18 < q < 2.26


def test_bridge_null_quantiles(rng):
    z = gaussian_bridges(rng, 20_000, 1000)
    assert 1.31 < np.quantile(path_statistic("MaxB", z), 0.95) < 1.375
    assert 1.69 < np.quantile(path_statistic("MaxBE", z), 0.95) < 1.76


def test_hull_quantiles_match_fixture(rng):
    z = gaussian_bridges(rng, 40_000, 250)
    assert np.quantile(path_statistic("MaxB_N", z), 0.95) == pytest.approx(fixtures.MAXB_N_Q95_N250, abs=0.04)
    assert np.quantile(path_statistic("MaxBE_N", z), 0.95) == pytest.approx(fixtures.MAXBE_N_Q95_N250, abs=0.04)


def test_area_means_match_fixture(rng):
    z = gaussian_bridges(rng, 40_000, 100)
    a = path_statistic("AreaB", z)
    sa = path_statistic("SAreaB", z)
    tol_a = 4 * math.hypot(fixtures.AREAB_MEAN_N100_SE, a.std() / 200)
    tol_s = 4 * math.hypot(fixtures.SAREAB_MEAN_N100_SE, sa.std() / 200)
    assert a.mean() == pytest.approx(fixtures.AREAB_MEAN_N100, abs=tol_a)
    assert sa.mean() == pytest.approx(fixtures.SAREAB_MEAN_N100, abs=tol_s)
    # exact permutation mean of the squared area: (N^2 - 1) / (6 N)
    assert fixtures.SAREAB_MEAN_N100 == pytest.approx(9999 / 600, abs=4 * fixtures.SAREAB_MEAN_N100_SE)


# -- properties --

increments = st.lists(st.floats(-100, 100, allow_nan=False), min_size=4, max_size=60)


def centered(values):
    y = np.asarray(values, dtype=float)
    y = y - y.mean()
    return y


@PROPERTY
@given(increments, st.floats(1e-3, 1e3))
def test_scale_invariance(values, lam):
    y = centered(values)
    assume(np.var(y) > 1e-6)
    a, b = cumulative(y), cumulative(lam * y)
    for f in PATH_FUNCS:
        assert f(b) == pytest.approx(f(a), rel=1e-9, abs=1e-12)
    x = np.arange(len(y), dtype=float)
    assert stat_molin(lam * y, x).statistic == pytest.approx(stat_molin(y, x).statistic, rel=1e-6, abs=1e-9)


@PROPERTY
@given(increments)
def test_reflection_invariance(values):
    y = centered(values)
    assume(np.var(y) > 1e-6)
    a, b = cumulative(y), cumulative(-y)
    for f in PATH_FUNCS:
        assert f(b) == pytest.approx(f(a), rel=1e-9, abs=1e-12)
    x = np.arange(len(y), dtype=float)
    assert stat_molin(-y, x).statistic == pytest.approx(stat_molin(y, x).statistic, rel=1e-9, abs=1e-9)


@PROPERTY
@given(increments)
def test_range_dominates_max(values):
    y = centered(values)
    assume(np.var(y) > 1e-6)
    p = cumulative(y)
    assert stat_maxBE(p) >= stat_maxB(p) >= 0.0
    assert stat_sareaB(p) <= stat_areaB(p) * stat_maxB(p) * (1 + 1e-12) + 1e-12


@PROPERTY
@given(increments)
def test_range_identity(values):
    y = centered(values)
    assume(np.abs(y).sum() > 1e-6)
    p = cumulative(y)
    assert circular_shift_to_min(p).c.max() == p.c.max() - p.c.min()


@PROPERTY
@given(increments)
def test_reversal(values):
    y = centered(values)
    assume(np.var(y) > 1e-6)
    a, b = cumulative(y), cumulative(y[::-1])
    assert stat_maxBE(b) == pytest.approx(stat_maxBE(a), rel=1e-9, abs=1e-9)
    assert stat_maxB(b) == pytest.approx(stat_maxB(a), rel=1e-9, abs=1e-9)


def test_batched_statistics_match_single(rng):
    y = rng.normal(size=40)
    y -= y.mean()
    perms = np.array([rng.permutation(40) for _ in range(7)])
    z = np.cumsum(y[perms], axis=1) / math.sqrt(40 * y.var(ddof=1))
    singles = dict(zip(PATH_KINDS, PATH_FUNCS))
    for kind, f in singles.items():
        batch = path_statistic(kind, z)
        for k in range(7):
            assert batch[k] == pytest.approx(f(cumulative(y, perms[k])), rel=1e-12)
