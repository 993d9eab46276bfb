import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from walktest.mc import McConfig, screen_covariates
from walktest.synth import (
    SyntheticSpec,
    axis_spec,
    binomial_band,
    compare_centering,
    generate,
    interaction,
    null_calibration,
    power_csv,
    power_summary_json,
    run_axis,
    trend,
)


def test_linear_model_without_noise():
    ds, truth = generate(SyntheticSpec("L", n=50, w1=2, w2=1, delta=0.0, seed=1))
    x = ds.covariates[:, 0]
    np.testing.assert_allclose(ds.response, 2 * x + ds.treatment * x)
    assert set(np.unique(ds.treatment)) == {-1.0, 1.0}
    assert truth.significant == (0,) and truth.decoys == ()


def test_piecewise_supports():
    X = np.array([[0.5], [7 / 16], [9 / 16], [0.4], [0.6]])
    np.testing.assert_array_equal(interaction("PCInt2", X, 3.0), [3, 3, 3, 0, 0])
    X = np.array([[0.0], [0.125], [0.13], [0.5], [1.0]])
    np.testing.assert_array_equal(interaction("PCTh2", X, 1.0), [1, 1, 0, 0, 0])
    np.testing.assert_array_equal(interaction("PCTh1", X, 1.0), [0, 0, 0, 1, 1])
    np.testing.assert_array_equal(interaction("PCInt1", X, 1.0), [0, 0, 0, 1, 0])


def test_nonlinear_model_at_origin():
    X = np.zeros((1, 8))
    assert trend("NL", X, 1.0)[0] == 1.0
    assert interaction("NL", X, 1.0)[0] == 2.0


def test_nonlinear_ground_truth():
    ds, truth = generate(SyntheticSpec("NL", n=40, decoys=3, seed=2))
    assert ds.d == 11
    assert [ds.covariate_names[j] for j in truth.significant] == ["X1", "X3", "X5", "X6", "X7", "X8"]
    assert [ds.covariate_names[j] for j in truth.decoys] == ["X4", "X9", "X10", "X11"]
    assert truth.trend_only == (1,)
    assert not set(truth.significant) & set(truth.decoys)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec("L", n=5)
    with pytest.raises(ValueError):
        SyntheticSpec("L", delta=-1)
    with pytest.raises(ValueError):
        SyntheticSpec("L", decoys=-1)
    with pytest.raises(ValueError):
        SyntheticSpec("XYZ")
    assert SyntheticSpec("pc-int2").model == "PCInt2"
    with pytest.raises(ValueError):
        axis_spec("NL", "w1", 1.0)
    with pytest.raises(ValueError):
        axis_spec("PCTh1", "w2", 1.0)


def test_small_trials_keep_both_arms():
    for seed in range(200):
        ds, _ = generate(SyntheticSpec("L", n=10, seed=seed))
        assert 4 <= np.sum(ds.treatment > 0) <= 6 or 4 <= np.sum(ds.treatment < 0)


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=8, max_size=8), st.floats(0.1, 10))
def test_nonlinear_symmetry_in_x7_x8(row, w2):
    X = np.array([row])
    Xs = X.copy()
    Xs[:, [6, 7]] = Xs[:, [7, 6]]
    assert interaction("NL", X, w2)[0] == interaction("NL", Xs, w2)[0]
    assert trend("NL", X, 1.0)[0] == trend("NL", Xs, 1.0)[0]


def test_power_report_shape_and_reproducibility():
    cfg = McConfig(m=200, seed=3)
    a = run_axis("PCInt2", "w1", grid=[1, 3], reps=30, cfg=cfg, stats=("MoLin", "MaxBE"))
    b = run_axis("PCInt2", "w1", grid=[1, 3], reps=30, cfg=cfg, stats=("MoLin", "MaxBE"))
    assert a.statistics == ["MoLin", "MaxBE", "MaxB", "MaxB_N", "MaxBE_N", "SAreaB", "Comb"]
    assert a.power.shape == (2, 7, 1)
    np.testing.assert_array_equal(a.power, b.power)
    assert power_csv([a]) == power_csv([b])
    assert np.all((a.power >= 0) & (a.power <= 1))
    na = a.normalized_area()
    assert na.max() == pytest.approx(1.0) or a.area().max() == 0
    summary = json.loads(power_summary_json([a]))
    assert summary["axes"][0]["model"] == "PCInt2"


@pytest.mark.filterwarnings("ignore:only 20 replications")
def test_threads_do_not_change_power():
    a = run_axis("L", "decoy", grid=[2, 5], reps=20, cfg=McConfig(m=200, seed=4, threads=1), stats=("MaxB",),
                 combine=None)
    b = run_axis("L", "decoy", grid=[2, 5], reps=20, cfg=McConfig(m=200, seed=4, threads=3), stats=("MaxB",),
                 combine=None)
    assert power_csv([a]) == power_csv([b])


def test_few_replications_warn():
    with pytest.warns(UserWarning):
        run_axis("L", "w1", grid=[1], reps=5, cfg=McConfig(m=100), stats=("MaxB",), combine=None)


def test_mean_power_is_area_over_span():
    rep = run_axis("L", "w1", grid=[1, 2, 4], reps=30, cfg=McConfig(m=200), stats=("MaxB",), combine=None)
    p = rep.power[:, 0, 0]
    area = 0.5 * (p[0] + p[1]) * 1 + 0.5 * (p[1] + p[2]) * 2
    assert rep.area()[0, 0] == pytest.approx(area)
    assert rep.mean("MaxB") == pytest.approx(area / 3)


def test_scaling_all_coefficients_leaves_p_values_unchanged():
    for seed in range(10):
        base = SyntheticSpec("PCTh1", n=60, w1=1.5, w2=0.7, delta=0.8, decoys=2, seed=seed)
        lam = 2.0
        scaled = SyntheticSpec("PCTh1", n=60, w1=lam * 1.5, w2=lam * 0.7, delta=lam**2 * 0.8, decoys=2, seed=seed)
        cfg = McConfig(m=300, seed=seed, stats=("MaxB", "MaxBE_N", "SAreaB", "MoLin"))
        a = screen_covariates(generate(base)[0], cfg=cfg, combine=False)
        b = screen_covariates(generate(scaled)[0], cfg=cfg, combine=False)
        for ra, rb in zip(a, b):
            assert [r.p_value for r in ra.results] == [r.p_value for r in rb.results]


@pytest.mark.slow
def test_null_rejection_rates():
    cal = null_calibration(reps=300, cfg=McConfig(m=500, seed=5))
    lo, hi = binomial_band(300, 0.05, 0.999)
    assert np.all((cal.rates >= lo) & (cal.rates <= hi)), dict(zip(cal.statistics, cal.rates))
    assert cal.histogram_csv().startswith("lower,upper,Max,")


@pytest.mark.slow
def test_decoys_keep_nominal_rate():
    rep = run_axis("PCTh2", "decoy", grid=[30], reps=60, cfg=McConfig(m=500, seed=6))
    lo, hi = binomial_band(60 * 30, 0.05, 0.999)
    assert np.all((rep.decoy_rate >= lo) & (rep.decoy_rate <= hi))


@pytest.mark.slow
def test_x7_x8_power_is_symmetric():
    rep = run_axis("NL", "noise", grid=[1.0, 2.0], reps=150, cfg=McConfig(m=500, seed=7),
                   stats=("MoLin", "MaxBE"), combine=None)
    i7, i8 = rep.targets.index("X7"), rep.targets.index("X8")
    for g in range(2):
        for s in range(len(rep.statistics)):
            p7, p8 = rep.power[g, s, i7], rep.power[g, s, i8]
            pooled = (p7 + p8) / 2
            se = math.sqrt(max(2 * pooled * (1 - pooled) / 150, 1e-12))
            assert abs(p7 - p8) <= 3.3 * se + 1e-12


@pytest.mark.slow
def test_centering_helps_with_strong_trend():
    rows = compare_centering(models=("L",), cfg=McConfig(m=500, seed=8), grid=[4.0], reps=100)
    assert rows[0]["MaxB"] > rows[0]["Max"]
    # no interaction: both arms share one distribution, so centering changes nothing on average
    rows = compare_centering(models=("L",), cfg=McConfig(m=500, seed=8), axis="w2", grid=[0.0], reps=200)
    d = rows[0]["delta"]
    pooled = (rows[0]["Max"] + rows[0]["MaxB"]) / 2
    assert abs(d) <= 3.3 * math.sqrt(max(2 * pooled * (1 - pooled) / 200, 1e-4))
