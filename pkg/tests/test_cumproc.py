import numpy as np
import pytest

from walktest.cumproc import (
    circular_shift_to_min,
    cumulative,
    increment_variance,
    ring_shift,
    sort_permutation,
    write_curve,
)
from walktest.data import DataError


def test_sort_permutation_examples():
    # 0-based versions of (2,3,1), identity and (3,1,2)
    np.testing.assert_array_equal(sort_permutation([0.3, 0.1, 0.2]).s, [1, 2, 0])
    sp = sort_permutation([4.0, 4.0, 4.0, 4.0])
    np.testing.assert_array_equal(sp.s, [0, 1, 2, 3])
    assert sp.tie_groups == 1
    sp = sort_permutation([0.5, 0.5, 0.1])
    np.testing.assert_array_equal(sp.s, [2, 0, 1])
    assert sp.tie_groups == 1
    assert sort_permutation([1.0, 2.0, 3.0]).tie_groups == 0


def test_sort_permutation_rejects_nan():
    with pytest.raises(DataError):
        sort_permutation([0.1, np.nan])


def test_cumulative_examples():
    np.testing.assert_array_equal(cumulative([1.0, -1, 1, -1]).c, [1, 0, 1, 0])
    proc = cumulative([2.0, 4, -10, -14], [2, 3, 0, 1])
    np.testing.assert_array_equal(proc.c, [-10, -24, -22, -18])
    with pytest.raises(DataError):
        cumulative([1.0, 2.0], [0, 1, 2])


def test_centered_path_returns_to_zero(rng):
    R = rng.normal(size=31)
    T = np.where(np.arange(31) < 12, 1.0, -1.0)
    from walktest.preprocess import center_response, center_treatment
    y = center_response(R, T) * center_treatment(T)
    for _ in range(5):
        c = cumulative(y, rng.permutation(31)).c
        assert abs(c[-1]) <= 1e-9 * np.abs(y).sum()


def test_sigma2_is_order_free(rng):
    y = rng.normal(size=40)
    ref = cumulative(y).sigma2
    assert ref == pytest.approx(np.var(y, ddof=1))
    for _ in range(5):
        assert cumulative(y, rng.permutation(40)).sigma2 == pytest.approx(ref, rel=1e-14)
    assert increment_variance(np.zeros(5)) == 0.0


def test_shift_of_down_then_up_path():
    y = np.array([-1.0, -1, -1, 1, 1, 1, 1, -1])  # path -1,-2,-3,-2,-1,0,1,0
    proc = cumulative(y)
    shifted = circular_shift_to_min(proc)
    np.testing.assert_array_equal(shifted.c, [1, 2, 3, 4, 3, 2, 1, 0])
    assert shifted.c.max() == proc.c.max() - proc.c.min()


def test_shift_with_min_at_end_is_identity():
    proc = cumulative([1.0, 1.0, -1.0, -1.0])  # 1, 2, 1, 0
    np.testing.assert_array_equal(circular_shift_to_min(proc).c, proc.c)


def test_shift_matches_exhaustive_rotation(rng):
    # oracle: for every starting point k, rotate and re-base the ring,
    # then take the largest value over all shifts and times
    for _ in range(50):
        y = rng.normal(size=12)
        y -= y.mean()
        c = np.cumsum(y)
        best = -np.inf
        for k in range(12):
            rot = np.cumsum(np.roll(y, -k))
            best = max(best, rot.max())
        shifted = circular_shift_to_min(cumulative(y))
        assert shifted.c.max() == pytest.approx(best, abs=1e-12)
        assert shifted.c.min() == pytest.approx(0.0, abs=1e-12)


def test_shift_rejects_uncentered():
    with pytest.raises(DataError):
        circular_shift_to_min(cumulative([1.0, 1.0, 1.0]))


def test_ring_shift_is_batched(rng):
    z = np.cumsum(rng.normal(size=(6, 20)), axis=1)
    z -= np.linspace(0, 1, 20) * z[:, -1:]
    d = ring_shift(z)
    for row, drow in zip(z, d):
        assert drow.max() == pytest.approx(row.max() - row.min())
        assert drow[-1] == 0.0


def test_random_orderings_have_zero_mean_path(rng):
    y = rng.normal(size=30)
    y -= y.mean() - 0.3  # nonzero mean, so the expected path is linear
    paths = np.cumsum(y[np.argsort(rng.random((10_000, 30)), axis=1)], axis=1)
    expected = np.arange(1, 31) * y.mean()
    se = paths.std(axis=0, ddof=1) / np.sqrt(10_000)
    se[-1] = 1e-12
    assert np.all(np.abs(paths.mean(axis=0) - expected) <= 3 * se + 1e-9)


def test_write_curve(tmp_path):
    proc = cumulative([1.0, -1.0, 1.0, -1.0])
    path = tmp_path / "curve.csv"
    write_curve(path, proc, np.zeros(4), np.ones(4))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,c,lower,upper"
    assert len(lines) == 5
    assert lines[1].startswith("0.25,")
