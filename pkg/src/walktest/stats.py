"""Test statistics on cumulative paths, plus the modified-outcome regression.

Path statistics take a normalized path ``z = c / sqrt(N * sigma2)`` whose
last axis is time, so the same code scores one path or a matrix of permuted
paths.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

from .cumproc import CumulativeProcess, ring_shift

T_CAP = 1e12


class StatisticKind(str, enum.Enum):
    MAX = "Max"
    MAXB = "MaxB"
    MAXB_N = "MaxB_N"
    MAXBE = "MaxBE"
    MAXBE_N = "MaxBE_N"
    AREAB = "AreaB"
    SAREAB = "SAreaB"
    MOLIN = "MoLin"

    @property
    def has_closed_form(self) -> bool:
        return self in (StatisticKind.MAX, StatisticKind.MAXB, StatisticKind.MAXBE)

    @property
    def uses_uncentered(self) -> bool:
        return self is StatisticKind.MAX

    @classmethod
    def parse(cls, name) -> "StatisticKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value.lower() == key or kind.name.lower() == key or kind.value.lower().replace("_", "") == key:
                return kind
        valid = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown statistic {name!r}; valid names: {valid}")


PATH_KINDS = tuple(k for k in StatisticKind if k is not StatisticKind.MOLIN)


def hull(n: int) -> np.ndarray:
    """sqrt(t(1-t)) at t = i/N for i = 1..N-1."""
    t = np.arange(1, n) / n
    return np.sqrt(t * (1.0 - t))


def max_abs(z):
    return np.max(np.abs(z), axis=-1)


def hull_max(z):
    """Largest |z_i| / sqrt(t_i(1-t_i)) over i < N (the hull vanishes at N)."""
    z = np.asarray(z, dtype=float)
    n = z.shape[-1]
    if n < 2:
        return np.zeros(z.shape[:-1])
    return np.max(np.abs(z[..., :-1]) / hull(n), axis=-1)


def path_range(z):
    """max - min of the path including its zero starting point."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z.max(axis=-1), 0.0) - np.minimum(z.min(axis=-1), 0.0)


def excursion_hull_max(z):
    """Hull maximum of the ring-shifted path, taken over both orientations.

    Shifting ``-z`` to its minimum is shifting ``z`` to its maximum; using the
    larger of the two makes the statistic independent of which arm is coded
    +1.
    """
    z = np.asarray(z, dtype=float)
    return np.maximum(hull_max(ring_shift(z)), hull_max(ring_shift(-z)))


def area(z):
    return np.sum(np.abs(z), axis=-1)


def squared_area(z):
    return np.sum(np.square(z), axis=-1)


_PATH_FUNCS = {
    StatisticKind.MAX: max_abs,
    StatisticKind.MAXB: max_abs,
    StatisticKind.MAXB_N: hull_max,
    StatisticKind.MAXBE: path_range,
    StatisticKind.MAXBE_N: excursion_hull_max,
    StatisticKind.AREAB: area,
    StatisticKind.SAREAB: squared_area,
}


def path_statistic(kind, z):
    """Evaluate a path statistic on normalized path(s) ``z``."""
    kind = StatisticKind.parse(kind)
    if kind is StatisticKind.MOLIN:
        raise ValueError("MoLin is a regression statistic, not a path statistic")
    return _PATH_FUNCS[kind](z)


def _on_process(kind, proc: CumulativeProcess) -> float:
    if proc.sigma2 <= 0:
        return 0.0
    return float(path_statistic(kind, proc.normalized()))


def stat_max(proc: CumulativeProcess) -> float:
    """max_i |c_i| / sqrt(N sigma2) on an uncentered path."""
    return _on_process(StatisticKind.MAX, proc)


def stat_maxB(proc: CumulativeProcess) -> float:
    """max_i |c_i| / sqrt(N sigma2) on a centered (bridge) path."""
    return _on_process(StatisticKind.MAXB, proc)


def stat_maxB_N(proc: CumulativeProcess) -> float:
    return _on_process(StatisticKind.MAXB_N, proc)


def stat_maxBE(proc: CumulativeProcess) -> float:
    """Range of the normalized path, i.e. the max of the ring-shifted excursion."""
    return _on_process(StatisticKind.MAXBE, proc)


def stat_maxBE_N(proc: CumulativeProcess) -> float:
    """Ring-shift to the minimum, then take the hull-normalized maximum.

    Evaluated for the path and its reflection; the larger value is returned.
    """
    return _on_process(StatisticKind.MAXBE_N, proc)


def stat_areaB(proc: CumulativeProcess) -> float:
    return _on_process(StatisticKind.AREAB, proc)


def stat_sareaB(proc: CumulativeProcess) -> float:
    return _on_process(StatisticKind.SAREAB, proc)


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares fit of the modified outcome on one covariate."""

    alpha: float
    beta: float
    beta_t_stat: float
    dof: int
    p_value: float
    degenerate: bool = False
    perfect_fit: bool = False

    @property
    def statistic(self) -> float:
        return abs(self.beta_t_stat)


def molin_tstats(Y, x_sorted, intercept=True):
    """Slope t-statistics of each row of ``Y`` regressed on ``x_sorted``.

    ``Y`` holds outcomes aligned with ``x_sorted`` (shape (..., N)). Returns
    ``(t, perfect)`` where ``perfect`` marks zero-residual fits whose t is
    capped at +/-1e12.
    """
    Y = np.asarray(Y, dtype=float)
    x = np.asarray(x_sorted, dtype=float)
    n = x.shape[0]
    if intercept:
        xc = x - x.mean()
        dof = n - 2
        ybar = Y.mean(axis=-1)
        syy = np.sum(np.square(Y), axis=-1) - n * ybar**2
    else:
        xc = x
        dof = n - 1
        syy = np.sum(np.square(Y), axis=-1)
    sxx = float(xc @ xc)
    if sxx <= 0 or dof <= 0:
        shape = Y.shape[:-1]
        return np.zeros(shape), np.zeros(shape, dtype=bool)
    sxy = Y @ xc
    beta = sxy / sxx
    rss = np.maximum(syy - beta * sxy, 0.0)
    tol = 1e-12 * np.maximum(syy, 1e-300)
    perfect = rss <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / np.sqrt(rss / dof / sxx)
    t = np.where(perfect, np.sign(beta) * T_CAP, t)
    t = np.where(perfect & (beta == 0), 0.0, t)
    return np.clip(t, -T_CAP, T_CAP), perfect


def stat_molin(y, x, intercept=True) -> RegressionFit:
    """Regress the modified outcome on a covariate; the statistic is |t| of the slope.

    A constant covariate gives a degenerate fit with statistic 0. A perfect
    linear fit has its t-statistic capped at 1e12.
    """
    y = np.asarray(getattr(y, "y", y), dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(y)
    dof = n - 2 if intercept else n - 1
    if n != len(x):
        raise ValueError("length mismatch between outcome and covariate")
    if np.ptp(x) == 0 or dof <= 0:
        return RegressionFit(float(y.mean()) if intercept else 0.0, 0.0, 0.0, max(dof, 0), 1.0,
                             degenerate=True)
    t, perfect = molin_tstats(y, x, intercept)
    if intercept:
        xc = x - x.mean()
        beta = float(xc @ y / (xc @ xc))
        alpha = float(y.mean() - beta * x.mean())
    else:
        beta = float(x @ y / (x @ x))
        alpha = 0.0
    t = float(t)
    p = float(2 * _st.t.sf(abs(t), dof))
    return RegressionFit(alpha, beta, t, dof, p, perfect_fit=bool(perfect))
