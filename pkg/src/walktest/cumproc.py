"""Cumulative-sum paths over a covariate ordering."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import DataError

RING_TOL = 1e-9


@dataclass(frozen=True)
class SortPermutation:
    """Stable ascending order of a covariate (0-based indices)."""

    s: np.ndarray
    tie_groups: int

    def __len__(self):
        return len(self.s)


@dataclass(frozen=True)
class CumulativeProcess:
    """Partial sums ``c[i] = y[s[0]] + ... + y[s[i]]`` and the increment variance."""

    c: np.ndarray
    sigma2: float

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.n * self.sigma2))

    def normalized(self) -> np.ndarray:
        """Path divided by sqrt(N * sigma2); zeros when sigma2 is 0."""
        if self.sigma2 <= 0:
            return np.zeros_like(self.c)
        return self.c / self.scale

    def time(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n


def count_tie_groups(x) -> int:
    """Number of distinct values that occur more than once."""
    _, counts = np.unique(np.asarray(x), return_counts=True)
    return int(np.sum(counts > 1))


def sort_permutation(x) -> SortPermutation:
    """Stable ascending sort; ties keep their original row order.

    ``tie_groups`` counts values shared by two or more rows (a constant
    column has one tie group).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataError("covariate contains non-finite values")
    s = np.argsort(x, kind="stable")
    s.setflags(write=False)
    return SortPermutation(s=s, tie_groups=count_tie_groups(x))


def increment_variance(y) -> float:
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        return 0.0
    return float(np.var(y, ddof=1))


def cumulative(y, s=None) -> CumulativeProcess:
    """Cumulative sums of ``y`` taken in the order ``s``.

    ``sigma2`` is the unbiased variance of the increments, which does not
    depend on the order.
    """
    y = np.asarray(getattr(y, "y", y), dtype=float)
    if s is None:
        order = np.arange(len(y))
    else:
        order = np.asarray(getattr(s, "s", s))
    if len(order) != len(y):
        raise DataError(f"length mismatch: {len(y)} outcomes, {len(order)} order indices")
    c = np.cumsum(y[order])
    c.setflags(write=False)
    return CumulativeProcess(c=c, sigma2=increment_variance(y))


def shift_index(z: np.ndarray) -> np.ndarray:
    """Gather indices that rotate each row of ``z`` to start after its minimum.

    Works on the last axis; the row minimum lands on the final position.
    """
    n = z.shape[-1]
    j = np.argmin(z, axis=-1)
    return (j[..., None] + 1 + np.arange(n)) % n


def ring_shift(z: np.ndarray) -> np.ndarray:
    """Rotate bridge paths (last axis) so they start at their minimum.

    No endpoint check; see :func:`circular_shift_to_min` for the validated
    single-path version.
    """
    z = np.asarray(z, dtype=float)
    idx = shift_index(z)
    zmin = np.take_along_axis(z, idx[..., -1:], axis=-1)
    return np.take_along_axis(z, idx, axis=-1) - zmin


def circular_shift_to_min(proc: CumulativeProcess) -> CumulativeProcess:
    """Treat a pinned path as a ring and restart it at its minimum.

    The element after the argmin becomes position 1 and the argmin itself the
    final, zero-valued endpoint, so the result is non-negative and its maximum
    is ``max(c) - min(c)``.

    Raises
    ------
    DataError
        If the path does not return to zero (uncentered outcome).
    """
    c = proc.c
    total = abs(float(c[-1]))
    bound = RING_TOL * max(float(np.sum(np.abs(np.diff(c, prepend=0.0)))), 1e-300)
    if total > bound:
        raise DataError(f"path ends at {c[-1]:.3g}, not 0; circular shift needs a centered outcome")
    d = ring_shift(c)
    d.setflags(write=False)
    return CumulativeProcess(c=d, sigma2=proc.sigma2)


def write_curve(path, proc: CumulativeProcess, lower=None, upper=None):
    """Dump ``(i/N, normalized c_i)`` rows, plus an envelope when given."""
    t = proc.time()
    z = proc.normalized()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = ["t", "c"]
        if lower is not None:
            head += ["lower", "upper"]
        w.writerow(head)
        for i in range(proc.n):
            row = [repr(float(t[i])), repr(float(z[i]))]
            if lower is not None:
                row += [repr(float(lower[i])), repr(float(upper[i]))]
            w.writerow(row)
