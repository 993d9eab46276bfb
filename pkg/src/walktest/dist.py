"""Tail probabilities of the Brownian-motion, bridge and excursion maxima.

Each tail is an alternating or Gaussian-damped series in ``alpha``. For small
``alpha`` the direct series needs very many nearly cancelling terms, so the
dual (theta-function) form of the same distribution is summed instead; both
forms are exact and agree where they overlap.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

DEFAULT_TOL = 1e-12
MAX_TERMS = 100_000
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_PI2 = math.pi**2

# below these alpha values the dual series is used
_SWITCH = {"brownian": 1.0, "bridge": 0.5, "excursion": 0.6}


class TailKind(str, enum.Enum):
    BROWNIAN_MAX = "BrownianMax"
    BRIDGE_MAX = "BridgeMax"
    EXCURSION_MAX = "ExcursionMax"

    @classmethod
    def parse(cls, name) -> "TailKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "brownianmax": cls.BROWNIAN_MAX, "brownian": cls.BROWNIAN_MAX, "max": cls.BROWNIAN_MAX,
            "bridgemax": cls.BRIDGE_MAX, "bridge": cls.BRIDGE_MAX, "maxb": cls.BRIDGE_MAX,
            "excursionmax": cls.EXCURSION_MAX, "excursion": cls.EXCURSION_MAX, "maxbe": cls.EXCURSION_MAX,
        }
        if key not in aliases:
            raise ValueError(f"unknown tail kind {name!r}; valid: {', '.join(k.value for k in cls)}")
        return aliases[key]


def norm_cdf(x: float) -> float:
    """Standard normal CDF through erfc (accurate in the far left tail)."""
    return 0.5 * float(erfc(-x / _SQRT2))


def _clamp(p: float) -> float:
    return min(1.0, max(0.0, p))


# -- direct series, fixed number of terms (exposed for truncation checks) --

def brownian_series(alpha: float, n_terms: int) -> float:
    i = np.arange(1, n_terms + 1)
    return float(4.0 * np.sum((-1.0) ** (i + 1) * 0.5 * erfc((2 * i - 1) * alpha / _SQRT2)))


def bridge_series(alpha: float, n_terms: int) -> float:
    i = np.arange(1, n_terms + 1)
    return float(2.0 * np.sum((-1.0) ** (i - 1) * np.exp(-2.0 * i**2 * alpha**2)))


def excursion_series(alpha: float, n_terms: int) -> float:
    i = np.arange(1, n_terms + 1)
    a2 = alpha**2
    return float(2.0 * np.sum((4.0 * i**2 * a2 - 1.0) * np.exp(-2.0 * i**2 * a2)))


# -- adaptive summation --

def _sum_until(term, bound, tol):
    total = 0.0
    for i in range(1, MAX_TERMS + 1):
        total += term(i)
        if bound(i) < tol:
            return total, i
    return total, MAX_TERMS


def _brownian_direct(alpha, tol):
    return _sum_until(
        lambda i: (-1.0) ** (i + 1) * 2.0 * float(erfc((2 * i - 1) * alpha / _SQRT2)),
        lambda i: 2.0 * float(erfc((2 * i - 1) * alpha / _SQRT2)),
        tol,
    )[0]


def _brownian_dual(alpha, tol):
    # P(max|W| < a) = 4/pi * sum_k (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 / (8 a^2))
    c = _PI2 / (8.0 * alpha**2)
    cdf, _ = _sum_until(
        lambda i: (-1.0) ** (i - 1) / (2 * i - 1) * math.exp(-((2 * i - 1) ** 2) * c),
        lambda i: math.exp(-((2 * i - 1) ** 2) * c),
        tol,
    )
    return 1.0 - 4.0 / math.pi * cdf


def _bridge_direct(alpha, tol):
    a2 = alpha**2
    return _sum_until(
        lambda i: (-1.0) ** (i - 1) * 2.0 * math.exp(-2.0 * i * i * a2),
        lambda i: 2.0 * math.exp(-2.0 * i * i * a2),
        tol,
    )[0]


def _bridge_dual(alpha, tol):
    # P(max|B| < a) = sqrt(2 pi)/a * sum_k exp(-(2k-1)^2 pi^2 / (8 a^2))
    c = _PI2 / (8.0 * alpha**2)
    cdf, _ = _sum_until(
        lambda i: math.exp(-((2 * i - 1) ** 2) * c),
        lambda i: math.exp(-((2 * i - 1) ** 2) * c),
        tol * alpha / _SQRT2PI,
    )
    return 1.0 - _SQRT2PI / alpha * cdf


def _excursion_direct(alpha, tol):
    a2 = alpha**2
    return _sum_until(
        lambda i: 2.0 * (4.0 * i * i * a2 - 1.0) * math.exp(-2.0 * i * i * a2),
        lambda i: 2.0 * (4.0 * i * i * a2 + 1.0) * math.exp(-2.0 * i * i * a2),
        tol,
    )[0]


def _excursion_dual(alpha, tol):
    # P(range < a) = sqrt(2 pi) pi^2 / a^3 * sum_k k^2 exp(-pi^2 k^2 / (2 a^2))
    c = _PI2 / (2.0 * alpha**2)
    pref = _SQRT2PI * _PI2 / alpha**3
    cdf, _ = _sum_until(
        lambda i: i * i * math.exp(-i * i * c),
        lambda i: i * i * math.exp(-i * i * c),
        tol / pref,
    )
    return 1.0 - pref * cdf


def _tail(alpha, tol, direct, dual, switch):
    alpha = float(alpha)
    if not alpha > 0:
        return 1.0
    if alpha < switch:
        return _clamp(dual(alpha, tol))
    return _clamp(direct(alpha, tol))


def tail_brownian_max(alpha, tol=DEFAULT_TOL) -> float:
    """P[max_{0<=t<=1} |W_t| > alpha] for standard Brownian motion.

    ``alpha <= 0`` returns 1 (the maximum is positive almost surely).
    """
    return _tail(alpha, tol, _brownian_direct, _brownian_dual, _SWITCH["brownian"])


def tail_bridge_max(alpha, tol=DEFAULT_TOL) -> float:
    """P[max |B_t| > alpha] for the Brownian bridge (Kolmogorov distribution)."""
    return _tail(alpha, tol, _bridge_direct, _bridge_dual, _SWITCH["bridge"])


def tail_excursion_max(alpha, tol=DEFAULT_TOL) -> float:
    """P[max B_t - min B_t > alpha], the excursion maximum obtained by ring-shifting a bridge."""
    return _tail(alpha, tol, _excursion_direct, _excursion_dual, _SWITCH["excursion"])


_TAILS = {
    TailKind.BROWNIAN_MAX: tail_brownian_max,
    TailKind.BRIDGE_MAX: tail_bridge_max,
    TailKind.EXCURSION_MAX: tail_excursion_max,
}


def tail(kind, alpha, tol=DEFAULT_TOL):
    """Tail probability for ``kind``; ``alpha`` may be a scalar or an array."""
    f = _TAILS[TailKind.parse(kind)]
    if np.ndim(alpha) == 0:
        return f(alpha, tol)
    a = np.asarray(alpha, dtype=float)
    return np.array([f(v, tol) for v in a.ravel()]).reshape(a.shape)


def quantile(kind, p: float, lo: float = 1e-6, hi: float = 10.0) -> float:
    """The ``alpha`` whose tail probability is ``p`` (upper-tail quantile).

    Root-finding on the bracket ``[lo, hi]``; the result satisfies
    ``|tail(alpha) - p| < 1e-9``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    f = _TAILS[TailKind.parse(kind)]
    g = lambda a: f(a) - p
    if g(lo) <= 0:
        return lo
    if g(hi) >= 0:
        return hi
    return float(brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
