"""Per-arm response centering and the modified outcome.

Responses are centered within each treatment arm, treatment codes are
centered globally, and the product of the two is the per-patient increment of
every cumulative test. The uncentered product ``R * T`` is kept available for
the Brownian-motion baseline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import DataError, TrialDataset


@dataclass(frozen=True)
class ArmStats:
    label: str
    value: float
    fraction: float
    mean: float
    var: float


@dataclass(frozen=True)
class ModifiedOutcome:
    """Per-patient modified outcome and the arm summaries it was built from."""

    y: np.ndarray
    centered: bool
    per_arm_stats: tuple

    def __len__(self):
        return len(self.y)


@dataclass(frozen=True)
class VarianceDiagnostics:
    """Variance of the uncentered and centered modified outcome.

    ``gamma`` is the closed-form ratio from the per-arm sample moments,
    ``empirical_ratio`` the ratio of sample variances. ``covariance_shift`` is
    the constant by which centering moves cov(R, T | X).
    """

    var_mod: float
    var_centered: float
    gamma: float
    empirical_ratio: float
    covariance_shift: float


def _arm_groups(treatment):
    values, inverse, counts = np.unique(treatment, return_inverse=True, return_counts=True)
    return values, inverse, counts


def _as_arrays(data, treatment=None):
    if isinstance(data, TrialDataset):
        return data.response, data.treatment
    if treatment is None:
        raise TypeError("pass a TrialDataset or (response, treatment)")
    return np.asarray(data, dtype=float), np.asarray(treatment, dtype=float)


def center_response(data, treatment=None) -> np.ndarray:
    """Subtract each arm's empirical mean response.

    Accepts a :class:`TrialDataset` or a ``(response, treatment)`` pair.
    """
    R, T = _as_arrays(data, treatment)
    if R.shape != T.shape:
        raise DataError("response and treatment lengths differ")
    values, inverse, counts = _arm_groups(T)
    if counts.min() < 2:
        raise DataError(f"arm {values[counts.argmin()]!r} has fewer than 2 patients")
    means = np.bincount(inverse, weights=R) / counts
    return R - means[inverse]


def center_treatment(data) -> np.ndarray:
    """Treatment codes minus their empirical mean."""
    T = data.treatment if isinstance(data, TrialDataset) else np.asarray(data, dtype=float)
    if len(np.unique(T)) < 2:
        raise DataError("need at least two distinct treatment values")
    return T - T.mean()


def _arm_stats(response, treatment, labels=None):
    values, inverse, counts = _arm_groups(treatment)
    out = []
    n = len(response)
    for k, v in enumerate(values):
        r = response[inverse == k]
        label = labels[int(np.flatnonzero(inverse == k)[0])] if labels else repr(float(v))
        var = float(r.var(ddof=1)) if len(r) > 1 else 0.0
        out.append(ArmStats(label, float(v), counts[k] / n, float(r.mean()), var))
    return tuple(out)


def modified_outcome(response, treatment, centered=None, labels=None, arm_treatment=None) -> ModifiedOutcome:
    """Elementwise product of (centered) response and (centered) treatment.

    Parameters
    ----------
    response : array_like
        R or the arm-centered R.
    treatment : array_like
        Treatment codes, normally already centered.
    centered : bool, optional
        Whether ``response`` is arm-centered. Detected from the data when None.
    labels : sequence of str, optional
        Arm label per row for the summary.
    arm_treatment : array_like, optional
        Raw treatment codes used to group rows into arms; defaults to
        ``treatment``.
    """
    R = np.asarray(response, dtype=float)
    T = np.asarray(treatment, dtype=float)
    if R.shape != T.shape:
        raise DataError(f"length mismatch: response {R.shape} vs treatment {T.shape}")
    groups = T if arm_treatment is None else np.asarray(arm_treatment, dtype=float)
    stats = _arm_stats(R, groups, labels)
    if centered is None:
        scale = max(float(np.abs(R).max()), 1.0)
        centered = all(abs(s.mean) <= 1e-10 * scale for s in stats)
    y = R * T
    y.setflags(write=False)
    return ModifiedOutcome(y=y, centered=bool(centered), per_arm_stats=stats)


def prepare(dataset: TrialDataset, centered: bool = True) -> ModifiedOutcome:
    """Build the modified outcome used by the tests.

    With ``centered`` the response is arm-centered (bridge-type tests);
    otherwise the raw response is used (Brownian-motion baseline). The
    treatment is centered in both cases.
    """
    R = center_response(dataset) if centered else dataset.response
    T = center_treatment(dataset)
    return modified_outcome(R, T, centered=centered, labels=dataset.arm_labels,
                            arm_treatment=dataset.treatment)


def gamma_closed_form(mean_pos, mean_neg, var_pos, var_neg) -> float:
    """Variance ratio var(centered) / var(uncentered) for a balanced +/-1 design.

    Arguments are the per-arm response means and variances. The modified
    outcome has arm means ``+mean_pos`` and ``-mean_neg``; their spread is what
    centering removes.
    """
    spread = mean_pos + mean_neg
    within = var_pos + var_neg
    if within == 0:
        return 0.0 if spread != 0 else 1.0
    return 1.0 / (1.0 + 0.5 * spread**2 / within)


def variance_diagnostics(dataset: TrialDataset) -> VarianceDiagnostics | None:
    """Compare the centered and uncentered modified outcome for a +/-1 trial.

    Returns None (with a warning) unless the treatment is exactly {-1, +1}.
    """
    T = dataset.treatment
    if set(np.unique(T)) != {-1.0, 1.0}:
        warnings.warn("variance diagnostics need a two-arm trial coded +/-1; skipped")
        return None
    R = dataset.response
    pos, neg = R[T > 0], R[T < 0]
    gamma = gamma_closed_form(pos.mean(), neg.mean(), pos.var(ddof=1), neg.var(ddof=1))
    y_mod = R * T
    y_cen = center_response(dataset) * T
    var_mod = float(y_mod.var(ddof=1))
    var_cen = float(y_cen.var(ddof=1))
    mu_t = np.where(T > 0, pos.mean(), neg.mean())
    return VarianceDiagnostics(
        var_mod=var_mod,
        var_centered=var_cen,
        gamma=float(gamma),
        empirical_ratio=var_cen / var_mod if var_mod > 0 else 1.0,
        covariance_shift=float(-np.mean(T * mu_t)),
    )
