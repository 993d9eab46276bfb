"""Synthetic trials and the power benchmark.

Responses follow ``R = W_trend(X) + T * W_interact(X) + eps`` with
``eps ~ N(0, delta)``, i.i.d. U[0, 1] covariates and fair +/-1 treatment.
Six models are available: linear (L), four piecewise-constant interaction
shapes (PCTh1, PCTh2, PCInt1, PCInt2) and a non-linear model (NL).

A benchmark axis varies one of noise, trend coefficient, interaction
coefficient or decoy count and records how often each test flags the truly
interacting covariates at the 0.05 level.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import TrialDataset
from .mc import (
    DEFAULT_COMBINED,
    McConfig,
    bonferroni,
    derive_seed,
    evaluate_covariates,
)
from .preprocess import prepare
from .stats import StatisticKind

MODELS = ("L", "PCTh1", "PCTh2", "PCInt1", "PCInt2", "NL")
AXES = ("noise", "w1", "w2", "decoy")
PC_SUPPORT = {
    "PCTh1": (0.5, 1.0),
    "PCTh2": (0.0, 0.125),
    "PCInt1": (0.25, 0.75),
    "PCInt2": (7 / 16, 9 / 16),
}
NL_BASE = 8
COMB = "Comb"

# Interaction coefficient on the noise axis for L and PC models. Chosen once so
# that MoLin on L has mean power 0.865 over sqrt(delta) in 1..8 (N=100); with
# W2=1 every test is near chance at that noise level.
W2_NOISE = 6.0

BENCH_STATS = (
    StatisticKind.MOLIN,
    StatisticKind.AREAB,
    StatisticKind.SAREAB,
    StatisticKind.MAXB,
    StatisticKind.MAXB_N,
    StatisticKind.MAXBE,
    StatisticKind.MAXBE_N,
)

DEFAULT_GRIDS = {
    "noise": (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0),
    "w1": (1.0, 2.0, 3.0, 4.0, 5.0),
    "w2": (0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
    "decoy": (1, 10, 25, 50, 100),
}
BASE_SQRT_DELTA = 0.5
BASE_DECOYS = 10


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def canonical_model(name: str) -> str:
    key = str(name).replace("-", "").replace("_", "").lower()
    for m in MODELS:
        if m.lower() == key:
            return m
    raise ValueError(f"unknown model {name!r}; valid: {', '.join(MODELS)}")


@dataclass(frozen=True)
class SyntheticSpec:
    """One synthetic trial configuration.

    For L and PC models ``w1`` and ``w2`` are the trend and interaction
    coefficients (defaults 2 and 1). For NL they multiply the fixed trend and
    interaction functions (defaults 1 and 1).
    """

    model: str
    n: int = 100
    w1: float | None = None
    w2: float | None = None
    delta: float = 0.25
    decoys: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", canonical_model(self.model))
        if self.w1 is None:
            object.__setattr__(self, "w1", 1.0 if self.model == "NL" else 2.0)
        if self.w2 is None:
            object.__setattr__(self, "w2", 1.0)
        if self.n < 10:
            raise ValueError("need n >= 10 patients")
        if self.delta < 0:
            raise ValueError("noise variance delta must be >= 0")
        if self.decoys < 0:
            raise ValueError("decoy count must be >= 0")

    @property
    def n_base(self) -> int:
        return NL_BASE if self.model == "NL" else 1

    @property
    def d(self) -> int:
        return self.n_base + self.decoys


@dataclass(frozen=True)
class GroundTruth:
    """0-based covariate indices by role."""

    significant: tuple
    decoys: tuple
    trend_only: tuple = ()


def trend(model: str, X: np.ndarray, w1: float) -> np.ndarray:
    if model == "NL":
        return w1 * (1 + 2 * X[:, 0] + X[:, 1] + 0.5 * X[:, 2])
    return w1 * X[:, 0]


def interaction(model: str, X: np.ndarray, w2: float) -> np.ndarray:
    x = X[:, 0]
    if model == "L":
        return w2 * x
    if model == "NL":
        return w2 * (1 - x**3 + np.exp(X[:, 2] ** 2 + X[:, 4]) + 0.6 * X[:, 5] - (X[:, 6] + X[:, 7]) ** 2)
    lo, hi = PC_SUPPORT[model]
    return w2 * ((x >= lo) & (x <= hi))


def ground_truth(spec: SyntheticSpec) -> GroundTruth:
    extra = tuple(range(spec.n_base, spec.d))
    if spec.model == "NL":
        return GroundTruth(significant=(0, 2, 4, 5, 6, 7), decoys=(3,) + extra, trend_only=(1,))
    return GroundTruth(significant=(0,), decoys=extra)


def covariate_names(spec: SyntheticSpec) -> list:
    return [f"X{j + 1}" for j in range(spec.d)]


def generate(spec: SyntheticSpec, rng: np.random.Generator | None = None):
    """Draw one synthetic trial.

    Treatment is redrawn in the rare case that an arm gets fewer than 4
    patients (small ``n`` only), so the dataset is always testable.

    Returns
    -------
    (TrialDataset, GroundTruth)
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    X = rng.uniform(size=(spec.n, spec.d))
    while True:
        T = rng.choice(np.array([-1.0, 1.0]), size=spec.n)
        k = int(np.sum(T > 0))
        if 4 <= k <= spec.n - 4:
            break
    eps = rng.normal(0.0, np.sqrt(spec.delta), size=spec.n) if spec.delta > 0 else np.zeros(spec.n)
    R = trend(spec.model, X, spec.w1) + T * interaction(spec.model, X, spec.w2) + eps
    ds = TrialDataset(X, covariate_names(spec), T, R)
    return ds, ground_truth(spec)


# -- benchmark --

def axis_spec(model: str, axis: str, value, n: int = 100) -> SyntheticSpec:
    """Parameters for one grid point; those not on the axis take base values."""
    model = canonical_model(model)
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; valid: {', '.join(AXES)}")
    if model == "NL" and axis in ("w1", "w2"):
        raise ValueError("the NL model only has noise and decoy axes")
    if model != "L" and axis == "w2":
        raise ValueError("the w2 axis is defined for the L model only")
    nl = model == "NL"
    kw = dict(model=model, n=n, w1=1.0 if nl else 2.0, w2=1.0,
              delta=BASE_SQRT_DELTA**2, decoys=BASE_DECOYS)
    if axis == "noise":
        kw["delta"] = float(value) ** 2
        if not nl:
            kw["w2"] = W2_NOISE
    elif axis == "w1":
        kw["w1"] = float(value)
    elif axis == "w2":
        kw["w2"] = float(value)
    else:
        kw["decoys"] = int(value)
    return SyntheticSpec(**kw)



def _replicate(spec, kinds, combine, cfg, data_seed, alpha):
    """Rejection indicators for one synthetic trial.

    Returns (raw (S, D) bool, corrected (S, D) bool) over statistics
    (plus the combined test last when requested) and covariates.
    """
    ds, _ = generate(replace(spec, seed=data_seed))
    y = prepare(ds, centered=True)
    y_raw = prepare(ds, centered=False) if any(k.uses_uncentered for k in kinds) else None
    xs = [ds.covariates[:, j] for j in range(ds.d)]
    reports, _ = evaluate_covariates(y, xs, kinds, cfg, y_raw=y_raw, combine=combine)
    cols = []
    for rep in reports:
        ps = [r.p_value for r in rep.results]
        if combine:
            ps.append(rep.combined_p)
        cols.append(ps)
    p = np.array(cols).T
    return p < alpha, bonferroni(p, ds.d) < alpha


@dataclass
class PowerReport:
    """Rejection rates along one axis of one model.

    ``power[g, s, k]`` is the uncorrected rejection rate of statistic ``s``
    for target covariate ``k`` at grid point ``g``; ``power_bonferroni``
    is the same after Bonferroni over all covariates; ``decoy_rate[g, s]``
    is the mean uncorrected rejection rate over decoy covariates.
    """

    model: str
    axis: str
    grid: list
    statistics: list
    targets: list
    reps: int
    power: np.ndarray
    power_bonferroni: np.ndarray
    decoy_rate: np.ndarray
    meta: dict = field(default_factory=dict)

    def area(self) -> np.ndarray:
        """Trapezoid area under each power curve, shape (S, K)."""
        g = np.asarray(self.grid, dtype=float)
        if len(g) < 2:
            return self.power[0].copy()
        return _trapezoid(self.power, g, axis=0)

    def mean_power(self) -> np.ndarray:
        """Area divided by the grid span (the average height of the curve)."""
        g = np.asarray(self.grid, dtype=float)
        span = g[-1] - g[0]
        return self.area() / span if span > 0 else self.area()

    def normalized_area(self) -> np.ndarray:
        """Area scaled so the best statistic of each target column is 1."""
        a = self.area()
        top = a.max(axis=0, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(top > 0, a / np.where(top > 0, top, 1.0), 0.0)

    def stat_index(self, name) -> int:
        key = name if name == COMB else StatisticKind.parse(name).value
        return self.statistics.index(key)

    def mean(self, name, target=0) -> float:
        k = target if isinstance(target, int) else self.targets.index(target)
        return float(self.mean_power()[self.stat_index(name), k])

    def rows(self):
        for g, v in enumerate(self.grid):
            for s, name in enumerate(self.statistics):
                for k, t in enumerate(self.targets):
                    yield {
                        "model": self.model, "axis": self.axis, "value": v, "statistic": name,
                        "covariate": t, "power": float(self.power[g, s, k]),
                        "power_bonferroni": float(self.power_bonferroni[g, s, k]),
                        "decoy_rate": float(self.decoy_rate[g, s]), "reps": self.reps,
                    }

    def summary(self) -> dict:
        mp, na = self.mean_power(), self.normalized_area()
        return {
            "model": self.model,
            "axis": self.axis,
            "targets": self.targets,
            "mean_power": {s: dict(zip(self.targets, map(float, mp[i]))) for i, s in enumerate(self.statistics)},
            "normalized_area": {s: dict(zip(self.targets, map(float, na[i]))) for i, s in enumerate(self.statistics)},
        }


BENCH_CSV_FIELDS = ("model", "axis", "value", "statistic", "covariate", "power",
                    "power_bonferroni", "decoy_rate", "reps")


def power_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        for row in rep.rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def power_summary_json(reports, meta: dict | None = None) -> str:
    doc = {"meta": meta or {}, "axes": [r.summary() for r in reports]}
    return json.dumps(doc, indent=2) + "\n"


def run_axis(model, axis, grid=None, stats=BENCH_STATS, reps=96, cfg: McConfig | None = None,
             n=100, combine=DEFAULT_COMBINED, alpha=0.05, threads=None) -> PowerReport:
    """Estimate power of each statistic along one benchmark axis.

    Parameters
    ----------
    model : str
        One of ``MODELS``.
    axis : str
        ``noise`` (grid of sqrt(delta)), ``w1``, ``w2`` or ``decoy``.
    stats : sequence
        Individual statistics to score.
    combine : sequence or None
        Statistics of the min-p combined test, reported as ``Comb``.
    cfg : McConfig
        Permutation count, base seed and p-value mode. Replications are
        spread over ``threads`` workers (default ``cfg.threads``).
    """
    model = canonical_model(model)
    cfg = cfg or McConfig(m=1000)
    grid = list(DEFAULT_GRIDS[axis] if grid is None else grid)
    if reps < 30:
        warnings.warn(f"only {reps} replications per grid point; power estimates will be rough")
    kinds = list(dict.fromkeys(StatisticKind.parse(s) for s in stats))
    comb = None
    if combine:
        comb = tuple(StatisticKind.parse(s) for s in combine)
        for k in comb:
            if k not in kinds:
                kinds.append(k)
    names = [k.value for k in kinds] + ([COMB] if comb else [])
    mi, ai = MODELS.index(model), AXES.index(axis)
    inner = replace(cfg, threads=1, stats=tuple(kinds))
    workers = cfg.threads if threads is None else threads

    specs = [axis_spec(model, axis, v, n) for v in grid]
    truths = [ground_truth(s) for s in specs]
    targets = [f"X{j + 1}" for j in truths[0].significant]

    def one(job):
        g, r = job
        c = replace(inner, seed=derive_seed(cfg.seed, mi, ai, g, r, 1))
        return _replicate(specs[g], tuple(kinds), comb or False, c, derive_seed(cfg.seed, mi, ai, g, r, 0), alpha)

    jobs = [(g, r) for g in range(len(grid)) for r in range(reps)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(one, jobs))
    else:
        out = [one(j) for j in jobs]

    S = len(names)
    K = len(targets)
    power = np.zeros((len(grid), S, K))
    power_b = np.zeros((len(grid), S, K))
    decoy = np.zeros((len(grid), S))
    for (g, _), (raw, corr) in zip(jobs, out):
        sig = list(truths[g].significant)
        power[g] += raw[:, sig]
        power_b[g] += corr[:, sig]
        dec = list(truths[g].decoys)
        if dec:
            decoy[g] += raw[:, dec].mean(axis=1)
    power /= reps
    power_b /= reps
    decoy /= reps
    meta = {"m": cfg.m, "seed": cfg.seed, "mode": cfg.mode, "n": n, "alpha": alpha,
            "combined": [k.value for k in comb] if comb else []}
    return PowerReport(model, axis, grid, names, targets, reps, power, power_b, decoy, meta)


def compare_centering(models=("L", "PCTh1", "PCTh2", "PCInt1", "PCInt2"), cfg: McConfig | None = None,
                      axis="w1", grid=None, reps=96, n=100) -> list:
    """Power of Max (uncentered path) next to MaxB (centered path).

    Returns one dict per model and grid point with both powers and their
    difference ``delta = MaxB - Max``.
    """
    out = []
    for model in models:
        rep = run_axis(model, axis, grid, stats=(StatisticKind.MAX, StatisticKind.MAXB), reps=reps,
                       cfg=cfg, n=n, combine=None)
        i_max, i_b = rep.stat_index("Max"), rep.stat_index("MaxB")
        for g, v in enumerate(rep.grid):
            pm, pb = float(rep.power[g, i_max, 0]), float(rep.power[g, i_b, 0])
            out.append({"model": rep.model, "axis": axis, "value": v, "Max": pm, "MaxB": pb,
                        "delta": pb - pm, "reps": reps})
    return out


def binomial_band(reps: int, rate: float = 0.05, level: float = 0.99):
    """Central interval of the rejection fraction of an exact level-``rate`` test."""
    from scipy.stats import binom

    tail = (1.0 - level) / 2
    return float(binom.ppf(tail, reps, rate) / reps), float(binom.ppf(1 - tail, reps, rate) / reps)


@dataclass
class NullCalibration:
    """P-values of every test on data with no interaction.

    ``p_values`` are for an independent U[0, 1] covariate, for which the
    permutation null holds exactly. ``trend_p_values`` are for the covariate
    that drives the trend: it has no interaction, but it makes the outcome's
    spread depend on the covariate, so rates there are a diagnostic rather
    than an exact-level check.
    """

    statistics: list
    p_values: np.ndarray  # shape (reps, S)
    trend_p_values: np.ndarray
    alpha: float
    band: tuple
    meta: dict = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return np.mean(self.p_values < self.alpha, axis=0)

    @property
    def trend_rates(self) -> np.ndarray:
        return np.mean(self.trend_p_values < self.alpha, axis=0)

    def inside(self) -> np.ndarray:
        lo, hi = self.band
        return (self.rates >= lo) & (self.rates <= hi)

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "alpha": self.alpha,
            "reps": int(self.p_values.shape[0]),
            "band99": list(self.band),
            "rates": {s: float(r) for s, r in zip(self.statistics, self.rates)},
            "inside": {s: bool(v) for s, v in zip(self.statistics, self.inside())},
            "trend_covariate_rates": {s: float(r) for s, r in zip(self.statistics, self.trend_rates)},
        }

    def histogram_csv(self, bins: int = 20) -> str:
        edges = np.linspace(0.0, 1.0, bins + 1)
        lines = ["lower,upper," + ",".join(self.statistics)]
        counts = [np.histogram(self.p_values[:, s], bins=edges)[0] for s in range(len(self.statistics))]
        for b in range(bins):
            cells = [repr(float(edges[b])), repr(float(edges[b + 1]))] + [str(int(c[b])) for c in counts]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


ALL_STATS = (StatisticKind.MAX,) + BENCH_STATS


def null_calibration(stats=ALL_STATS, combine=DEFAULT_COMBINED, reps=1000, cfg: McConfig | None = None,
                     n=100, w1=2.0, delta=1.0, alpha=0.05, threads=None) -> NullCalibration:
    """Rejection rates on the L model with W2 = 0 (no interaction).

    Each replication tests an independent covariate (exact null) and the
    trend covariate X1 against one shared set of permutations.
    """
    cfg = cfg or McConfig(m=2000)
    kinds = list(dict.fromkeys(StatisticKind.parse(s) for s in stats))
    comb = tuple(StatisticKind.parse(s) for s in combine) if combine else None
    for k in comb or ():
        if k not in kinds:
            kinds.append(k)
    names = [k.value for k in kinds] + ([COMB] if comb else [])
    spec = SyntheticSpec("L", n=n, w1=w1, w2=0.0, delta=delta, decoys=1)
    inner = replace(cfg, threads=1, stats=tuple(kinds))
    workers = cfg.threads if threads is None else threads

    def one(r):
        ds, _ = generate(replace(spec, seed=derive_seed(cfg.seed, 99, r, 0)))
        y = prepare(ds, centered=True)
        y_raw = prepare(ds, centered=False)
        c = replace(inner, seed=derive_seed(cfg.seed, 99, r, 1))
        xs = [ds.covariates[:, 1], ds.covariates[:, 0]]
        reports, _ = evaluate_covariates(y, xs, kinds, c, y_raw=y_raw, combine=comb or False)
        out = []
        for rep in reports:
            ps = [x.p_value for x in rep.results]
            if comb:
                ps.append(rep.combined_p)
            out.append(ps)
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(one, range(reps)))
    else:
        rows = [one(r) for r in range(reps)]
    rows = np.array(rows)
    meta = {"m": cfg.m, "seed": cfg.seed, "mode": cfg.mode, "n": n, "w1": w1, "delta": delta, "model": "L"}
    return NullCalibration(names, rows[:, 0], rows[:, 1], alpha, binomial_band(reps, alpha), meta)
