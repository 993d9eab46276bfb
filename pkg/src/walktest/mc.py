"""Monte-Carlo permutation p-values for single and combined tests.

The null distribution is sampled by permuting the modified outcome. All
statistics in a run are evaluated on the same permutations, which is what
makes the min-p combination valid. Permutations are generated in fixed-size
blocks whose random streams depend only on ``(seed, block index)``, so
results do not depend on how many worker threads are used.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import dist
from .cumproc import count_tie_groups, increment_variance
from .data import DataError, TrialDataset
from .preprocess import ModifiedOutcome, prepare
from .stats import StatisticKind, molin_tstats, path_statistic, stat_molin

BLOCK = 256
RNG_SCHEME = f"PCG64/SeedSequence(seed, spawn_key=(block,))/block={BLOCK}/v1"
DEFAULT_COMBINED = (
    StatisticKind.MAXB,
    StatisticKind.MAXB_N,
    StatisticKind.MAXBE,
    StatisticKind.MAXBE_N,
    StatisticKind.SAREAB,
)
MODES = ("strict", "smooth")
THREADS_ENV = "WALKTEST_THREADS"

_CLOSED_FORM = {
    StatisticKind.MAX: dist.tail_brownian_max,
    StatisticKind.MAXB: dist.tail_bridge_max,
    StatisticKind.MAXBE: dist.tail_excursion_max,
}


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(value)
    except ValueError:
        return 1
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo settings.

    ``mode`` is ``"strict"`` (p = #{S > V}/M) or ``"smooth"``
    (p = (1 + #{S >= V})/(M + 1)). ``threads`` only affects speed.
    """

    m: int = 10_000
    seed: int = 0
    stats: tuple = DEFAULT_COMBINED
    mode: str = "strict"
    alpha: float = 0.05
    molin_intercept: bool = True
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stats", tuple(StatisticKind.parse(s) for s in self.stats))
        if self.m < 100:
            raise ValueError(f"need at least 100 Monte-Carlo permutations, got {self.m}")
        if not self.stats:
            raise ValueError("need at least one statistic")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            object.__setattr__(self, "threads", os.cpu_count() or 1)

    def provenance(self) -> dict:
        """Settings that determine the numbers in a report (threads excluded)."""
        return {
            "m": self.m,
            "seed": self.seed,
            "stats": [s.value for s in self.stats],
            "mode": self.mode,
            "alpha": self.alpha,
            "molin_intercept": self.molin_intercept,
            "rng": RNG_SCHEME,
        }


@dataclass
class StatResult:
    statistic: str
    value: float
    p_value: float
    p_corrected: float | None = None
    asymptotic_p: float | None = None
    null_mean: float = float("nan")
    null_sd: float = float("nan")
    null_q95: float = float("nan")
    degenerate: bool = False


@dataclass
class TestReport:
    """Result of testing one covariate."""

    covariate: str
    n: int
    results: list
    m: int
    seed: int
    mode: str
    tie_groups: int = 0
    combined_p: float | None = None
    combined_p_corrected: float | None = None
    significant: bool | None = None
    flags: list = field(default_factory=list)

    __test__ = False  # not a pytest class

    def result(self, kind) -> StatResult:
        name = StatisticKind.parse(kind).value
        for r in self.results:
            if r.statistic == name:
                return r
        raise KeyError(name)

    @property
    def p_value(self) -> float:
        """Combined p when several statistics were combined, else the single p."""
        if self.combined_p is not None:
            return self.combined_p
        return self.results[0].p_value

    @property
    def p_final(self) -> float:
        if self.combined_p is not None:
            return self.combined_p if self.combined_p_corrected is None else self.combined_p_corrected
        r = self.results[0]
        return r.p_value if r.p_corrected is None else r.p_corrected


# -- permutations --

def permutation_block(seed: int, block: int, n: int) -> np.ndarray:
    """``BLOCK`` random permutations of ``range(n)`` for one block index."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    rng = np.random.Generator(np.random.PCG64(ss))
    return rng.permuted(np.tile(np.arange(n), (BLOCK, 1)), axis=1)


def permutations(seed: int, n: int, m: int) -> np.ndarray:
    """First ``m`` permutations of the stream (shape (m, n))."""
    n_blocks = -(-m // BLOCK)
    return np.concatenate([permutation_block(seed, b, n) for b in range(n_blocks)])[:m]


def derive_seed(*key) -> int:
    """64-bit seed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence(int(key[0]), spawn_key=tuple(int(k) for k in key[1:]))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- core evaluation --

def _as_vector(y):
    if isinstance(y, ModifiedOutcome):
        return np.asarray(y.y, dtype=float)
    return np.asarray(y, dtype=float)


class _Problem:
    """Outcomes, covariates and statistics for one shared permutation run."""

    def __init__(self, y, y_raw, xs, kinds, intercept):
        self.y = _as_vector(y)
        self.y_raw = self.y if y_raw is None else _as_vector(y_raw)
        self.n = len(self.y)
        if len(self.y_raw) != self.n:
            raise DataError("centered and uncentered outcomes differ in length")
        self.xs = [np.asarray(x, dtype=float) for x in xs]
        for x in self.xs:
            if len(x) != self.n:
                raise DataError(f"covariate length {len(x)} does not match outcome length {self.n}")
        self.kinds = tuple(kinds)
        self.intercept = intercept
        self.orders = [np.argsort(x, kind="stable") for x in self.xs]
        self.x_sorted = [x[o] for x, o in zip(self.xs, self.orders)]
        self.sigma2 = increment_variance(self.y)
        self.sigma2_raw = increment_variance(self.y_raw)
        self.scale = np.sqrt(self.n * self.sigma2)
        self.scale_raw = np.sqrt(self.n * self.sigma2_raw)
        self.path_kinds = [k for k in self.kinds if k is not StatisticKind.MOLIN]
        self.has_molin = StatisticKind.MOLIN in self.kinds

    def degenerate(self, kind) -> bool:
        if kind is StatisticKind.MOLIN:
            return self.sigma2 <= 0
        return (self.sigma2_raw if kind.uses_uncentered else self.sigma2) <= 0

    def _paths(self, Y, raw):
        scale = self.scale_raw if raw else self.scale
        if scale <= 0:
            return np.zeros(Y.shape)
        return np.cumsum(Y, axis=-1) / scale

    def evaluate(self, Y, Y_raw, x_index=None):
        """Statistics for outcome rows already arranged in covariate order.

        Returns (path values {kind: array}, molin values (n_cov, rows) or None).
        """
        out = {}
        z = z_raw = None
        for k in self.path_kinds:
            if self.degenerate(k):
                out[k] = np.zeros(Y.shape[:-1])
                continue
            if k.uses_uncentered:
                if z_raw is None:
                    z_raw = self._paths(Y_raw, raw=True)
                out[k] = path_statistic(k, z_raw)
            else:
                if z is None:
                    z = self._paths(Y, raw=False)
                out[k] = path_statistic(k, z)
        molin = None
        if self.has_molin:
            idx = range(len(self.xs)) if x_index is None else [x_index]
            molin = np.stack([np.abs(molin_tstats(Y, self.x_sorted[j], self.intercept)[0]) for j in idx])
        return out, molin, z

    def observed(self, j):
        o = self.orders[j]
        out, molin, z = self.evaluate(self.y[o], self.y_raw[o], x_index=j)
        vals = {k: float(v) for k, v in out.items()}
        if molin is not None:
            vals[StatisticKind.MOLIN] = float(molin[0])
        return vals, z

    def null_block(self, seed, block, keep_paths):
        P = permutation_block(seed, block, self.n)
        Y = self.y[P]
        Y_raw = Y if self.y_raw is self.y else self.y_raw[P]
        out, molin, z = self.evaluate(Y, Y_raw)
        if keep_paths and z is None:
            z = self._paths(Y, raw=False)
        return out, molin, (z if keep_paths else None)


@dataclass
class NullSample:
    """Null statistics: path statistics shared by all covariates, MoLin per covariate."""

    path: dict
    molin: np.ndarray | None
    paths: np.ndarray | None = None

    def matrix(self, kinds, j) -> np.ndarray:
        rows = []
        for k in kinds:
            rows.append(self.molin[j] if k is StatisticKind.MOLIN else self.path[k])
        return np.vstack(rows)


def _null_sample(problem: _Problem, cfg: McConfig, keep_paths=False) -> NullSample:
    n_blocks = -(-cfg.m // BLOCK)
    work = lambda b: problem.null_block(cfg.seed, b, keep_paths)
    if cfg.threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            parts = list(ex.map(work, range(n_blocks)))
    else:
        parts = [work(b) for b in range(n_blocks)]
    path = {k: np.concatenate([p[0][k] for p in parts])[: cfg.m] for k in problem.path_kinds}
    molin = None
    if problem.has_molin:
        molin = np.concatenate([p[1] for p in parts], axis=1)[:, : cfg.m]
    paths = np.concatenate([p[2] for p in parts])[: cfg.m] if keep_paths else None
    return NullSample(path, molin, paths)


# -- p-values --

def _count_greater(sorted_s, v):
    return len(sorted_s) - np.searchsorted(sorted_s, v, side="right")


def _count_at_least(sorted_s, v):
    return len(sorted_s) - np.searchsorted(sorted_s, v, side="left")


def mc_p_value(null, value, mode="strict") -> float:
    """Permutation p-value of ``value`` against null draws ``null``."""
    null = np.asarray(null)
    m = len(null)
    if mode == "strict":
        return float(np.sum(null > value)) / m
    return (1.0 + float(np.sum(null >= value))) / (m + 1)


def combined_p_value(S, V, mode="strict"):
    """Min-p combination over the rows of a shared null matrix.

    Parameters
    ----------
    S : array, shape (L, M)
        Null statistics; column k comes from permutation k for every row.
    V : array, shape (L,)
        Observed statistics.

    Returns
    -------
    (combined p, observed min-p, per-permutation min-p array)
    """
    S = np.asarray(S, dtype=float)
    V = np.asarray(V, dtype=float)
    L, m = S.shape
    per_perm = np.full(m, np.inf)
    observed = np.inf
    for l in range(L):
        srt = np.sort(S[l])
        if mode == "strict":
            per_perm = np.minimum(per_perm, _count_greater(srt, S[l]) / m)
            observed = min(observed, _count_greater(srt, V[l]) / m)
        else:
            per_perm = np.minimum(per_perm, _count_at_least(srt, S[l]) / (m + 1))
            observed = min(observed, (1 + _count_at_least(srt, V[l])) / (m + 1))
    hits = float(np.sum(per_perm <= observed))
    if mode == "strict":
        p = hits / m
    else:
        p = (1.0 + hits) / (m + 1)
    return p, float(observed), per_perm


def bonferroni(p, d: int):
    return np.minimum(np.asarray(p, dtype=float) * d, 1.0)


# -- report assembly --

def _stat_result(kind, value, null, mode, degenerate, asym=None):
    if degenerate:
        return StatResult(kind.value, 0.0, 1.0, asymptotic_p=None, degenerate=True)
    if asym is None and kind in _CLOSED_FORM:
        asym = _CLOSED_FORM[kind](value)
    return StatResult(
        statistic=kind.value,
        value=float(value),
        p_value=mc_p_value(null, value, mode),
        asymptotic_p=None if asym is None else float(asym),
        null_mean=float(np.mean(null)),
        null_sd=float(np.std(null, ddof=1)),
        null_q95=float(np.quantile(null, 0.95)),
    )


def _report(problem, null, j, name, cfg, combine):
    vals, _ = problem.observed(j)
    kinds = problem.kinds
    results = []
    flags = []
    for k in kinds:
        deg = problem.degenerate(k)
        nul = null.molin[j] if k is StatisticKind.MOLIN else null.path[k]
        asym = None
        if k is StatisticKind.MOLIN and not deg:
            fit = stat_molin(problem.y, problem.xs[j], problem.intercept)
            asym = fit.p_value
            if fit.degenerate:
                deg = True
                flags.append("constant covariate")
            if fit.perfect_fit:
                flags.append("MoLin perfect fit")
        results.append(_stat_result(k, vals.get(k, 0.0), nul, cfg.mode, deg, asym))
        if deg:
            flags.append(f"{k.value} degenerate")
    combined = None
    members = kinds if combine is True else tuple(combine or ())
    if len(members) > 1:
        live = [i for i, k in enumerate(kinds) if k in members and not results[i].degenerate]
        if live:
            S = null.matrix([kinds[i] for i in live], j)
            V = np.array([results[i].value for i in live])
            combined = combined_p_value(S, V, cfg.mode)[0]
        else:
            combined = 1.0
    return TestReport(
        covariate=name,
        n=problem.n,
        results=results,
        m=cfg.m,
        seed=cfg.seed,
        mode=cfg.mode,
        tie_groups=count_tie_groups(problem.xs[j]),
        combined_p=combined,
        flags=sorted(set(flags)),
    )


def run_single_test(y, x, stat, cfg: McConfig | None = None, y_raw=None, name="x") -> TestReport:
    """Permutation test of one statistic for one covariate.

    ``y`` is the modified outcome whose cumulative path is scored (pass the
    uncentered product for ``Max``).
    """
    cfg = cfg or McConfig()
    kind = StatisticKind.parse(stat)
    problem = _Problem(y, y_raw, [x], (kind,), cfg.molin_intercept)
    null = _null_sample(problem, cfg)
    return _report(problem, null, 0, name, cfg, combine=False)


def run_combined_test(y, x, stats=None, cfg: McConfig | None = None, y_raw=None, name="x") -> TestReport:
    """Min-p combination of several statistics over one shared set of permutations.

    ``y_raw`` (uncentered outcome) is used for ``Max`` if given.
    """
    cfg = cfg or McConfig()
    kinds = tuple(StatisticKind.parse(s) for s in (stats or cfg.stats))
    if len(kinds) < 2:
        raise ValueError("a combined test needs at least two statistics")
    problem = _Problem(y, y_raw, [x], kinds, cfg.molin_intercept)
    null = _null_sample(problem, cfg)
    return _report(problem, null, 0, name, cfg, combine=True)


def evaluate_covariates(y, xs, kinds, cfg: McConfig, y_raw=None, names=None, combine=True,
                        keep_paths=False):
    """Test several covariates against one shared null sample.

    ``combine`` is True (combine all ``kinds``), False, or a subset of
    ``kinds`` to combine.

    Returns ``(reports, null)``; ``null.paths`` holds the permuted normalized
    paths when ``keep_paths`` is set.
    """
    kinds = tuple(StatisticKind.parse(k) for k in kinds)
    problem = _Problem(y, y_raw, xs, kinds, cfg.molin_intercept)
    null = _null_sample(problem, cfg, keep_paths=keep_paths)
    names = names or [f"x{j + 1}" for j in range(len(problem.xs))]
    reports = [_report(problem, null, j, names[j], cfg, combine) for j in range(len(problem.xs))]
    return reports, null


def apply_correction(reports, correction="none", alpha=0.05):
    """Fill in corrected p-values and significance flags in place."""
    if correction not in ("none", "bonferroni"):
        raise ValueError(f"unknown correction {correction!r}")
    d = len(reports) if correction == "bonferroni" else 1
    for rep in reports:
        for r in rep.results:
            r.p_corrected = float(bonferroni(r.p_value, d))
        if rep.combined_p is not None:
            rep.combined_p_corrected = float(bonferroni(rep.combined_p, d))
        rep.significant = bool(rep.p_final < alpha)
    return reports


def screen_covariates(dataset: TrialDataset, stats=None, cfg: McConfig | None = None,
                      correction="none", combine=True) -> list:
    """Test every covariate of a dataset, optionally with Bonferroni correction.

    The arm-centered modified outcome is used for every statistic except
    ``Max``, which gets the uncentered one. With ``combine`` and two or more
    statistics each report carries the min-p combined p-value; otherwise the
    statistics are reported separately.
    """
    cfg = cfg or McConfig()
    kinds = tuple(StatisticKind.parse(s) for s in (stats or cfg.stats))
    y = prepare(dataset, centered=True)
    y_raw = prepare(dataset, centered=False) if any(k.uses_uncentered for k in kinds) else None
    xs = [dataset.covariates[:, j] for j in range(dataset.d)]
    reports, _ = evaluate_covariates(y, xs, kinds, cfg, y_raw=y_raw,
                                     names=list(dataset.covariate_names), combine=combine)
    return apply_correction(reports, correction, cfg.alpha)


# -- serialization --

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _clean(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_clean(x) for x in v]
    return v


def report_meta(cfg: McConfig, extra: dict | None = None) -> dict:
    from . import __version__

    config = dict(cfg.provenance())
    if extra:
        config.update(extra)
    return {"version": __version__, **cfg.provenance(), "config_hash": config_hash(config)}


def reports_to_json(reports, meta: dict) -> str:
    doc = {"meta": meta, "reports": [_clean(asdict(r)) for r in reports]}
    return json.dumps(doc, indent=2) + "\n"


CSV_FIELDS = ("covariate", "statistic", "value", "p_value", "p_corrected", "asymptotic_p",
              "null_mean", "null_sd", "null_q95", "degenerate", "significant", "tie_groups", "n",
              "m", "seed")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if not np.isfinite(v) else repr(v)
    return str(v)


def reports_to_csv(reports) -> str:
    """One row per covariate and statistic, plus a ``Comb`` row when combined."""
    lines = [",".join(CSV_FIELDS)]
    for rep in reports:
        rows = [asdict(r) for r in rep.results]
        if rep.combined_p is not None:
            rows.append({"statistic": "Comb", "value": None, "p_value": rep.combined_p,
                         "p_corrected": rep.combined_p_corrected})
        for row in rows:
            full = {
                "covariate": rep.covariate, "significant": rep.significant,
                "tie_groups": rep.tie_groups, "n": rep.n, "m": rep.m, "seed": rep.seed,
                **row,
            }
            lines.append(",".join(_csv_escape(_cell(full.get(f))) for f in CSV_FIELDS))
    return "\n".join(lines) + "\n"


def _csv_escape(s: str) -> str:
    if any(c in s for c in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def envelope(paths: np.ndarray, lower=2.5, upper=97.5):
    """Pointwise percentile band of permuted paths."""
    return np.percentile(paths, lower, axis=0), np.percentile(paths, upper, axis=0)
