"""Random-walk tests for covariate-treatment interaction in randomized trials."""

__version__ = "0.1.0"

from .data import ArmPair, DataError, DoseEncoding, TrialDataset, ingest_csv
from .preprocess import (
    ModifiedOutcome,
    VarianceDiagnostics,
    center_response,
    center_treatment,
    gamma_closed_form,
    modified_outcome,
    prepare,
    variance_diagnostics,
)
from .cumproc import (
    CumulativeProcess,
    SortPermutation,
    circular_shift_to_min,
    cumulative,
    sort_permutation,
)
from .stats import (
    RegressionFit,
    StatisticKind,
    stat_areaB,
    stat_max,
    stat_maxB,
    stat_maxB_N,
    stat_maxBE,
    stat_maxBE_N,
    stat_molin,
    stat_sareaB,
)
from .dist import TailKind, quantile, tail, tail_bridge_max, tail_brownian_max, tail_excursion_max
from .mc import (
    DEFAULT_COMBINED,
    McConfig,
    TestReport,
    run_combined_test,
    run_single_test,
    screen_covariates,
)
