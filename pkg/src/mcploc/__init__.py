"""mcploc: offline changepoint localization with finite-sample valid
confidence sets built from a matrix of conformal p-values.

The pipeline scores every point against each side of every candidate
split, turns the scores into randomized conformal ranks, measures each
side's deviation from uniformity with a normalized KS statistic, converts
those to p-values through a pluggable testing backend, and inverts the
family of tests into a confidence set for the changepoint. Only
exchangeability of the pre- and post-change segments is assumed.
"""

from .bench import (
    ExperimentConfig,
    ExperimentReport,
    generate,
    load_config,
    make_score_family,
    np_power_oracle,
    np_rank_expectation,
    run_experiment,
)
from .combine import (
    CandidatePValues,
    ConfidenceSet,
    candidate_pvalues,
    combine_bonferroni,
    combine_fisher,
    combine_min,
    confidence_set,
    localize,
)
from .core import (
    Dataset,
    RandomStream,
    kolmogorov_cdf,
    ks_uniform_distance,
    randomized_pit,
    randomized_rank,
)
from .engine import (
    BackwardPValues,
    DiscrepancyScores,
    PValueMatrix,
    backward_pvalues,
    compute_matrix,
    discrepancies,
)
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    IsolationError,
    McplocError,
    ScoreError,
)
from .kernels import backend as kernel_backend
from .multi import (
    KernelConfig,
    Segmentation,
    kcpd_segment,
    kcpd_segment_penalized,
    median_heuristic,
    multi_localize,
)
from .scores import (
    ClassProbTable,
    DensityPair,
    ScoreFamily,
    cauchy_density_pair,
    classifier_family,
    gaussian_density_pair,
    identity_family,
    kde_family,
    oracle_lr_family,
)
from .testing import (
    NullQuantileTable,
    SidePValues,
    asymptotic_test,
    build_null_table,
    empirical_test,
    get_or_build_null_table,
    hybrid_test,
    load_null_table,
    permutation_test,
    save_null_table,
)

__version__ = "0.1.0"
