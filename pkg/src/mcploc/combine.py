"""Per-candidate p-values, the confidence set, and the end-to-end
localization pipeline.

Left and right p-values are independent exactly when the score family is
non-adaptive, which is what the minimum and Fisher combiners require; the
Bonferroni combiner tolerates arbitrary dependence. The t = n candidate is
special: its right block is empty, so its forward p-value is combined with
a backward-scan p-value by Bonferroni, per-candidate combiner regardless.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import engine, testing
from .core import ks_uniform_distance
from .errors import ConfigurationError

__all__ = [
    "CandidatePValues",
    "ConfidenceSet",
    "combine_min",
    "combine_fisher",
    "combine_bonferroni",
    "COMBINERS",
    "default_combiner",
    "confidence_set",
    "candidate_pvalues",
    "localize",
    "result_dict",
]

_LOG_FLOOR = 1e-300


def combine_min(p_left, p_right):
    """1 - (1 - min(p_left, p_right))^2; exact for independent uniforms."""
    m = min(p_left, p_right)
    return 1.0 - (1.0 - m) * (1.0 - m)


def combine_fisher(p_left, p_right):
    """Fisher's method: upper tail of chi-square(4) at -2 log p_l - 2 log p_r.

    Zeros are floored at 1e-300 before the log; small inputs give small
    output (survival-function convention, so the result is a p-value).
    """
    stat = -2.0 * math.log(max(p_left, _LOG_FLOOR)) - 2.0 * math.log(max(p_right, _LOG_FLOOR))
    # chi-square with 4 degrees of freedom: P(X > x) = (1 + x/2) e^(-x/2)
    return (1.0 + stat / 2.0) * math.exp(-stat / 2.0)


def combine_bonferroni(p_left, p_right):
    """min(2 p_left, 2 p_right, 1); valid under arbitrary dependence."""
    return min(2.0 * p_left, 2.0 * p_right, 1.0)


COMBINERS = {
    "minimum": combine_min,
    "fisher": combine_fisher,
    "bonferroni": combine_bonferroni,
}

# combiners whose validity needs independent left/right p-values
_INDEPENDENCE_ONLY = ("minimum", "fisher")


def default_combiner(family):
    return "bonferroni" if family.adaptive else "minimum"


@dataclass
class CandidatePValues:
    """One p-value per candidate changepoint t in 1..n."""

    values: np.ndarray
    combiner: str

    @property
    def n(self):
        return self.values.shape[0]


@dataclass
class ConfidenceSet:
    """Neyman inversion of the per-candidate tests.

    ``members`` is the sorted 1-based index set {t : p_t > alpha}, possibly
    non-contiguous; ``hull`` is its [min, max] envelope (None when empty).
    ``contains_n`` flags that no change at all is plausible at this level.
    ``point_estimate`` is the smallest index attaining the p-value maximum.
    """

    alpha: float
    members: list
    hull: tuple
    contains_n: bool
    point_estimate: int


def confidence_set(pvalues, alpha):
    """{t : p_t > alpha} plus the argmax point estimator."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must be in (0, 1), got {alpha}")
    p = pvalues.values
    n = p.shape[0]
    members = [int(t) for t in range(1, n + 1) if p[t - 1] > alpha]
    hull = (members[0], members[-1]) if members else None
    return ConfidenceSet(
        alpha=alpha,
        members=members,
        hull=hull,
        contains_n=bool(members and members[-1] == n),
        point_estimate=int(np.argmax(p)) + 1,
    )


def _side_pvalues(data, family, w, rng, test_method, B, null_table, hybrid_threshold,
                  permutation_mode, cache_dir, workers):
    if test_method == "empirical":
        table = null_table or testing.get_or_build_null_table(
            data.n, B, rng.substream("null-table"), cache_dir=cache_dir, workers=workers
        )
        return testing.empirical_test(w, table, rng), table
    if test_method == "asymptotic":
        return testing.asymptotic_test(w), None
    if test_method == "hybrid":
        table = null_table or testing.get_or_build_null_table(
            data.n, B, rng.substream("null-table"), cache_dir=cache_dir, workers=workers
        )
        return testing.hybrid_test(w, table, rng, threshold=hybrid_threshold), table
    if test_method == "permutation":
        return (
            testing.permutation_test(data, family, w, B, rng, mode=permutation_mode, workers=workers),
            None,
        )
    raise ConfigurationError(f"unknown test method {test_method!r}")


def candidate_pvalues(data, family, rng, *, test_method="empirical", combiner=None,
                      B=testing.DEFAULT_B, null_table=None, known_changepoint=False,
                      hybrid_threshold=testing.DEFAULT_HYBRID_THRESHOLD,
                      permutation_mode="permute", cache_dir=None, workers=1):
    """Run the full pipeline up to one p-value per candidate.

    With ``known_changepoint=True`` the no-change candidate t = n is
    skipped (its p-value is fixed at 0), which is valid when a changepoint
    is known to exist. Otherwise p_n Bonferroni-combines the forward
    p-value with a backward-scan p-value mapped through the same backend.
    """
    if combiner is None:
        combiner = default_combiner(family)
    if combiner not in COMBINERS:
        raise ConfigurationError(f"unknown combiner {combiner!r}")
    if combiner in _INDEPENDENCE_ONLY and family.adaptive:
        raise ConfigurationError(
            f"the {combiner} combiner needs independent sides; "
            f"family {family.name!r} is adaptive, use bonferroni"
        )

    n = data.n
    matrix = engine.compute_matrix(data, family, rng)
    w = engine.discrepancies(matrix)
    side, table = _side_pvalues(
        data, family, w, rng, test_method, B, null_table, hybrid_threshold,
        permutation_mode, cache_dir, workers,
    )

    fn = COMBINERS[combiner]
    values = np.empty(n)
    for t in range(n - 1):
        values[t] = fn(side.left[t], side.right[t])

    if known_changepoint:
        values[n - 1] = 0.0
    else:
        back = engine.backward_pvalues(data, family, rng)
        w_bar = math.sqrt(n) * ks_uniform_distance(back.values)
        p_bwd = testing.backward_test_pvalue(
            w_bar, test_method if test_method != "hybrid" else "empirical",
            table=table, rng=rng, data=data, family=family, B=B,
        )
        values[n - 1] = combine_bonferroni(side.left[n - 1], p_bwd)

    return CandidatePValues(values=values, combiner=combiner)


def localize(data, family, alpha, rng, **kwargs):
    """Confidence set and point estimate for a single changepoint.

    Returns ``(CandidatePValues, ConfidenceSet)``; keyword options are
    those of :func:`candidate_pvalues`.
    """
    pvalues = candidate_pvalues(data, family, rng, **kwargs)
    return pvalues, confidence_set(pvalues, alpha)


def result_dict(pvalues, conf_set, *, seed, config=None):
    """The result schema emitted by the command-line tools."""
    return {
        "alpha": conf_set.alpha,
        "p_values": [float(v) for v in pvalues.values],
        "members": conf_set.members,
        "hull": list(conf_set.hull) if conf_set.hull else None,
        "point_estimate": conf_set.point_estimate,
        "contains_n": conf_set.contains_n,
        "config": dict(config or {}),
        "seed": seed,
    }
