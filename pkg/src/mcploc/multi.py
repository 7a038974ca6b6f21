"""Multiple-changepoint wrapper: kernel changepoint detection for point
estimates, midpoint isolation, then per-window single-changepoint
localization.

The segmentation minimizes the within-segment kernel least-squares cost
with a squared-exponential kernel (median-heuristic bandwidth by default)
over exactly K changepoints by dynamic programming. Midpoints between
consecutive estimates cut the data into windows that each contain one
changepoint when the estimates are accurate to half the minimum gap; the
per-window confidence sets are therefore heuristic, not finite-sample
guaranteed.
"""

from dataclasses import dataclass

import numpy as np

from .combine import ConfidenceSet, localize
from .errors import ConfigurationError, DegenerateDataError, IsolationError

__all__ = [
    "KernelConfig",
    "Segmentation",
    "WindowLocalization",
    "median_heuristic",
    "kcpd_segment",
    "kcpd_segment_penalized",
    "multi_localize",
]


@dataclass
class KernelConfig:
    """Squared-exponential kernel exp(-(z - z')^2 / (2 sigma^2)), sigma > 0."""

    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigurationError(f"kernel bandwidth must be positive, got {self.bandwidth}")


@dataclass
class Segmentation:
    """K estimated changepoints (1-based, strictly increasing, all < n)."""

    n: int
    estimates: list

    @property
    def n_changepoints(self):
        return len(self.estimates)

    def midpoints(self):
        """Floor midpoints t_k between consecutive estimates, with virtual
        endpoints 0 and n; length K+1."""
        pts = [0] + list(self.estimates) + [self.n]
        return [(pts[k - 1] + pts[k]) // 2 for k in range(1, len(pts))]


@dataclass
class WindowLocalization:
    """Per-changepoint output of the multi wrapper, in global coordinates."""

    window: tuple
    kcpd_estimate: int
    pvalues: np.ndarray
    conf_set: object


def _pairwise_sqdist(values):
    sq = np.sum(values * values, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (values @ values.T)
    return np.maximum(d2, 0.0)


def median_heuristic(data):
    """Median of the n(n-1)/2 pairwise distances (even count: mean of the
    middle two)."""
    d2 = _pairwise_sqdist(data.values)
    iu = np.triu_indices(data.n, k=1)
    dists = np.sqrt(d2[iu])
    if not np.any(dists > 0):
        raise DegenerateDataError("all observations identical; no usable bandwidth")
    return float(np.median(dists))


def _gram(data, config):
    d2 = _pairwise_sqdist(data.values)
    return np.exp(-d2 / (2.0 * config.bandwidth**2))


def _prefix2(gram):
    n = gram.shape[0]
    out = np.zeros((n + 1, n + 1))
    out[1:, 1:] = np.cumsum(np.cumsum(gram, axis=0), axis=1)
    return out


def _segment_costs_to(cum2, diag2, m):
    """Cost of segments [j, m) for all j < m, vectorized over j.

    cost = (m - j) - S(j, m) / (m - j) with S the Gram block sum; for the
    squared-exponential kernel the diagonal contribution is the length.
    """
    j = np.arange(m)
    length = (m - j).astype(float)
    s = cum2[m, m] - cum2[j, m] - cum2[m, j] + diag2[j]
    return length - s / length


def _kcpd_tables(data, max_k, config):
    n = data.n
    gram = _gram(data, config)
    cum2 = _prefix2(gram)
    diag2 = np.diagonal(cum2).copy()
    cost = np.full((max_k + 1, n + 1), np.inf)
    parent = np.zeros((max_k + 1, n + 1), dtype=int)
    for m in range(1, n + 1):
        cost[0, m] = _segment_costs_to(cum2, diag2, m)[0]
    for k in range(1, max_k + 1):
        for m in range(k + 1, n + 1):
            seg = _segment_costs_to(cum2, diag2, m)
            totals = cost[k - 1, k:m] + seg[k:m]
            best = int(np.argmin(totals))
            cost[k, m] = totals[best]
            parent[k, m] = best + k
    return cost, parent


def _backtrack(parent, k, n):
    bounds = []
    m = n
    for kk in range(k, 0, -1):
        m = int(parent[kk, m])
        bounds.append(m)
    return bounds[::-1]


def kcpd_segment(data, n_changepoints, kernel_config=None):
    """Exact dynamic-programming segmentation with K changepoints.

    Minimizes the summed within-segment kernel least-squares cost; O(n^2)
    kernel evaluations via prefix sums and O(K n^2) for the program itself.
    """
    n = data.n
    k = int(n_changepoints)
    if not 1 <= k <= n // 4:
        raise ConfigurationError(f"need 1 <= K <= n/4 = {n // 4}, got K={k}")
    config = kernel_config or KernelConfig(median_heuristic(data))
    cost, parent = _kcpd_tables(data, k, config)
    return Segmentation(n=n, estimates=_backtrack(parent, k, n))


def kcpd_segment_penalized(data, penalty, kernel_config=None, max_changepoints=None):
    """Segmentation with automatic K: minimizes cost + penalty * K.

    Not the default pipeline; K is normally supplied by the caller.
    """
    n = data.n
    if penalty <= 0:
        raise ConfigurationError(f"penalty must be positive, got {penalty}")
    max_k = max_changepoints if max_changepoints is not None else n // 4
    if not 1 <= max_k <= n // 4:
        raise ConfigurationError(f"need 1 <= max K <= n/4 = {n // 4}, got {max_k}")
    config = kernel_config or KernelConfig(median_heuristic(data))
    cost, parent = _kcpd_tables(data, max_k, config)
    totals = [cost[k, n] + penalty * k for k in range(max_k + 1)]
    best_k = int(np.argmin(totals))
    if best_k == 0:
        return Segmentation(n=n, estimates=[])
    return Segmentation(n=n, estimates=_backtrack(parent, best_k, n))


def multi_localize(data, n_changepoints, family, alpha, rng, *, kernel_config=None,
                   segmentation=None, **localize_kwargs):
    """Confidence sets for K changepoints, one per isolation window.

    Each window (t_k, t_{k+1}] between consecutive midpoints is localized
    independently with the no-change candidate skipped; members, hulls and
    point estimates are re-indexed to global 1-based coordinates. Coverage
    per window is heuristic: it relies on the segmentation isolating
    exactly one true changepoint per window.
    """
    if segmentation is None:
        segmentation = kcpd_segment(data, n_changepoints, kernel_config)
    mids = segmentation.midpoints()
    results = []
    for k in range(1, segmentation.n_changepoints + 1):
        lo, hi = mids[k - 1], mids[k]
        if hi - lo < 4:
            raise IsolationError(
                f"window {k} spans ({lo}, {hi}]: too short to localize"
            )
        wdata = data.slice(lo + 1, hi)
        wfam = family.restrict(lo + 1, hi)
        pvals, local = localize(
            wdata, wfam, alpha, rng.substream("window", k),
            known_changepoint=True, **localize_kwargs,
        )
        members = [lo + t for t in local.members]
        results.append(
            WindowLocalization(
                window=(lo + 1, hi),
                kcpd_estimate=segmentation.estimates[k - 1],
                pvalues=pvals.values,
                conf_set=ConfidenceSet(
                    alpha=alpha,
                    members=members,
                    hull=(members[0], members[-1]) if members else None,
                    contains_n=False,
                    point_estimate=lo + local.point_estimate,
                ),
            )
        )
    return results
