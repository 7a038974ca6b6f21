"""Score-function families.

A family carries a ``left`` and a ``right`` score function. ``left(x, bag,
ctx)`` scores a point against an unordered bag drawn from its own side of a
candidate split, optionally reading the ordered opposite-side context;
``right`` is the mirror image. Families must use the bag exchangeably. A
family is *adaptive* when either side reads its context argument; adaptive
families make the left/right halves of the downstream analysis dependent,
which restricts the admissible p-value combiners.

The engine talks to families through bound scorers (``family.bind(data)``),
which evaluate whole score vectors per rank step and may cache per-slice
work; the scalar ``left``/``right`` entry points define the semantics and
are what the generic fallback scorer calls.
"""

import csv
import math

import numpy as np

from .errors import ConfigurationError, ScoreError

__all__ = [
    "ScoreFamily",
    "DensityPair",
    "ClassProbTable",
    "gaussian_density_pair",
    "cauchy_density_pair",
    "oracle_lr_family",
    "kde_family",
    "classifier_family",
    "identity_family",
]

# Densities and KDE values are floored here before any division so that
# scores stay finite while preserving order.
DENSITY_FLOOR = 1e-300

_GAUSS_NORM = 1.0 / math.sqrt(2.0 * math.pi)


class DensityPair:
    """Pre-change and post-change densities, both vectorized callables."""

    def __init__(self, f0, f1):
        self.f0 = f0
        self.f1 = f1


def gaussian_density_pair(delta, scale=1.0):
    """N(-delta, scale^2) before the change, N(+delta, scale^2) after."""

    def f0(x):
        z = (np.asarray(x, dtype=float) + delta) / scale
        return _GAUSS_NORM / scale * np.exp(-0.5 * z * z)

    def f1(x):
        z = (np.asarray(x, dtype=float) - delta) / scale
        return _GAUSS_NORM / scale * np.exp(-0.5 * z * z)

    return DensityPair(f0, f1)


def cauchy_density_pair(delta, scale=1.0):
    """Cauchy(-delta, scale) before the change, Cauchy(+delta, scale) after."""

    def f0(x):
        z = np.asarray(x, dtype=float) + delta
        return scale / (math.pi * (scale * scale + z * z))

    def f1(x):
        z = np.asarray(x, dtype=float) - delta
        return scale / (math.pi * (scale * scale + z * z))

    return DensityPair(f0, f1)


class ClassProbTable:
    """Per-observation class probabilities, one row per observation.

    Rows must lie in the probability simplex within 1e-6. ``labels`` are the
    class names in column order; popularity ties break toward the smallest
    column index.
    """

    def __init__(self, probs, labels=None):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[1] < 2:
            raise ConfigurationError("probability table must be 2-d with at least 2 classes")
        if np.any(probs < -1e-6) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
            raise ConfigurationError("probability rows must sum to 1 within 1e-6")
        self.probs = probs
        self.labels = list(labels) if labels is not None else [str(i) for i in range(probs.shape[1])]
        if len(self.labels) != probs.shape[1]:
            raise ConfigurationError("label count does not match probability columns")

    @property
    def n_rows(self):
        return self.probs.shape[0]

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
        if not rows:
            raise ConfigurationError(f"empty probability file: {path}")
        labels = [c.strip() for c in rows[0]]
        try:
            probs = [[float(c) for c in row] for row in rows[1:]]
        except ValueError as exc:
            raise ConfigurationError(f"non-numeric probability in {path}: {exc}") from exc
        return cls(np.asarray(probs), labels)


def popular_class(probs):
    """Index of the most popular argmax class among the given rows.

    A row tied between several top classes counts toward each of them; ties
    in popularity break toward the smallest index. An empty set of rows also
    yields the smallest index.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim == 1:
        probs = probs[None, :]
    if probs.shape[0] == 0:
        return 0
    top = probs.max(axis=1, keepdims=True)
    counts = (probs == top).sum(axis=0)
    return int(np.argmax(counts))


class ScoreFamily:
    """Base class; see the module docstring for the contract."""

    name = "family"
    adaptive = False
    # pointwise: scores depend on the point alone, so whole-sequence score
    # vectors exist independently of the rank step.
    pointwise = False

    def left(self, x, bag, ctx):
        raise NotImplementedError

    def right(self, x, bag, ctx):
        raise NotImplementedError

    def bind(self, data):
        """A scorer with per-dataset caches; the engine's entry point."""
        return _LoopScorer(self, data)

    def restrict(self, lo, hi):
        """The family re-indexed to 1-based window lo..hi of the original data.

        Families that do not index observations by position are unaffected.
        """
        return self

    def __repr__(self):
        return f"<{type(self).__name__} name={self.name!r} adaptive={self.adaptive}>"


class BoundScorer:
    """Score vectors for one dataset.

    ``left_scores(r, t)`` returns the r scores of points 1..r against bag
    {X_1..X_r} and context (X_{t+1}..X_n); ``right_scores(r, t)`` returns
    the n-r+1 scores of points r..n against bag {X_{r+1}..X_n} and context
    (X_1..X_t). ``t=None`` means an empty context (the shared path for
    non-adaptive families, which ignore it by definition).
    """

    def __init__(self, family, data):
        self.family = family
        self.data = data

    def left_scores(self, r, t):
        raise NotImplementedError

    def right_scores(self, r, t):
        raise NotImplementedError

    def backward_window_scores(self, lo):
        """Scores of the trailing window (0-based start ``lo``) against the
        window itself as bag, with an empty context; feeds the backward
        rank pass. The full window must be the bag: ranks stay valid only
        if the scores are exchangeable under window permutations."""
        values = self.data.values
        n = self.data.n
        window = values[lo:, 0] if self.data.d == 1 else values[lo:]
        out = np.empty(n - lo)
        for j in range(lo, n):
            x = _point(values, j)
            out[j - lo] = self.family.left(x, window, window[:0])
        return out

    def pointwise_left(self):
        raise NotImplementedError

    def pointwise_right(self):
        raise NotImplementedError


def _point(values, i):
    row = values[i]
    return float(row[0]) if row.shape[0] == 1 else row


class _LoopScorer(BoundScorer):
    """Generic scorer: loops over the scalar left/right entry points."""

    def _args(self, i, lo, hi, clo, chi):
        values = self.data.values
        x = _point(values, i)
        bag = values[lo:hi, 0] if self.data.d == 1 else values[lo:hi]
        ctx = values[clo:chi, 0] if self.data.d == 1 else values[clo:chi]
        return x, bag, ctx

    def left_scores(self, r, t):
        n = self.data.n
        clo = t if t is not None else n
        out = np.empty(r)
        for j in range(r):
            x, bag, ctx = self._args(j, 0, r, clo, n)
            out[j] = self.family.left(x, bag, ctx)
        return out

    def right_scores(self, r, t):
        n = self.data.n
        chi = t if t is not None else 0
        out = np.empty(n - r + 1)
        for j in range(r - 1, n):
            x, bag, ctx = self._args(j, r, n, 0, chi)
            out[j - r + 1] = self.family.right(x, bag, ctx)
        return out


class _IdentityFamily(ScoreFamily):
    name = "identity"
    adaptive = False
    pointwise = True

    def left(self, x, bag, ctx):
        return float(x)

    def right(self, x, bag, ctx):
        # negated so both sides rank the same direction of change
        return -float(x)

    def bind(self, data):
        if data.d != 1:
            raise ConfigurationError("identity scores need scalar observations")
        return _PointwiseScorer(self, data, data.column(), -data.column())


def identity_family():
    """Raw-value scores: left(x) = x, right(x) = -x. Non-adaptive."""
    return _IdentityFamily()


class _PointwiseScorer(BoundScorer):
    def __init__(self, family, data, s_left, s_right):
        super().__init__(family, data)
        self.s_left = np.asarray(s_left, dtype=float)
        self.s_right = np.asarray(s_right, dtype=float)

    def pointwise_left(self):
        return self.s_left

    def pointwise_right(self):
        return self.s_right

    def left_scores(self, r, t):
        return self.s_left[:r]

    def right_scores(self, r, t):
        return self.s_right[r - 1 :]

    def backward_window_scores(self, lo):
        return self.s_left[lo:]


class _OracleLRFamily(ScoreFamily):
    name = "oracle-lr"
    adaptive = False
    pointwise = True

    def __init__(self, densities):
        self.densities = densities

    def _ratio(self, num, den, x):
        val = float(num(x)) / max(float(den(x)), DENSITY_FLOOR)
        if not math.isfinite(val):
            raise ScoreError(f"likelihood ratio not finite at x={x!r}")
        return val

    def left(self, x, bag, ctx):
        return self._ratio(self.densities.f1, self.densities.f0, x)

    def right(self, x, bag, ctx):
        return self._ratio(self.densities.f0, self.densities.f1, x)

    def bind(self, data):
        x = data.column() if data.d == 1 else data.values
        f0 = np.maximum(np.asarray(self.densities.f0(x), dtype=float), DENSITY_FLOOR)
        f1 = np.maximum(np.asarray(self.densities.f1(x), dtype=float), DENSITY_FLOOR)
        s_left = f1 / f0
        s_right = f0 / f1
        for name, arr in (("left", s_left), ("right", s_right)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise ScoreError(f"{name} likelihood ratio not finite", j=int(bad[0]) + 1)
        return _PointwiseScorer(self, data, s_left, s_right)


def oracle_lr_family(densities):
    """Likelihood-ratio scores from known densities.

    left(x) = f1(x)/f0(x) and right(x) = f0(x)/f1(x); bag and context are
    ignored, so the family is non-adaptive and left*right = 1 pointwise.
    """
    return _OracleLRFamily(densities)


def default_bandwidth(m):
    """m^(-1/5) for sample size m, with 0.1 for a single-point sample."""
    return 0.1 if m <= 1 else float(m) ** -0.2


def gaussian_kde_density(x, sample, bandwidth):
    """Gaussian-kernel density estimate of ``sample`` evaluated at x.

    The sample is sorted before summation so the result is bitwise
    invariant to permutations of the sample (exchangeable bag use).
    """
    sample = np.sort(np.asarray(sample, dtype=float))
    if sample.size == 0:
        # no information: flat reference density, keeps ratios one-sided
        return np.ones_like(np.asarray(x, dtype=float))
    z = (np.asarray(x, dtype=float)[..., None] - sample) / bandwidth
    return np.exp(-0.5 * z * z).mean(axis=-1) * (_GAUSS_NORM / bandwidth)


class _KDEFamily(ScoreFamily):
    name = "kde"
    adaptive = True

    def __init__(self, bandwidth_rule=None):
        self.bandwidth_rule = bandwidth_rule or default_bandwidth

    def _dens(self, x, sample):
        sample = np.asarray(sample, dtype=float)
        return gaussian_kde_density(x, sample, self.bandwidth_rule(sample.size))

    def left(self, x, bag, ctx):
        num = float(self._dens(x, ctx))
        den = max(float(self._dens(x, bag)), DENSITY_FLOOR)
        return num / den

    def right(self, x, bag, ctx):
        num = float(self._dens(x, ctx))
        den = max(float(self._dens(x, bag)), DENSITY_FLOOR)
        return num / den

    def bind(self, data):
        if data.d != 1:
            raise ConfigurationError("the KDE family supports scalar observations only")
        return _KDEScorer(self, data)


def kde_family(bandwidth_rule=None):
    """Estimated likelihood-ratio scores from Gaussian-kernel densities.

    Each side scores x by (context-fit density / bag-fit density), every
    estimator using the bandwidth rule on its own sample size (default:
    m^(-1/5), 0.1 for a single point). Adaptive, scalar data only.
    """
    return _KDEFamily(bandwidth_rule)


class _KDEScorer(BoundScorer):
    """Caches one evaluated density vector per contiguous sample slice.

    Distinct rank steps reuse the same bag/context estimators, which is
    sound: p-value validity only needs the bag to be used exchangeably.
    """

    def __init__(self, family, data):
        super().__init__(family, data)
        self.col = data.column()
        self._cache = {}

    def _dens_slice(self, lo, hi):
        key = (lo, hi)
        out = self._cache.get(key)
        if out is None:
            out = self.family._dens(self.col, self.col[lo:hi])
            self._cache[key] = out
        return out

    def left_scores(self, r, t):
        n = self.data.n
        num = self._dens_slice(t if t is not None else n, n)
        den = np.maximum(self._dens_slice(0, r), DENSITY_FLOOR)
        return num[:r] / den[:r]

    def right_scores(self, r, t):
        num = self._dens_slice(0, t if t is not None else 0)
        den = np.maximum(self._dens_slice(r, self.data.n), DENSITY_FLOOR)
        return num[r - 1 :] / den[r - 1 :]


class _ClassifierFamily(ScoreFamily):
    name = "classifier"
    adaptive = True

    def __init__(self, table, offset=0):
        self.table = table
        self.offset = offset  # 0-based row offset for window restriction

    def left(self, x, bag, ctx):
        # standalone calls score probability rows directly
        x = np.asarray(x, dtype=float)
        num = x[popular_class(bag)]
        den = max(x[popular_class(ctx)], DENSITY_FLOOR)
        return float(num / den)

    right = left

    def restrict(self, lo, hi):
        return _ClassifierFamily(self.table, offset=self.offset + lo - 1)

    def bind(self, data):
        if self.offset + data.n > self.table.n_rows:
            raise ScoreError(
                f"probability table has {self.table.n_rows} rows, needs "
                f"{self.offset + data.n}"
            )
        return _ClassifierScorer(self, data)


def classifier_family(probs):
    """Classifier-probability likelihood-ratio scores.

    A point's score is the probability of its own side's most popular
    predicted class over the probability of the opposite side's, rows taken
    positionally from ``probs``. Adaptive.
    """
    return _ClassifierFamily(probs)


class _ClassifierScorer(BoundScorer):
    def __init__(self, family, data):
        super().__init__(family, data)
        off = family.offset
        p = family.table.probs[off : off + data.n]
        self.p = p
        top = p.max(axis=1, keepdims=True)
        ind = (p == top).astype(np.int64)
        self.prefix_counts = np.cumsum(ind, axis=0)
        self.suffix_counts = np.cumsum(ind[::-1], axis=0)[::-1]

    def _popular_prefix(self, k):
        # most popular class of rows 0..k-1 (empty -> class 0)
        if k == 0:
            return 0
        return int(np.argmax(self.prefix_counts[k - 1]))

    def _popular_suffix(self, k):
        # most popular class of rows k..n-1 (empty -> class 0)
        if k >= self.data.n:
            return 0
        return int(np.argmax(self.suffix_counts[k]))

    def left_scores(self, r, t):
        lab_bag = self._popular_prefix(r)
        lab_ctx = self._popular_suffix(t if t is not None else self.data.n)
        den = np.maximum(self.p[:r, lab_ctx], DENSITY_FLOOR)
        return self.p[:r, lab_bag] / den

    def right_scores(self, r, t):
        lab_bag = self._popular_suffix(r)
        lab_ctx = self._popular_prefix(t if t is not None else 0)
        den = np.maximum(self.p[r - 1 :, lab_ctx], DENSITY_FLOOR)
        return self.p[r - 1 :, lab_bag] / den

    def backward_window_scores(self, lo):
        lab_bag = self._popular_suffix(lo)
        lab_ctx = 0  # empty context defaults to the smallest label
        den = np.maximum(self.p[lo:, lab_ctx], DENSITY_FLOOR)
        return self.p[lo:, lab_bag] / den
