"""Foundational primitives: datasets, seeded substreams, randomized ranks,
Kolmogorov-Smirnov distance to uniform and the Kolmogorov limiting CDF.

Everything here is a pure function of its inputs (substreams included:
identical keys always reproduce identical draws), so all of it is safe to
call from concurrent workers.
"""

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "RandomStream",
    "randomized_rank",
    "ks_uniform_distance",
    "kolmogorov_cdf",
    "randomized_pit",
]


@dataclass(frozen=True)
class Dataset:
    """An ordered sequence of observations, shape (n, d) with n >= 2.

    Scalar data is stored with d = 1. Indices are 1-based in every
    user-facing input and output; internally arrays are 0-based.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"observations must be scalars or d-vectors, got ndim={arr.ndim}")
        if arr.shape[0] < 2:
            raise ValueError(f"a dataset needs at least 2 observations, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def column(self):
        """The data as a 1-d array; only valid for scalar datasets."""
        if self.d != 1:
            raise ValueError(f"scalar view requested for d={self.d} data")
        return self.values[:, 0]

    def slice(self, lo, hi):
        """Sub-dataset of 1-based positions lo..hi inclusive."""
        if not (1 <= lo < hi <= self.n):
            raise ValueError(f"invalid slice [{lo}, {hi}] for n={self.n}")
        return Dataset(self.values[lo - 1 : hi])


def _key_bytes(key):
    out = []
    for part in key:
        if isinstance(part, (str, bytes)):
            b = part.encode() if isinstance(part, str) else part
            out.append(b"s" + struct.pack("<I", len(b)) + b)
        elif isinstance(part, (int, np.integer)):
            out.append(b"i" + struct.pack("<q", int(part)))
        else:
            raise TypeError(f"substream keys must be str or int, got {type(part)!r}")
    return b"".join(out)


class RandomStream:
    """Keyed, reproducible randomness.

    A stream is identified by a 64-bit root seed plus a path of labels
    (e.g. ``("null", 3, "data")``). Identical (seed, path) pairs yield
    identical draw sequences; distinct paths are independent substreams.
    Draw *i* of a substream does not depend on when or in which order other
    substreams are consumed, which keeps results independent of scheduling.
    """

    def __init__(self, seed, _path=()):
        self.seed = int(seed)
        self.path = tuple(_path)

    def substream(self, *key):
        return RandomStream(self.seed, self.path + tuple(key))

    def _material(self):
        h = hashlib.sha256()
        h.update(struct.pack("<q", self.seed))
        h.update(_key_bytes(self.path))
        return h.digest()

    def generator(self, *key):
        """A fresh numpy Generator for this stream (or a keyed substream)."""
        if key:
            return self.substream(*key).generator()
        return np.random.Generator(np.random.PCG64(int.from_bytes(self._material(), "little")))

    def uniform(self, *key):
        """One Unif(0,1) draw from the keyed substream."""
        return float(self.generator(*key).random())

    def uniforms(self, m, *key):
        """A vector of m Unif(0,1) draws from the keyed substream."""
        return self.generator(*key).random(m)

    def fingerprint(self):
        """Stable 64-bit identity of this stream, used in cache keys."""
        return int.from_bytes(self._material()[:8], "little")

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path={self.path!r})"


def randomized_rank(scores, target_index, theta):
    """Randomized normalized rank of one score within a list.

    Returns ``(#{j : scores[j] > target} + theta * #{j : scores[j] == target}) / m``
    where the tie count includes the target itself and ``target_index`` is
    1-based. The result lies on the grid ``{k/m + theta*j/m}`` inside [0, 1],
    and is Unif(0,1) when the scores are exchangeable and theta ~ Unif(0,1).
    """
    arr = np.asarray(scores, dtype=float)
    m = arr.shape[0]
    if m == 0:
        raise ValueError("cannot rank within an empty score list")
    if not 1 <= target_index <= m:
        raise ValueError(f"target_index {target_index} outside [1, {m}]")
    target = arr[target_index - 1]
    gt = float(np.count_nonzero(arr > target))
    eq = float(np.count_nonzero(arr == target))
    return (gt + theta * eq) / m


def ks_uniform_distance(pvals):
    """Kolmogorov-Smirnov distance between the empirical CDF of ``pvals``
    and the Unif(0,1) CDF.

    Computed exactly over the sorted values v_(1) <= ... <= v_(m) as
    ``max_i max(i/m - v_(i), v_(i) - (i-1)/m)``; ties need no special
    handling. Result is in [0, 1] for inputs in [0, 1].
    """
    arr = np.sort(np.asarray(pvals, dtype=float))
    m = arr.shape[0]
    if m == 0:
        raise ValueError("cannot compute a KS distance of an empty sample")
    grid = np.arange(1.0, m + 1.0)
    d_plus = grid / m - arr
    d_minus = arr - (grid - 1.0) / m
    return float(np.max(np.maximum(d_plus, d_minus)))


def kolmogorov_cdf(z):
    """CDF of the supremum of the absolute Brownian bridge.

    Evaluates ``1 - 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 z^2)``, truncating
    once the next term falls below 1e-12, and clamps to [0, 1]. Results
    below 1e-10 collapse to exactly 0: for small z the alternating series
    leaves ~1e-12 of round-off where the true mass is < 1e-17, and the snap
    keeps the function monotone.
    """
    if z < 0:
        raise ValueError(f"the distribution is supported on z >= 0, got {z}")
    if z == 0.0:
        return 0.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * z * z)
        if term < 1e-12:
            break
        total += sign * term
        sign = -sign
        k += 1
    out = 1.0 - 2.0 * total
    out = min(1.0, max(0.0, out))
    return 0.0 if out < 1e-10 else out


def randomized_pit(x, sample, v):
    """Randomized probability integral transform through the empirical CDF.

    Returns ``F^-(x) + v * (F(x) - F^-(x))`` where F is the empirical CDF
    of ``sample`` and F^- its left limit at x. When x is itself a draw from
    the empirical distribution of ``sample`` and v ~ Unif(0,1), the output
    is exactly Unif(0,1), ties or not.
    """
    arr = np.asarray(sample, dtype=float)
    m = arr.shape[0]
    if m == 0:
        raise ValueError("cannot transform through an empty sample")
    lt = float(np.count_nonzero(arr < x))
    le = float(np.count_nonzero(arr <= x))
    return (lt + v * (le - lt)) / m
