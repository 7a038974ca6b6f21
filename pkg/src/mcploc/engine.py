"""Matrix of conformal p-values, discrepancy trajectories and the backward
rank pass.

Column t of the matrix holds, for each point, the randomized rank of its
score among its own side of the candidate split at t: rows r <= t rank
point r within the growing left prefix (bag {X_1..X_r}), rows r > t rank
point r within the shrinking right suffix (bag {X_{r+1}..X_n}, target
included in the rank but not the bag). Left blocks have r comparisons and
right blocks n-r+1; the asymmetry is deliberate and matched by the tests.

For non-adaptive families a column's entries do not depend on t, so the two
rank sequences are computed once and shared across columns; the theta draw
for step (side, r) is keyed identically on both paths, making the shared
and naive computations bitwise equal.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Dataset, ks_uniform_distance, randomized_rank
from .errors import ScoreError

__all__ = [
    "PValueMatrix",
    "DiscrepancyScores",
    "BackwardPValues",
    "compute_matrix",
    "discrepancies",
    "backward_pvalues",
    "column_discrepancies",
    "save_matrix_csv",
    "save_matrix_binary",
    "load_matrix_binary",
]

MATRIX_MAGIC = b"MCP1"


@dataclass
class PValueMatrix:
    """Per-anomaly p-values; entry [r-1, t-1] is p_r^(t), all in [0, 1]."""

    values: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    def left_block(self, t):
        """Entries for rows 1..t of column t (1-based)."""
        return self.values[:t, t - 1]

    def right_block(self, t):
        """Entries for rows t+1..n of column t (1-based); empty at t = n."""
        return self.values[t:, t - 1]


@dataclass
class DiscrepancyScores:
    """Donsker-normalized KS discrepancies per candidate split.

    w0[t-1] = sqrt(t) * KS(left block of column t, Unif); w1 likewise for
    the right block with sqrt(n-t), and is NaN at t = n where that block is
    empty.
    """

    w0: np.ndarray
    w1: np.ndarray

    @property
    def n(self):
        return self.w0.shape[0]


@dataclass
class BackwardPValues:
    """Sequential ranks computed right-to-left; entry t-1 ranks X_{n-t+1}
    within the trailing window of t observations."""

    values: np.ndarray


def _rank_step_thetas(data, rng):
    n = data.n
    return rng.uniforms(n, "rank", "left"), rng.uniforms(n, "rank", "right")


def compute_matrix(data, family, rng):
    """Fill the full n-by-n matrix of conformal p-values.

    Theta draws come from the "rank"/"left" and "rank"/"right" substreams,
    one per rank step r, shared across candidate splits.
    """
    n = data.n
    th_left, th_right = _rank_step_thetas(data, rng)
    scorer = family.bind(data)
    if not family.adaptive:
        p_fwd, p_bwd = _shared_rank_sequences(scorer, th_left, th_right, family)
        rows = np.arange(n)[:, None]
        cols = np.arange(n)[None, :]
        values = np.where(rows <= cols, p_fwd[:, None], p_bwd[:, None])
        return PValueMatrix(values)

    values = np.empty((n, n))
    for t in range(1, n + 1):
        for r in range(1, t + 1):
            sc = _scores_at(scorer, "left", r, t)
            values[r - 1, t - 1] = randomized_rank(sc, r, th_left[r - 1])
        for r in range(n, t, -1):
            sc = _scores_at(scorer, "right", r, t)
            values[r - 1, t - 1] = randomized_rank(sc, 1, th_right[r - 1])
    return PValueMatrix(values)


def _scores_at(scorer, side, r, t):
    try:
        return scorer.left_scores(r, t) if side == "left" else scorer.right_scores(r, t)
    except ScoreError as exc:
        raise ScoreError(str(exc), t=t, r=r) from exc


def _shared_rank_sequences(scorer, th_left, th_right, family):
    if family.pointwise:
        p_fwd = kernels.seq_ranks_forward(scorer.pointwise_left(), th_left)
        p_bwd = kernels.seq_ranks_backward(scorer.pointwise_right(), th_right)
        return p_fwd, p_bwd
    n = scorer.data.n
    p_fwd = np.empty(n)
    p_bwd = np.empty(n)
    for r in range(1, n + 1):
        p_fwd[r - 1] = randomized_rank(_scores_at(scorer, "left", r, None), r, th_left[r - 1])
        p_bwd[r - 1] = randomized_rank(_scores_at(scorer, "right", r, None), 1, th_right[r - 1])
    return p_fwd, p_bwd


def discrepancies(matrix):
    """KS distance of each column's blocks to uniform, Donsker-normalized."""
    n = matrix.n
    w0 = np.empty(n)
    w1 = np.empty(n)
    for t in range(1, n + 1):
        w0[t - 1] = np.sqrt(t) * ks_uniform_distance(matrix.left_block(t))
        if t < n:
            w1[t - 1] = np.sqrt(n - t) * ks_uniform_distance(matrix.right_block(t))
    w1[n - 1] = np.nan
    return DiscrepancyScores(w0, w1)


def column_discrepancies(data, family, t, th_left, th_right):
    """(W_t^(0), W_t^(1)) of a single column, computed from scratch.

    Used by the permutation test, which rescores resampled data per
    candidate split; ``th_left``/``th_right`` are that column's rank
    thetas (lengths t and n-t). W^(1) is NaN at t = n.
    """
    n = data.n
    scorer = family.bind(data)
    if family.pointwise:
        p_left = kernels.seq_ranks_forward(scorer.pointwise_left()[:t], th_left)
        w0 = float(np.sqrt(t) * kernels.prefix_ks(p_left)[t - 1])
        if t == n:
            return w0, np.nan
        p_right = kernels.seq_ranks_backward(scorer.pointwise_right()[t:], th_right)
        w1 = float(np.sqrt(n - t) * kernels.suffix_ks(p_right)[0])
        return w0, w1
    p_left = np.empty(t)
    for r in range(1, t + 1):
        p_left[r - 1] = randomized_rank(_scores_at(scorer, "left", r, t), r, th_left[r - 1])
    w0 = float(np.sqrt(t) * ks_uniform_distance(p_left))
    if t == n:
        return w0, np.nan
    p_right = np.empty(n - t)
    for r in range(n, t, -1):
        p_right[r - t - 1] = randomized_rank(
            _scores_at(scorer, "right", r, t), 1, th_right[r - t - 1]
        )
    w1 = float(np.sqrt(n - t) * ks_uniform_distance(p_right))
    return w0, w1


def backward_pvalues(data, family, rng):
    """Sequential ranks of the data scanned right-to-left.

    The window of the t-th step is the last t observations and the target
    is the window's left endpoint X_{n-t+1}; scores come from the family's
    left function with the window as bag and an empty context. Feeds the
    t = n candidate only.
    """
    n = data.n
    th = rng.uniforms(n, "rank", "backward")
    scorer = family.bind(data)
    if family.pointwise:
        s = scorer.pointwise_left()
        q = kernels.seq_ranks_backward(s, th[::-1].copy())
        return BackwardPValues(q[::-1].copy())
    out = np.empty(n)
    for t in range(1, n + 1):
        sc = scorer.backward_window_scores(n - t)
        out[t - 1] = randomized_rank(sc, 1, th[t - 1])
    return BackwardPValues(out)


def _fmt(x):
    return "" if np.isnan(x) else f"{x:.17g}"


def save_matrix_csv(matrix, path):
    """n rows by n columns, one row per rank step r; absent entries empty."""
    with open(path, "w") as fh:
        for row in matrix.values:
            fh.write(",".join(_fmt(x) for x in row))
            fh.write("\n")


def save_matrix_binary(matrix, path):
    """Compact dump: magic "MCP1", little-endian u32 n, then row-major
    64-bit floats with NaN marking absent entries."""
    n = matrix.n
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<I", n))
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def load_matrix_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MATRIX_MAGIC:
            raise ValueError(f"not a p-value matrix dump (magic {magic!r})")
        (n,) = struct.unpack("<I", fh.read(4))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.shape[0] != n * n:
        raise ValueError(f"truncated matrix dump: expected {n * n} entries, got {data.shape[0]}")
    return PValueMatrix(data.reshape(n, n).astype(float))
