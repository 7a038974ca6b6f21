"""Hypothesis-testing backends: map discrepancy scores to left/right
p-values.

The empirical test calibrates against B simulated i.i.d.-Unif(0,1) datasets
run through the same rank/KS pipeline (raw values as scores); the resulting
null table depends only on n, so it can be cached and reused across
datasets. The asymptotic test uses the limiting distribution of the
normalized KS statistic, valid when both block sizes are large. The
permutation test recomputes each column's statistics on data with the two
segments independently permuted.
"""

import concurrent.futures
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import engine, kernels
from .core import Dataset, kolmogorov_cdf, ks_uniform_distance
from .errors import ConfigurationError

__all__ = [
    "NullQuantileTable",
    "SidePValues",
    "build_null_table",
    "empirical_test",
    "asymptotic_test",
    "permutation_test",
    "hybrid_test",
    "backward_test_pvalue",
    "save_null_table",
    "load_null_table",
    "null_table_path",
    "get_or_build_null_table",
]

NULL_TABLE_MAGIC = b"MCPNULL1"
DEFAULT_B = 1000
DEFAULT_HYBRID_THRESHOLD = 100


@dataclass
class NullQuantileTable:
    """B simulated (W^(0), W^(1)) trajectories under i.i.d. uniform data.

    Arrays have shape (B, n); w1[:, n-1] is NaN. Distribution-free under
    each null, hence reusable across datasets of the same length.
    """

    n: int
    B: int
    w0: np.ndarray
    w1: np.ndarray
    fingerprint: int


@dataclass
class SidePValues:
    """Per-candidate left/right p-values; right is NaN at t = n, where the
    backward pass takes over."""

    left: np.ndarray
    right: np.ndarray


def _null_trajectory(n, rng, b):
    # one substream per simulated dataset: data, left thetas, right thetas
    g = rng.generator("null", b)
    u = g.random(n)
    th_l = g.random(n)
    th_r = g.random(n)
    w0, w1, _, _ = kernels.w_trajectories(u, -u, th_l, th_r)
    return w0, w1


def build_null_table(n, B, rng, workers=1):
    """Simulate B uniform datasets through the rank/KS pipeline.

    Equivalent to running the p-value matrix and discrepancy computation
    with raw-value scores on each simulated dataset (the test suite holds
    the two paths equal). Deterministic in (rng, n, B) regardless of
    ``workers``.
    """
    if n < 2 or B < 1:
        raise ConfigurationError(f"need n >= 2 and B >= 1, got n={n}, B={B}")
    w0 = np.empty((B, n))
    w1 = np.empty((B, n))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for b, (row0, row1) in enumerate(pool.map(lambda b: _null_trajectory(n, rng, b), range(B))):
                w0[b] = row0
                w1[b] = row1
    else:
        for b in range(B):
            w0[b], w1[b] = _null_trajectory(n, rng, b)
    return NullQuantileTable(n=n, B=B, w0=w0, w1=w1, fingerprint=rng.fingerprint())


def _compare_pvalue(observed, simulated, theta):
    """(theta + #{sim > obs} + theta * #{sim == obs}) / (B + 1)."""
    gt = np.count_nonzero(simulated > observed)
    eq = np.count_nonzero(simulated == observed)
    return (theta + (gt + theta * eq)) / (simulated.shape[0] + 1.0)


def _compare_pvalues_columns(observed, simulated, thetas):
    """Column-wise version of :func:`_compare_pvalue` (same expression)."""
    gt = (simulated > observed[None, :]).sum(axis=0).astype(float)
    eq = (simulated == observed[None, :]).sum(axis=0).astype(float)
    return (thetas + (gt + thetas * eq)) / (simulated.shape[0] + 1.0)


def empirical_test(w, table, rng):
    """Randomized rank of each observed W among the B simulated ones.

    One theta per (candidate, side), drawn from the "test" substreams.
    Outputs are exact p-values: uniform under the corresponding null.
    """
    n = w.n
    if table.n != n:
        raise ConfigurationError(f"null table built for n={table.n}, data has n={n}")
    th0 = rng.uniforms(n, "test", "left")
    th1 = rng.uniforms(n, "test", "right")
    left = _compare_pvalues_columns(w.w0, table.w0, th0)
    right = np.empty(n)
    right[: n - 1] = _compare_pvalues_columns(
        w.w1[: n - 1], table.w1[:, : n - 1], th1[: n - 1]
    )
    right[n - 1] = np.nan
    return SidePValues(left=left, right=right)


def _asym_pvalue(wval, fast):
    if np.isnan(wval):
        return np.nan
    if fast:
        return min(1.0, 2.0 * np.exp(-2.0 * wval * wval))
    return 1.0 - kolmogorov_cdf(wval)


def asymptotic_test(w, fast=False):
    """p = 1 - F(W) under the limiting distribution of the normalized KS
    statistic; ``fast=True`` uses the one-term tail bound 2*exp(-2 W^2)."""
    left = np.array([_asym_pvalue(v, fast) for v in w.w0])
    right = np.array([_asym_pvalue(v, fast) for v in w.w1])
    return SidePValues(left=left, right=right)


def hybrid_test(w, table, rng, threshold=DEFAULT_HYBRID_THRESHOLD, fast=False):
    """Empirical test where either block is small, asymptotic elsewhere.

    Candidate t uses the empirical test when min(t, n-t) < threshold (the
    t = n candidate always does).
    """
    emp = empirical_test(w, table, rng)
    asym = asymptotic_test(w, fast=fast)
    n = w.n
    t = np.arange(1, n + 1)
    small = np.minimum(t, n - t) < threshold
    return SidePValues(
        left=np.where(small, emp.left, asym.left),
        right=np.where(small, emp.right, asym.right),
    )


def permutation_test(data, family, w, B, rng, mode="permute", workers=1):
    """Calibrate W against resampled data.

    ``mode="uniform"`` draws fresh Unif(0,1) datasets, which is exactly the
    empirical test (identical code path, so matched streams give equal
    output). ``mode="permute"`` permutes the segments before and after each
    candidate split independently and recomputes that column's statistics
    through the full scoring pipeline.
    """
    n = data.n
    if mode == "uniform":
        table = build_null_table(n, B, rng, workers=workers)
        return empirical_test(w, table, rng)
    if mode != "permute":
        raise ConfigurationError(f"unknown permutation mode {mode!r}")

    sim0 = np.empty((B, n))
    sim1 = np.empty((B, n))

    def one(b):
        row0 = np.empty(n)
        row1 = np.empty(n)
        for t in range(1, n + 1):
            # one substream per (b, t): both segment permutations, then
            # the column's rank thetas
            g = rng.generator("perm", b, t)
            perm_data = _segment_permuted(data, t, g)
            th_l = g.random(t)
            th_r = g.random(n - t)
            row0[t - 1], row1[t - 1] = engine.column_discrepancies(
                perm_data, family, t, th_l, th_r
            )
        return row0, row1

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for b, (row0, row1) in enumerate(pool.map(one, range(B))):
                sim0[b] = row0
                sim1[b] = row1
    else:
        for b in range(B):
            sim0[b], sim1[b] = one(b)

    th0 = rng.uniforms(n, "perm-test", "left")
    th1 = rng.uniforms(n, "perm-test", "right")
    left = _compare_pvalues_columns(w.w0, sim0, th0)
    right = np.empty(n)
    right[: n - 1] = _compare_pvalues_columns(
        w.w1[: n - 1], sim1[:, : n - 1], th1[: n - 1]
    )
    right[n - 1] = np.nan
    return SidePValues(left=left, right=right)


def _segment_permuted(data, t, gen):
    n = data.n
    values = data.values.copy()
    values[:t] = values[:t][gen.permutation(t)]
    if t < n:
        values[t:] = values[t:][gen.permutation(n - t)]
    return Dataset(values)


def backward_test_pvalue(w_bar, method, *, table=None, rng=None, data=None, family=None, B=None, fast=False):
    """Map the backward discrepancy W-bar = sqrt(n) * KS(backward ranks) to
    a p-value through the configured backend.

    Under full exchangeability the backward ranks are i.i.d. uniform, so
    W-bar shares the null distribution of W_n^(0); the empirical and hybrid
    backends therefore calibrate against the table's t = n column.
    """
    if method in ("empirical", "hybrid"):
        theta = rng.uniform("test", "backward")
        return float(_compare_pvalue(w_bar, table.w0[:, table.n - 1], theta))
    if method == "asymptotic":
        return float(_asym_pvalue(w_bar, fast))
    if method == "permutation":
        n = data.n
        sims = np.empty(B)
        for b in range(B):
            g = rng.generator("perm-backward", b)
            perm_data = _segment_permuted(data, n, g)
            back = engine.backward_pvalues(perm_data, family, rng.substream("perm-backward", b))
            sims[b] = np.sqrt(n) * ks_uniform_distance(back.values)
        theta = rng.uniform("perm-test", "backward")
        return float(_compare_pvalue(w_bar, sims, theta))
    raise ConfigurationError(f"unknown test method {method!r}")


def save_null_table(table, path):
    """Binary cache: magic "MCPNULL1", little-endian u32 n, u32 B, u64
    stream fingerprint, then the W^(0) rows and the W^(1) rows as 64-bit
    floats."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(NULL_TABLE_MAGIC)
        fh.write(struct.pack("<IIQ", table.n, table.B, table.fingerprint))
        fh.write(np.ascontiguousarray(table.w0, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(table.w1, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_null_table(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != NULL_TABLE_MAGIC:
            raise ConfigurationError(
                f"{path} is not a null-table cache (magic {magic!r}); "
                "delete it or rebuild with the null-table command"
            )
        n, B, fingerprint = struct.unpack("<IIQ", fh.read(16))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    if payload.shape[0] != 2 * B * n:
        raise ConfigurationError(
            f"{path} is truncated: expected {2 * B * n} floats, got {payload.shape[0]}; "
            "delete it or rebuild with the null-table command"
        )
    w0 = payload[: B * n].reshape(B, n).astype(float)
    w1 = payload[B * n :].reshape(B, n).astype(float)
    return NullQuantileTable(n=n, B=B, w0=w0, w1=w1, fingerprint=fingerprint)


def null_table_path(cache_dir, n, B, fingerprint):
    return os.path.join(cache_dir, f"mcpnull_n{n}_B{B}_{fingerprint:016x}.bin")


def get_or_build_null_table(n, B, rng, cache_dir=None, workers=1):
    """Build the table, or reuse the disk-cached copy keyed by
    (n, B, stream fingerprint, format version)."""
    if cache_dir is None:
        cache_dir = os.environ.get("MCP_CACHE_DIR") or None
    if cache_dir is None:
        return build_null_table(n, B, rng, workers=workers)
    os.makedirs(cache_dir, exist_ok=True)
    path = null_table_path(cache_dir, n, B, rng.fingerprint())
    if os.path.exists(path):
        return load_null_table(path)
    table = build_null_table(n, B, rng, workers=workers)
    save_null_table(table, path)
    return table
