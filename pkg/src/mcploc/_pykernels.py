"""Pure-NumPy implementations of the hot rank/KS kernels.

Fallback backend used when the compiled extension is unavailable (or when
MCPLOC_PURE_PYTHON is set). Must stay bitwise-identical to ``_ckernels``:
both backends evaluate the same IEEE expressions on the same exact integer
counts, which the test suite asserts.
"""

import numpy as np

BACKEND = "python"


def _check(values, thetas=None):
    v = np.ascontiguousarray(values, dtype=float)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("kernel inputs must be nonempty 1-d arrays")
    if thetas is not None:
        t = np.ascontiguousarray(thetas, dtype=float)
        if t.shape != v.shape:
            raise ValueError("values and thetas must have equal length")
        return v, t
    return v


def seq_ranks_forward(values, thetas):
    """p[r-1] = (#{j<=r: v_j > v_r} + theta_r * #{j<=r: v_j == v_r}) / r."""
    v, th = _check(values, thetas)
    n = v.shape[0]
    gt = v[:, None] > v[None, :]
    eq = v[:, None] == v[None, :]
    g = np.diagonal(np.cumsum(gt, axis=0)).astype(float)
    e = np.diagonal(np.cumsum(eq, axis=0)).astype(float)
    r = np.arange(1.0, n + 1.0)
    return (g + th * e) / r


def seq_ranks_backward(values, thetas):
    """p[r-1] = (#{j>=r: v_j > v_r} + theta_r * #{j>=r: v_j == v_r}) / (n-r+1)."""
    v, th = _check(values, thetas)
    n = v.shape[0]
    gt = v[:, None] > v[None, :]
    eq = v[:, None] == v[None, :]
    g = np.diagonal(np.cumsum(gt[::-1], axis=0)[::-1]).astype(float)
    e = np.diagonal(np.cumsum(eq[::-1], axis=0)[::-1]).astype(float)
    m = np.arange(float(n), 0.0, -1.0)
    return (g + th * e) / m


def prefix_ks(values):
    """out[t-1] = KS distance between the empirical CDF of values[:t] and Unif(0,1).

    For each member v of the prefix the candidate gaps are LE/t - v and
    v - LT/t (LE/LT = #{<=}/#{<} within the prefix); their maximum equals the
    sorted-scan KS formula exactly, ties included.
    """
    v = _check(values)
    n = v.shape[0]
    le = np.cumsum(v[:, None] <= v[None, :], axis=0).astype(float)
    lt = np.cumsum(v[:, None] < v[None, :], axis=0).astype(float)
    t = np.arange(1.0, n + 1.0)[:, None]
    cand = np.maximum(le / t - v[None, :], v[None, :] - lt / t)
    in_prefix = np.arange(n)[None, :] <= np.arange(n)[:, None]
    return np.max(np.where(in_prefix, cand, -np.inf), axis=1)


def suffix_ks(values):
    """out[i] = KS distance between the empirical CDF of values[i:] and Unif(0,1)."""
    v = _check(values)
    n = v.shape[0]
    le = np.cumsum((v[:, None] <= v[None, :])[::-1], axis=0)[::-1].astype(float)
    lt = np.cumsum((v[:, None] < v[None, :])[::-1], axis=0)[::-1].astype(float)
    m = np.arange(float(n), 0.0, -1.0)[:, None]
    cand = np.maximum(le / m - v[None, :], v[None, :] - lt / m)
    in_suffix = np.arange(n)[None, :] >= np.arange(n)[:, None]
    return np.max(np.where(in_suffix, cand, -np.inf), axis=1)
