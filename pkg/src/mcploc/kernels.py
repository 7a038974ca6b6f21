"""Backend selection for the hot rank/KS kernels.

The compiled extension is preferred; a NumPy fallback with identical
semantics (bitwise, not just numerical) is used when the extension is
missing or when the MCPLOC_PURE_PYTHON environment variable is set to a
non-empty value other than "0".
"""

import os

import numpy as np

if os.environ.get("MCPLOC_PURE_PYTHON", "0") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        from . import _pykernels as _impl

seq_ranks_forward = _impl.seq_ranks_forward
seq_ranks_backward = _impl.seq_ranks_backward
prefix_ks = _impl.prefix_ks
suffix_ks = _impl.suffix_ks


def backend():
    """Name of the active kernel backend: "compiled" or "python"."""
    return _impl.BACKEND


def w_trajectories(left_scores, right_scores, theta_left, theta_right):
    """Sequential ranks plus Donsker-normalized KS trajectories in one pass.

    Returns ``(w0, w1, p_fwd, p_bwd)`` where for each candidate split t
    (1-based) ``w0[t-1] = sqrt(t) * KS(p_fwd[:t], U)`` and
    ``w1[t-1] = sqrt(n-t) * KS(p_bwd[t:], U)``; w1 is NaN at t = n where the
    right block is empty.
    """
    left_scores = np.ascontiguousarray(left_scores, dtype=float)
    n = left_scores.shape[0]
    p_fwd = seq_ranks_forward(left_scores, theta_left)
    p_bwd = seq_ranks_backward(right_scores, theta_right)
    t = np.arange(1.0, n + 1.0)
    w0 = np.sqrt(t) * prefix_ks(p_fwd)
    w1 = np.empty(n)
    if n > 1:
        w1[: n - 1] = np.sqrt(n - t[: n - 1]) * suffix_ks(p_bwd)[1:]
    w1[n - 1] = np.nan
    return w0, w1, p_fwd, p_bwd
