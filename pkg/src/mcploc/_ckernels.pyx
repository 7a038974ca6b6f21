# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rank/KS kernels.

Same contracts as ``_pykernels``; counts are exact integers and the final
float expressions are written identically, so both backends return bitwise
equal arrays. Inner loops run without the GIL so null-table construction
can scale across threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libc.string cimport memmove

cnp.import_array()

BACKEND = "compiled"


cdef inline void _fenwick_add(long long* tree, Py_ssize_t size, Py_ssize_t i) noexcept nogil:
    i += 1
    while i <= size:
        tree[i] += 1
        i += i & (-i)


cdef inline long long _fenwick_le(long long* tree, Py_ssize_t i) noexcept nogil:
    # count of inserted ids <= i (0-based id); i < 0 -> 0
    cdef long long s = 0
    i += 1
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


def _compress(v):
    uniq = np.unique(np.asarray(v, dtype=float))
    ids = np.searchsorted(uniq, v).astype(np.int64)
    return ids, uniq.shape[0]


def seq_ranks_forward(values, thetas):
    """p[r-1] = (#{j<=r: v_j > v_r} + theta_r * #{j<=r: v_j == v_r}) / r."""
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(values, dtype=float)
    cdef cnp.ndarray[double, ndim=1] th = np.ascontiguousarray(thetas, dtype=float)
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        raise ValueError("kernel inputs must be nonempty 1-d arrays")
    if th.shape[0] != n:
        raise ValueError("values and thetas must have equal length")
    ids_arr, nuniq_obj = _compress(v)
    cdef Py_ssize_t nuniq = nuniq_obj
    cdef cnp.ndarray[long long, ndim=1] ids = ids_arr
    cdef cnp.ndarray[long long, ndim=1] tree = np.zeros(nuniq + 1, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=float)
    cdef Py_ssize_t r
    cdef long long le, ltc
    cdef double g, e
    with nogil:
        for r in range(n):
            _fenwick_add(&tree[0], nuniq, ids[r])
            le = _fenwick_le(&tree[0], ids[r])
            ltc = _fenwick_le(&tree[0], ids[r] - 1)
            g = <double> ((r + 1) - le)
            e = <double> (le - ltc)
            out[r] = (g + th[r] * e) / (<double> (r + 1))
    return out


def seq_ranks_backward(values, thetas):
    """p[r-1] = (#{j>=r: v_j > v_r} + theta_r * #{j>=r: v_j == v_r}) / (n-r+1)."""
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(values, dtype=float)
    cdef cnp.ndarray[double, ndim=1] th = np.ascontiguousarray(thetas, dtype=float)
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        raise ValueError("kernel inputs must be nonempty 1-d arrays")
    if th.shape[0] != n:
        raise ValueError("values and thetas must have equal length")
    ids_arr, nuniq_obj = _compress(v)
    cdef Py_ssize_t nuniq = nuniq_obj
    cdef cnp.ndarray[long long, ndim=1] ids = ids_arr
    cdef cnp.ndarray[long long, ndim=1] tree = np.zeros(nuniq + 1, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=float)
    cdef Py_ssize_t r
    cdef long long le, ltc, inserted = 0
    cdef double g, e
    with nogil:
        for r in range(n - 1, -1, -1):
            _fenwick_add(&tree[0], nuniq, ids[r])
            inserted += 1
            le = _fenwick_le(&tree[0], ids[r])
            ltc = _fenwick_le(&tree[0], ids[r] - 1)
            g = <double> (inserted - le)
            e = <double> (le - ltc)
            out[r] = (g + th[r] * e) / (<double> inserted)
    return out


cdef void _growing_ks(double* src, Py_ssize_t n, double* buf, double* out, bint reverse) noexcept nogil:
    # Insert points one at a time into a sorted buffer and rescan the KS
    # distance to Unif(0,1) after each insertion. O(n^2), tiny constant.
    cdef Py_ssize_t step, t, lo, hi, mid, i, idx
    cdef double x, td, best, dplus, dminus
    for step in range(n):
        idx = n - 1 - step if reverse else step
        x = src[idx]
        lo = 0
        hi = step
        while lo < hi:
            mid = (lo + hi) >> 1
            if buf[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        if step > lo:
            memmove(buf + lo + 1, buf + lo, (step - lo) * sizeof(double))
        buf[lo] = x
        t = step + 1
        td = <double> t
        best = -INFINITY
        for i in range(t):
            dplus = (<double> (i + 1)) / td - buf[i]
            dminus = buf[i] - (<double> i) / td
            if dplus > best:
                best = dplus
            if dminus > best:
                best = dminus
        out[idx] = best


def prefix_ks(values):
    """out[t-1] = KS distance between the empirical CDF of values[:t] and Unif(0,1)."""
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(values, dtype=float)
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        raise ValueError("kernel inputs must be nonempty 1-d arrays")
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(n, dtype=float)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=float)
    with nogil:
        _growing_ks(&v[0], n, &buf[0], &out[0], 0)
    return out


def suffix_ks(values):
    """out[i] = KS distance between the empirical CDF of values[i:] and Unif(0,1)."""
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(values, dtype=float)
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        raise ValueError("kernel inputs must be nonempty 1-d arrays")
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(n, dtype=float)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=float)
    with nogil:
        _growing_ks(&v[0], n, &buf[0], &out[0], 1)
    return out
