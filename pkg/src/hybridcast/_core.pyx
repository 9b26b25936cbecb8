# cython: language_level=3
"""Compiled kernels for histogram boosting.

Each function mirrors one in ``_pycore`` and must produce bit-identical
results: accumulation always runs in ascending sample order per cell and the
gain expression is evaluated with the same operation order.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, parallel
from libc.math cimport INFINITY

cnp.import_array()


def _buffers(out, Py_ssize_t rows, Py_ssize_t cols, bint zero=True):
    if out is None:
        return (np.zeros((rows, cols), dtype=np.float64),
                np.zeros((rows, cols), dtype=np.float64),
                np.zeros((rows, cols), dtype=np.int64))
    if zero:
        for arr in out:
            arr.fill(0)
    return out


def build_histograms(const int[:, ::1] binned, const long long[::1] sample_indices,
                     const double[::1] wg, const double[::1] wh,
                     int n_bins, int n_threads=1, out=None):
    """Per (column, bin) sums of weighted gradients, hessians and counts.

    ``binned`` is column-major over samples: shape [n_columns, n_samples].
    Columns are independent, so they are distributed over threads; each
    column is still accumulated in ascending sample order. ``out`` may hold
    three reusable [n_columns, n_bins] buffers.
    """
    cdef Py_ssize_t n_cols = binned.shape[0]
    cdef Py_ssize_t m = sample_indices.shape[0]
    grad_np, hess_np, count_np = _buffers(out, n_cols, n_bins)
    cdef double[:, ::1] grad = grad_np
    cdef double[:, ::1] hess = hess_np
    cdef long long[:, ::1] count = count_np
    cdef Py_ssize_t c, k
    cdef long long i
    cdef int b
    if n_threads < 1:
        n_threads = 1
    with nogil, parallel(num_threads=n_threads):
        for c in prange(n_cols, schedule="static"):
            for k in range(m):
                i = sample_indices[k]
                b = binned[c, i]
                grad[c, b] += wg[i]
                hess[c, b] += wh[i]
                count[c, b] += 1
    return grad_np, hess_np, count_np


def unpack_histograms(const double[:, ::1] grad, const double[:, ::1] hess,
                      const long long[:, ::1] count, const int[::1] feat_col,
                      const int[::1] feat_off, const int[::1] n_bins, int width,
                      double g_total, double h_total, long long n_total, out=None):
    """Per-feature histograms from bundled columns.

    Bin ``b >= 1`` of feature ``f`` lives at ``[feat_col[f], feat_off[f] + b]``
    of the raw histogram; bin 0 is the node total minus the other bins.
    """
    cdef Py_ssize_t n_feat = feat_col.shape[0]
    # every live cell is overwritten; padding past n_bins[f] stays zero
    g_np, h_np, c_np = _buffers(out, n_feat, width, False)
    cdef double[:, ::1] g = g_np
    cdef double[:, ::1] h = h_np
    cdef long long[:, ::1] c = c_np
    cdef Py_ssize_t f, b, col, off
    cdef double gs, hs
    cdef long long cs
    for f in range(n_feat):
        gs = 0.0
        hs = 0.0
        cs = 0
        col = feat_col[f]
        off = feat_off[f]
        for b in range(1, n_bins[f]):
            g[f, b] = grad[col, off + b]
            h[f, b] = hess[col, off + b]
            c[f, b] = count[col, off + b]
            gs = gs + g[f, b]
            hs = hs + h[f, b]
            cs = cs + c[f, b]
        g[f, 0] = g_total - gs
        h[f, 0] = h_total - hs
        c[f, 0] = n_total - cs
    return g_np, h_np, c_np


def split_gains(const double[:, ::1] grad, const double[:, ::1] hess,
                const long long[:, ::1] count, const int[::1] n_bins,
                double g_parent, double h_parent, long long n_parent,
                double lam, double gamma, long long min_leaf, out=None):
    """Gain of every (feature, bin) split; -inf where the split is invalid.

    Bin ``b`` sends bins ``<= b`` left. Histograms here are per original
    feature, bin 0 included. A bin holding no samples repeats the previous
    bin's gain (the partition is the same).
    """
    cdef Py_ssize_t n_feat = grad.shape[0]
    cdef Py_ssize_t width = grad.shape[1] - 1
    if width < 1:
        width = 1
    if out is None:
        out_np = np.empty((n_feat, width), dtype=np.float64)
    else:
        out_np = out
    out_np.fill(-np.inf)
    cdef double[:, ::1] res = out_np
    cdef Py_ssize_t f, b
    cdef double gl, hl, gr, hr, tl, tr, tp, denom, prev
    cdef bint have_prev
    cdef long long nl, nr
    denom = h_parent + lam
    tp = (g_parent * g_parent) / denom if denom != 0.0 else 0.0
    for f in range(n_feat):
        gl = 0.0
        hl = 0.0
        nl = 0
        have_prev = False
        for b in range(n_bins[f] - 1):
            if have_prev and count[f, b] == 0:
                res[f, b] = prev
                continue
            gl = gl + grad[f, b]
            hl = hl + hess[f, b]
            nl = nl + count[f, b]
            have_prev = True
            prev = -INFINITY
            nr = n_parent - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            gr = g_parent - gl
            hr = h_parent - hl
            denom = hl + lam
            tl = (gl * gl) / denom if denom != 0.0 else 0.0
            denom = hr + lam
            tr = (gr * gr) / denom if denom != 0.0 else 0.0
            prev = 0.5 * (tl + tr - tp) - gamma
            res[f, b] = prev
    return out_np


def predict_tree(const double[:, ::1] X, const int[::1] feature,
                 const double[::1] threshold, const int[::1] left,
                 const int[::1] right, const double[::1] value):
    """Route every row from node 0; ``x <= threshold`` goes left."""
    cdef Py_ssize_t n = X.shape[0]
    out_np = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef Py_ssize_t r
    cdef int node
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out_np
