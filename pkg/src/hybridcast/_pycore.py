"""Pure-numpy versions of the compiled kernels in ``_core.pyx``.

Used when the extension is not built (or ``HYBRIDCAST_PURE_PYTHON=1``).
Results match the compiled core bit for bit: ``np.bincount`` and
``np.cumsum`` both accumulate sequentially in input order.
"""
import numpy as np


def build_histograms(binned, sample_indices, wg, wh, n_bins, n_threads=1, out=None):
    n_cols = binned.shape[0]
    idx = np.asarray(sample_indices, dtype=np.int64)
    m = idx.shape[0]
    cells = binned[:, idx].astype(np.int64)
    cells += (np.arange(n_cols, dtype=np.int64) * n_bins)[:, None]
    flat = cells.ravel()
    size = n_cols * n_bins
    wg_rows = np.broadcast_to(wg[idx], (n_cols, m)).ravel()
    wh_rows = np.broadcast_to(wh[idx], (n_cols, m)).ravel()
    grad = np.bincount(flat, weights=wg_rows, minlength=size).reshape(n_cols, n_bins)
    hess = np.bincount(flat, weights=wh_rows, minlength=size).reshape(n_cols, n_bins)
    count = np.bincount(flat, minlength=size).astype(np.int64).reshape(n_cols, n_bins)
    return _into(out, (grad, hess, count))


def _into(out, arrays):
    if out is None:
        return arrays
    for dst, src in zip(out, arrays):
        dst[...] = src
    return out


def unpack_histograms(grad, hess, count, feat_col, feat_off, n_bins, width,
                      g_total, h_total, n_total, out=None):
    n_bins = np.asarray(n_bins)
    bins = np.arange(width)[None, :]
    valid = (bins >= 1) & (bins < n_bins[:, None])
    raw_width = grad.shape[1]
    cell = np.asarray(feat_col, dtype=np.int64)[:, None] * raw_width + feat_off[:, None] + bins
    cell = np.where(valid, cell, 0)
    res = []
    for arr, total in ((grad, g_total), (hess, h_total), (count, n_total)):
        feat = np.where(valid, arr.ravel()[cell], 0).astype(arr.dtype)
        # trailing padding adds exact zeros, so the last cumsum entry is the
        # sequential sum of the real bins
        rest = np.cumsum(feat[:, 1:], axis=1)[:, -1] if width > 1 else 0
        feat[:, 0] = total - rest
        res.append(np.ascontiguousarray(feat))
    return _into(out, tuple(res))


def _term(g, h, lam):
    denom = h + lam
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (g * g) / denom
    return np.where(denom != 0.0, out, 0.0)


def split_gains(grad, hess, count, n_bins, g_parent, h_parent, n_parent,
                lam, gamma, min_leaf, out=None):
    n_feat, width = grad.shape[0], max(grad.shape[1] - 1, 1)
    if out is None:
        out = np.empty((n_feat, width))
    out.fill(-np.inf)
    if grad.shape[1] < 2:
        return out
    gl = np.cumsum(grad, axis=1)[:, :width]
    hl = np.cumsum(hess, axis=1)[:, :width]
    nl = np.cumsum(count, axis=1)[:, :width]
    nr = n_parent - nl
    gr = g_parent - gl
    hr = h_parent - hl
    denom = h_parent + lam
    tp = (g_parent * g_parent) / denom if denom != 0.0 else 0.0
    gain = 0.5 * (_term(gl, hl, lam) + _term(gr, hr, lam) - tp) - gamma
    valid = (nl >= min_leaf) & (nr >= min_leaf)
    valid &= np.arange(width)[None, :] < (np.asarray(n_bins)[:, None] - 1)
    out[valid] = gain[valid]
    return out


def predict_tree(X, feature, threshold, left, right, value):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node].astype(np.float64)
