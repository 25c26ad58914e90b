"""Compiled kernels for path-dependent TreeSHAP attribution.

The traversal maintains, per tree node on the current path, the fraction of
background paths that flow through when a feature is unknown (zero fraction),
the fraction when it is known (one fraction), and the permutation weights of
every path-subset size; extending and unwinding those weights as the
traversal descends yields exact Shapley values in one pass per tree.

The depth-first walk is iterative with an explicit stack: each visited node
owns a region of a shared workspace, copied from its parent's region, so no
state is shared between the hot and cold branches.  Visit order matches the
textbook recursive formulation (hot branch fully explored first), making the
floating-point accumulation order identical to it.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit("void(i4[:], f8[:], f8[:], f8[:], i8, i8, f8, f8, i8)",
      cache=True, inline="always")
def _path_extend(pfeat, pzero, pone, pweight, off, depth, zero_frac, one_frac, feat):
    pfeat[off + depth] = feat
    pzero[off + depth] = zero_frac
    pone[off + depth] = one_frac
    pweight[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pweight[off + i + 1] += one_frac * pweight[off + i] * (i + 1.0) / (depth + 1.0)
        pweight[off + i] = zero_frac * pweight[off + i] * (depth - i) / (depth + 1.0)


@njit("void(i4[:], f8[:], f8[:], f8[:], i8, i8, i8)", cache=True, inline="always")
def _path_unwind(pfeat, pzero, pone, pweight, off, depth, idx):
    one_frac = pone[off + idx]
    zero_frac = pzero[off + idx]
    carry = pweight[off + depth]
    for i in range(depth - 1, -1, -1):
        if one_frac != 0.0:
            tmp = pweight[off + i]
            pweight[off + i] = carry * (depth + 1.0) / ((i + 1.0) * one_frac)
            carry = tmp - pweight[off + i] * zero_frac * (depth - i) / (depth + 1.0)
        else:
            pweight[off + i] = pweight[off + i] * (depth + 1.0) / (zero_frac * (depth - i))
    for i in range(idx, depth):
        pfeat[off + i] = pfeat[off + i + 1]
        pzero[off + i] = pzero[off + i + 1]
        pone[off + i] = pone[off + i + 1]


@njit("f8(f8[:], f8[:], f8[:], i8, i8, i8)", cache=True, inline="always")
def _path_unwound_sum(pzero, pone, pweight, off, depth, idx):
    one_frac = pone[off + idx]
    zero_frac = pzero[off + idx]
    carry = pweight[off + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_frac != 0.0:
            tmp = carry * (depth + 1.0) / ((i + 1.0) * one_frac)
            total += tmp
            carry = pweight[off + i] - tmp * zero_frac * (depth - i) / (depth + 1.0)
        else:
            total += pweight[off + i] / zero_frac * (depth + 1.0) / (depth - i)
    return total


@njit(cache=True, nogil=True)
def _tree_shap_row(cl, cr, cdef, feat, thr, val_exp, cover, xrow, xmiss, phi, root,
                   pfeat, pzero, pone, pweight,
                   st_node, st_depth, st_poff, st_zf, st_of, st_fi):
    """Attribution of one tree for one sample, accumulated into phi."""
    top = 0
    st_node[0] = root
    st_depth[0] = 0
    st_poff[0] = 0
    st_zf[0] = 1.0
    st_of[0] = 1.0
    st_fi[0] = -1
    top = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        depth = st_depth[top]
        poff = st_poff[top]
        zero_frac = st_zf[top]
        one_frac = st_of[top]
        feat_idx = st_fi[top]

        # this visit owns the region right after its parent's
        off = poff + depth + 1
        for i in range(depth + 1):
            pfeat[off + i] = pfeat[poff + i]
            pzero[off + i] = pzero[poff + i]
            pone[off + i] = pone[poff + i]
            pweight[off + i] = pweight[poff + i]
        _path_extend(pfeat, pzero, pone, pweight, off, depth, zero_frac, one_frac, feat_idx)

        if cl[node] == -1:
            leaf_val = val_exp[node]
            for i in range(1, depth + 1):
                w = _path_unwound_sum(pzero, pone, pweight, off, depth, i)
                phi[pfeat[off + i]] += w * (pone[off + i] - pzero[off + i]) * leaf_val
            continue

        split_feature = feat[node]
        left = np.int64(cl[node])
        right = np.int64(cr[node])
        if xmiss[split_feature]:
            hot = np.int64(cdef[node])
        elif xrow[split_feature] <= thr[node]:
            hot = left
        else:
            hot = right
        cold = right if hot == left else left

        w_node = cover[node]
        hot_zero = cover[hot] / w_node
        cold_zero = cover[cold] / w_node
        inc_zero = 1.0
        inc_one = 1.0
        found = -1
        for k in range(depth + 1):
            if pfeat[off + k] == split_feature:
                found = k
                break
        if found >= 0:
            inc_zero = pzero[off + found]
            inc_one = pone[off + found]
            _path_unwind(pfeat, pzero, pone, pweight, off, depth, found)
            depth -= 1

        # push cold first so the hot branch is fully explored first (LIFO)
        st_node[top] = cold
        st_depth[top] = depth + 1
        st_poff[top] = off
        st_zf[top] = cold_zero * inc_zero
        st_of[top] = 0.0
        st_fi[top] = split_feature
        top += 1
        st_node[top] = hot
        st_depth[top] = depth + 1
        st_poff[top] = off
        st_zf[top] = hot_zero * inc_zero
        st_of[top] = inc_one
        st_fi[top] = split_feature
        top += 1


@njit(cache=True, parallel=True)
def shap_kernel(x, xmiss, tree_off, feat, thr, cl, cr, cdef, val_exp, cover, max_depth):
    """Per-row, per-feature attributions summed over all trees.

    Row-parallel: every iteration owns its output row and its own workspace,
    so the result is independent of the thread schedule.
    """
    n, d = x.shape
    n_trees = tree_off.size - 1
    phi = np.zeros((n, d), np.float64)
    s = (max_depth + 3) * (max_depth + 4) // 2 + 4
    cap = max_depth + 3
    for r in prange(n):
        pfeat = np.empty(s, np.int32)
        pzero = np.empty(s, np.float64)
        pone = np.empty(s, np.float64)
        pweight = np.empty(s, np.float64)
        st_node = np.empty(cap, np.int64)
        st_depth = np.empty(cap, np.int64)
        st_poff = np.empty(cap, np.int64)
        st_zf = np.empty(cap, np.float64)
        st_of = np.empty(cap, np.float64)
        st_fi = np.empty(cap, np.int64)
        for t in range(n_trees):
            _tree_shap_row(cl, cr, cdef, feat, thr, val_exp, cover,
                           x[r], xmiss[r], phi[r], tree_off[t],
                           pfeat, pzero, pone, pweight,
                           st_node, st_depth, st_poff, st_zf, st_of, st_fi)
    return phi


@njit(cache=True)
def expected_values(cl, cr, cover, val_scaled):
    """Cover-weighted expected subtree output per node (children follow parents)."""
    out = val_scaled.copy()
    for i in range(cl.size - 1, -1, -1):
        if cl[i] != -1:
            wl = cover[cl[i]]
            wr = cover[cr[i]]
            out[i] = (wl * out[cl[i]] + wr * out[cr[i]]) / (wl + wr)
    return out
