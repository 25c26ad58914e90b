"""Compiled numerical kernels for tree training, prediction, and attribution.

Everything here is deliberately free of Python objects: flat arrays in, flat
arrays out, with a small explicit splitmix64 generator so random draws are
bit-reproducible regardless of platform RNG details.  All kernels are
single-threaded so floating-point accumulation order is fixed.

Tree encoding used throughout: parallel arrays indexed by node id, root at
index 0 (per tree), children_left == -1 marks a leaf.  A sample goes left
when its value is <= the node threshold; missing values follow default_left.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# splitmix64 constants
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)
_INV_2POW53 = 2.0 ** -53


@njit(cache=True, inline="always")
def _sm_next(state):
    """Advance splitmix64; returns (new_state, 64 random bits)."""
    state = state + _SM_GAMMA
    z = state
    z = (z ^ (z >> np.uint64(30))) * _SM_M1
    z = (z ^ (z >> np.uint64(27))) * _SM_M2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, inline="always")
def _sm_uniform(state):
    """Advance state; returns (new_state, uniform double in [0, 1))."""
    state, z = _sm_next(state)
    return state, (z >> np.uint64(11)) * _INV_2POW53


@njit(cache=True)
def _sample_k_of_n(state, k, n, out, scratch):
    """Draw k distinct integers from 0..n-1 into out[:k] (partial Fisher-Yates)."""
    for i in range(n):
        scratch[i] = i
    for i in range(k):
        state, z = _sm_next(state)
        j = i + np.int64(z % np.uint64(n - i))
        tmp = scratch[i]
        scratch[i] = scratch[j]
        scratch[j] = tmp
        out[i] = scratch[i]
    return state


@njit(cache=True, inline="always")
def _split_gain(gl, hl, gr, hr, gtot, htot, lam):
    """Second-order gain of a candidate split under squared-error loss."""
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - gtot * gtot / (htot + lam))


# ---------------------------------------------------------------------------
# gradient-boosted trees
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def train_gbdt_kernel(codes, n_edges, edges_flat, edge_off, missing_code,
                      y, base, n_trees, lr, max_depth, mcw, lam,
                      subsample_rows, subsample_cols, seed):
    """Boost n_trees histogram trees against squared-error gradients.

    Returns flat per-node arrays concatenated over trees plus tree offsets;
    child indices are tree-local with the root of every tree at 0.
    """
    n, d = codes.shape
    state = np.uint64(seed)
    state, _ = _sm_next(state)

    m_rows = n if subsample_rows >= 1.0 else max(1, int(round(subsample_rows * n)))
    c_cols = d if subsample_cols >= 1.0 else max(1, int(round(subsample_cols * d)))

    max_nodes = 2 * m_rows + 1
    lim = 1
    for _ in range(max_depth + 1):
        lim = lim * 2
        if lim > max_nodes:
            break
    if lim - 1 < max_nodes:
        max_nodes = lim - 1

    # growing output buffers
    cap = 1024
    o_feat = np.empty(cap, np.int32)
    o_thr = np.empty(cap, np.float64)
    o_dl = np.empty(cap, np.bool_)
    o_l = np.empty(cap, np.int32)
    o_r = np.empty(cap, np.int32)
    o_val = np.empty(cap, np.float64)
    o_cov = np.empty(cap, np.float64)
    tree_off = np.empty(n_trees + 1, np.int64)
    tree_off[0] = 0
    total = 0

    # per-tree work arrays
    t_feat = np.empty(max_nodes, np.int32)
    t_bin = np.empty(max_nodes, np.int32)
    t_thr = np.empty(max_nodes, np.float64)
    t_dl = np.empty(max_nodes, np.bool_)
    t_l = np.empty(max_nodes, np.int32)
    t_r = np.empty(max_nodes, np.int32)
    t_val = np.empty(max_nodes, np.float64)
    t_cov = np.empty(max_nodes, np.float64)
    node_start = np.empty(max_nodes, np.int64)
    node_end = np.empty(max_nodes, np.int64)
    node_depth = np.empty(max_nodes, np.int64)
    node_g = np.empty(max_nodes, np.float64)
    node_h = np.empty(max_nodes, np.float64)
    queue = np.empty(max_nodes, np.int64)

    row_order = np.empty(m_rows, np.int64)
    tmp_rows = np.empty(m_rows, np.int64)
    scratch_n = np.empty(n, np.int64)
    scratch_d = np.empty(d, np.int64)
    cols = np.empty(c_cols, np.int64)
    # histograms stay zeroed between uses; each scan cleans up after itself
    hg = np.zeros(missing_code + 1, np.float64)
    hc = np.zeros(missing_code + 1, np.float64)
    touched = np.empty(missing_code + 1, np.int32)

    pred = np.empty(n, np.float64)
    g = np.empty(n, np.float64)
    for r in range(n):
        pred[r] = base
        g[r] = base - y[r]

    for t in range(n_trees):
        if m_rows == n:
            for i in range(n):
                row_order[i] = i
        else:
            state = _sample_k_of_n(state, m_rows, n, row_order, scratch_n)
            row_order.sort()
        if c_cols == d:
            for j in range(d):
                cols[j] = j
        else:
            state = _sample_k_of_n(state, c_cols, d, cols, scratch_d)
            cols.sort()

        g_root = 0.0
        for i in range(m_rows):
            g_root += g[row_order[i]]
        n_nodes = 1
        node_start[0] = 0
        node_end[0] = m_rows
        node_depth[0] = 0
        node_g[0] = g_root
        node_h[0] = float(m_rows)
        queue[0] = 0
        qhead = 0
        qtail = 1

        while qhead < qtail:
            nid = queue[qhead]
            qhead += 1
            start = node_start[nid]
            end = node_end[nid]
            gtot = node_g[nid]
            htot = node_h[nid]
            depth = node_depth[nid]

            # compare unscaled objectives; gain > 0 iff objective beats the
            # parent term, so seeding best_obj with it rejects useless splits
            parent_obj = gtot * gtot / (htot + lam)
            best_obj = parent_obj
            best_f = -1
            best_bin = -1
            best_dl = True
            best_gl = 0.0
            best_hl = 0.0
            splittable = depth < max_depth and (end - start) >= 2 and n_nodes + 2 <= max_nodes
            if splittable:
                for cpos in range(c_cols):
                    f = cols[cpos]
                    ne = n_edges[f]
                    if ne <= 0:
                        continue
                    n_touched = 0
                    for i in range(start, end):
                        r = row_order[i]
                        c = codes[r, f]
                        if hc[c] == 0.0 and c != missing_code:
                            touched[n_touched] = c
                            n_touched += 1
                        hg[c] += g[r]
                        hc[c] += 1.0
                    touched[:n_touched].sort()
                    gm = hg[missing_code]
                    hm = hc[missing_code]
                    # splits at unpopulated bins repeat the partition of the
                    # closest populated bin below, except in the leading
                    # unpopulated region, where routing missing left isolates
                    # the missing bucket; the dense scan finds that at bin 0
                    if hm > 0.0 and (n_touched == 0 or touched[0] > 0):
                        hr1 = htot - hm
                        if hr1 > 0.0 and hm >= mcw and hr1 >= mcw:
                            gr1 = gtot - gm
                            obj = gm * gm / (hm + lam) + gr1 * gr1 / (hr1 + lam)
                            if obj > best_obj:
                                best_obj = obj
                                best_f = f
                                best_bin = 0
                                best_dl = True
                                best_gl = gm
                                best_hl = hm
                    gl = 0.0
                    hl = 0.0
                    for ti in range(n_touched):
                        b = touched[ti]
                        if b >= ne:
                            break  # top bin cannot host a split
                        gl += hg[b]
                        hl += hc[b]
                        # missing routed left, then right; ties keep left
                        gl1 = gl + gm
                        hl1 = hl + hm
                        gr1 = gtot - gl1
                        hr1 = htot - hl1
                        if hl1 > 0.0 and hr1 > 0.0 and hl1 >= mcw and hr1 >= mcw:
                            obj = gl1 * gl1 / (hl1 + lam) + gr1 * gr1 / (hr1 + lam)
                            if obj > best_obj:
                                best_obj = obj
                                best_f = f
                                best_bin = b
                                best_dl = True
                                best_gl = gl1
                                best_hl = hl1
                        if hm > 0.0:
                            # with no missing rows both routings coincide
                            gr2 = gtot - gl
                            hr2 = htot - hl
                            if hl > 0.0 and hr2 > 0.0 and hl >= mcw and hr2 >= mcw:
                                obj = gl * gl / (hl + lam) + gr2 * gr2 / (hr2 + lam)
                                if obj > best_obj:
                                    best_obj = obj
                                    best_f = f
                                    best_bin = b
                                    best_dl = False
                                    best_gl = gl
                                    best_hl = hl
                    for ti in range(n_touched):
                        hg[touched[ti]] = 0.0
                        hc[touched[ti]] = 0.0
                    hg[missing_code] = 0.0
                    hc[missing_code] = 0.0

            if best_f < 0:
                t_feat[nid] = -1
                t_bin[nid] = -1
                t_thr[nid] = 0.0
                t_dl[nid] = True
                t_l[nid] = -1
                t_r[nid] = -1
                t_val[nid] = -gtot / (htot + lam)
                t_cov[nid] = htot
            else:
                nl = 0
                nr = 0
                for i in range(start, end):
                    r = row_order[i]
                    c = codes[r, best_f]
                    go_left = c <= best_bin or (c == missing_code and best_dl)
                    if go_left:
                        tmp_rows[nl] = r
                        nl += 1
                    else:
                        tmp_rows[m_rows - 1 - nr] = r
                        nr += 1
                for i in range(nl):
                    row_order[start + i] = tmp_rows[i]
                for i in range(nr):
                    row_order[start + nl + i] = tmp_rows[m_rows - 1 - (nr - 1 - i)]
                lid = n_nodes
                rid = n_nodes + 1
                n_nodes += 2
                t_feat[nid] = best_f
                t_bin[nid] = best_bin
                t_thr[nid] = edges_flat[edge_off[best_f] + best_bin]
                t_dl[nid] = best_dl
                t_l[nid] = lid
                t_r[nid] = rid
                t_val[nid] = 0.0
                t_cov[nid] = htot
                node_start[lid] = start
                node_end[lid] = start + nl
                node_depth[lid] = depth + 1
                node_g[lid] = best_gl
                node_h[lid] = best_hl
                node_start[rid] = start + nl
                node_end[rid] = end
                node_depth[rid] = depth + 1
                node_g[rid] = gtot - best_gl
                node_h[rid] = htot - best_hl
                queue[qtail] = lid
                qtail += 1
                queue[qtail] = rid
                qtail += 1

        # apply the finished tree to every row and refresh gradients
        for r in range(n):
            nid = 0
            while t_l[nid] != -1:
                c = codes[r, t_feat[nid]]
                if c == missing_code:
                    nid = t_l[nid] if t_dl[nid] else t_r[nid]
                elif c <= t_bin[nid]:
                    nid = t_l[nid]
                else:
                    nid = t_r[nid]
            pred[r] += lr * t_val[nid]
            g[r] = pred[r] - y[r]

        need = total + n_nodes
        if need > cap:
            newcap = cap
            while newcap < need:
                newcap *= 2
            o_feat2 = np.empty(newcap, np.int32)
            o_thr2 = np.empty(newcap, np.float64)
            o_dl2 = np.empty(newcap, np.bool_)
            o_l2 = np.empty(newcap, np.int32)
            o_r2 = np.empty(newcap, np.int32)
            o_val2 = np.empty(newcap, np.float64)
            o_cov2 = np.empty(newcap, np.float64)
            for i in range(total):
                o_feat2[i] = o_feat[i]
                o_thr2[i] = o_thr[i]
                o_dl2[i] = o_dl[i]
                o_l2[i] = o_l[i]
                o_r2[i] = o_r[i]
                o_val2[i] = o_val[i]
                o_cov2[i] = o_cov[i]
            o_feat = o_feat2
            o_thr = o_thr2
            o_dl = o_dl2
            o_l = o_l2
            o_r = o_r2
            o_val = o_val2
            o_cov = o_cov2
            cap = newcap
        for i in range(n_nodes):
            o_feat[total + i] = t_feat[i]
            o_thr[total + i] = t_thr[i]
            o_dl[total + i] = t_dl[i]
            o_l[total + i] = t_l[i]
            o_r[total + i] = t_r[i]
            o_val[total + i] = t_val[i]
            o_cov[total + i] = t_cov[i]
        total = need
        tree_off[t + 1] = total

    return (tree_off, o_feat[:total].copy(), o_thr[:total].copy(), o_dl[:total].copy(),
            o_l[:total].copy(), o_r[:total].copy(), o_val[:total].copy(), o_cov[:total].copy())


@njit(cache=True, nogil=True)
def enumerate_gain_table(codes, n_edges, missing_code, g, lam, mcw):
    """All candidate split gains of the root node, for auditing the scan.

    Output shape (d, max_edges, 2); slot [f, b, 0] is the gain with missing
    routed left, [f, b, 1] with missing routed right, NaN where the candidate
    is invalid (empty side or hessian below mcw).
    """
    n, d = codes.shape
    max_e = 0
    for f in range(d):
        if n_edges[f] > max_e:
            max_e = n_edges[f]
    out = np.full((d, max_e, 2), np.nan)
    hg = np.empty(missing_code + 1, np.float64)
    hc = np.empty(missing_code + 1, np.float64)
    gtot = 0.0
    for r in range(n):
        gtot += g[r]
    htot = float(n)
    for f in range(d):
        ne = n_edges[f]
        if ne <= 0:
            continue
        for b in range(ne + 1):
            hg[b] = 0.0
            hc[b] = 0.0
        hg[missing_code] = 0.0
        hc[missing_code] = 0.0
        for r in range(n):
            c = codes[r, f]
            hg[c] += g[r]
            hc[c] += 1.0
        gm = hg[missing_code]
        hm = hc[missing_code]
        gl = 0.0
        hl = 0.0
        for b in range(ne):
            gl += hg[b]
            hl += hc[b]
            gl1 = gl + gm
            hl1 = hl + hm
            gr1 = gtot - gl1
            hr1 = htot - hl1
            if hl1 > 0.0 and hr1 > 0.0 and hl1 >= mcw and hr1 >= mcw:
                out[f, b, 0] = _split_gain(gl1, hl1, gr1, hr1, gtot, htot, lam)
            gr2 = gtot - gl
            hr2 = htot - hl
            if hl > 0.0 and hr2 > 0.0 and hl >= mcw and hr2 >= mcw:
                out[f, b, 1] = _split_gain(gl, hl, gr2, hr2, gtot, htot, lam)
    return out


# ---------------------------------------------------------------------------
# extremely randomized trees
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def train_extratrees_kernel(x, y, n_trees, max_depth, min_samples_leaf,
                            n_candidates, seed):
    """Grow n_trees extremely randomized regression trees on the full sample.

    Candidate features are drawn uniformly per node, one uniform cut point
    per candidate inside the node's observed value range, best candidate by
    variance reduction; leaves predict the node mean.
    """
    n, d = x.shape
    state = np.uint64(seed)
    state, _ = _sm_next(state)
    depth_cap = max_depth if max_depth > 0 else 1 << 30
    k_cand = min(n_candidates, d)
    max_nodes = 2 * n + 1

    cap = 4096
    o_feat = np.empty(cap, np.int32)
    o_thr = np.empty(cap, np.float64)
    o_dl = np.empty(cap, np.bool_)
    o_l = np.empty(cap, np.int32)
    o_r = np.empty(cap, np.int32)
    o_val = np.empty(cap, np.float64)
    o_cov = np.empty(cap, np.float64)
    tree_off = np.empty(n_trees + 1, np.int64)
    tree_off[0] = 0
    total = 0

    t_feat = np.empty(max_nodes, np.int32)
    t_thr = np.empty(max_nodes, np.float64)
    t_dl = np.empty(max_nodes, np.bool_)
    t_l = np.empty(max_nodes, np.int32)
    t_r = np.empty(max_nodes, np.int32)
    t_val = np.empty(max_nodes, np.float64)
    t_cov = np.empty(max_nodes, np.float64)
    node_start = np.empty(max_nodes, np.int64)
    node_end = np.empty(max_nodes, np.int64)
    node_depth = np.empty(max_nodes, np.int64)
    stack = np.empty(max_nodes, np.int64)
    row_order = np.empty(n, np.int64)
    tmp_rows = np.empty(n, np.int64)
    cand = np.empty(max(k_cand, 1), np.int64)
    scratch_d = np.empty(d, np.int64)

    for t in range(n_trees):
        for i in range(n):
            row_order[i] = i
        n_nodes = 1
        node_start[0] = 0
        node_end[0] = n
        node_depth[0] = 0
        stack[0] = 0
        top = 1

        while top > 0:
            top -= 1
            nid = stack[top]
            start = node_start[nid]
            end = node_end[nid]
            m = end - start
            depth = node_depth[nid]

            s_all = 0.0
            s2_all = 0.0
            ymin = y[row_order[start]]
            ymax = ymin
            for i in range(start, end):
                v = y[row_order[i]]
                s_all += v
                s2_all += v * v
                if v < ymin:
                    ymin = v
                if v > ymax:
                    ymax = v
            sse_parent = s2_all - s_all * s_all / m

            best_score = 0.0
            best_f = -1
            best_thr = 0.0
            best_dl = True
            if (depth < depth_cap and m >= 2 * min_samples_leaf and m >= 2
                    and ymin < ymax and n_nodes + 2 <= max_nodes):
                state = _sample_k_of_n(state, k_cand, d, cand, scratch_d)
                for cpos in range(k_cand):
                    f = cand[cpos]
                    lo = np.inf
                    hi = -np.inf
                    for i in range(start, end):
                        v = x[row_order[i], f]
                        if not np.isnan(v):
                            if v < lo:
                                lo = v
                            if v > hi:
                                hi = v
                    if not (lo < hi):
                        continue
                    state, u = _sm_uniform(state)
                    thr = lo + u * (hi - lo)
                    if thr >= hi:
                        thr = lo + 0.5 * (hi - lo)
                    nl = 0
                    sl = 0.0
                    sl2 = 0.0
                    nr = 0
                    sr = 0.0
                    sr2 = 0.0
                    nm = 0
                    sm = 0.0
                    sm2 = 0.0
                    for i in range(start, end):
                        r = row_order[i]
                        v = x[r, f]
                        w = y[r]
                        if np.isnan(v):
                            nm += 1
                            sm += w
                            sm2 += w * w
                        elif v <= thr:
                            nl += 1
                            sl += w
                            sl2 += w * w
                        else:
                            nr += 1
                            sr += w
                            sr2 += w * w
                    # missing routed left, then right; ties keep left
                    nl1 = nl + nm
                    if nl1 >= min_samples_leaf and nr >= min_samples_leaf and nl1 > 0 and nr > 0:
                        sse_l = (sl2 + sm2) - (sl + sm) * (sl + sm) / nl1
                        sse_r = sr2 - sr * sr / nr
                        score = sse_parent - sse_l - sse_r
                        if score > best_score:
                            best_score = score
                            best_f = f
                            best_thr = thr
                            best_dl = True
                    nr2 = nr + nm
                    if nl >= min_samples_leaf and nr2 >= min_samples_leaf and nl > 0 and nr2 > 0:
                        sse_l = sl2 - sl * sl / nl
                        sse_r = (sr2 + sm2) - (sr + sm) * (sr + sm) / nr2
                        score = sse_parent - sse_l - sse_r
                        if score > best_score:
                            best_score = score
                            best_f = f
                            best_thr = thr
                            best_dl = False

            if best_f < 0:
                t_feat[nid] = -1
                t_thr[nid] = 0.0
                t_dl[nid] = True
                t_l[nid] = -1
                t_r[nid] = -1
                t_val[nid] = ymin if ymin == ymax else s_all / m
                t_cov[nid] = float(m)
            else:
                nl = 0
                nr = 0
                for i in range(start, end):
                    r = row_order[i]
                    v = x[r, best_f]
                    go_left = (v <= best_thr) if not np.isnan(v) else best_dl
                    if go_left:
                        tmp_rows[nl] = r
                        nl += 1
                    else:
                        tmp_rows[n - 1 - nr] = r
                        nr += 1
                for i in range(nl):
                    row_order[start + i] = tmp_rows[i]
                for i in range(nr):
                    row_order[start + nl + i] = tmp_rows[n - 1 - (nr - 1 - i)]
                lid = n_nodes
                rid = n_nodes + 1
                n_nodes += 2
                t_feat[nid] = best_f
                t_thr[nid] = best_thr
                t_dl[nid] = best_dl
                t_l[nid] = lid
                t_r[nid] = rid
                t_val[nid] = 0.0
                t_cov[nid] = float(m)
                node_start[lid] = start
                node_end[lid] = start + nl
                node_depth[lid] = depth + 1
                node_start[rid] = start + nl
                node_end[rid] = end
                node_depth[rid] = depth + 1
                # push right first so the left child is processed first
                stack[top] = rid
                top += 1
                stack[top] = lid
                top += 1

        need = total + n_nodes
        if need > cap:
            newcap = cap
            while newcap < need:
                newcap *= 2
            o_feat2 = np.empty(newcap, np.int32)
            o_thr2 = np.empty(newcap, np.float64)
            o_dl2 = np.empty(newcap, np.bool_)
            o_l2 = np.empty(newcap, np.int32)
            o_r2 = np.empty(newcap, np.int32)
            o_val2 = np.empty(newcap, np.float64)
            o_cov2 = np.empty(newcap, np.float64)
            for i in range(total):
                o_feat2[i] = o_feat[i]
                o_thr2[i] = o_thr[i]
                o_dl2[i] = o_dl[i]
                o_l2[i] = o_l[i]
                o_r2[i] = o_r[i]
                o_val2[i] = o_val[i]
                o_cov2[i] = o_cov[i]
            o_feat = o_feat2
            o_thr = o_thr2
            o_dl = o_dl2
            o_l = o_l2
            o_r = o_r2
            o_val = o_val2
            o_cov = o_cov2
            cap = newcap
        for i in range(n_nodes):
            o_feat[total + i] = t_feat[i]
            o_thr[total + i] = t_thr[i]
            o_dl[total + i] = t_dl[i]
            o_l[total + i] = t_l[i]
            o_r[total + i] = t_r[i]
            o_val[total + i] = t_val[i]
            o_cov[total + i] = t_cov[i]
        total = need
        tree_off[t + 1] = total

    return (tree_off, o_feat[:total].copy(), o_thr[:total].copy(), o_dl[:total].copy(),
            o_l[:total].copy(), o_r[:total].copy(), o_val[:total].copy(), o_cov[:total].copy())


# ---------------------------------------------------------------------------
# prediction
#
# Packed ensembles concatenate all trees into flat arrays with GLOBAL child
# indices; tree t's root sits at tree_off[t].
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def predict_kernel(x, tree_off, feat, thr, dl, cl, cr, val, base, lr, use_mean):
    """Traverse raw values; combine as base + lr * sum, or base + mean."""
    n = x.shape[0]
    n_trees = tree_off.size - 1
    out = np.empty(n, np.float64)
    for r in range(n):
        s = 0.0
        for t in range(n_trees):
            nid = tree_off[t]
            while cl[nid] != -1:
                v = x[r, feat[nid]]
                if np.isnan(v):
                    nid = cl[nid] if dl[nid] else cr[nid]
                elif v <= thr[nid]:
                    nid = cl[nid]
                else:
                    nid = cr[nid]
            s += val[nid]
        if use_mean:
            out[r] = base + s / n_trees
        else:
            out[r] = base + lr * s
    return out


@njit(cache=True, nogil=True)
def predict_per_tree_kernel(x, tree_off, feat, thr, dl, cl, cr, val):
    """Raw (unweighted) output of every tree for every row, shape (T, n)."""
    n = x.shape[0]
    n_trees = tree_off.size - 1
    out = np.empty((n_trees, n), np.float64)
    for t in range(n_trees):
        for r in range(n):
            nid = tree_off[t]
            while cl[nid] != -1:
                v = x[r, feat[nid]]
                if np.isnan(v):
                    nid = cl[nid] if dl[nid] else cr[nid]
                elif v <= thr[nid]:
                    nid = cl[nid]
                else:
                    nid = cr[nid]
            out[t, r] = val[nid]
    return out
