"""Pure-numpy kernels.

Instead of walking a binary search tree key by key, these run first-pivot
QuickSort level-synchronously: every active segment compares all of its
non-pivot keys to its earliest-arriving key in one vectorized step, then the
segments are split by a stable sort. QuickSort with the first key as pivot
and a stable partition compares exactly the BST ancestor/descendant pairs of
the insertion order, so both backends produce identical tallies.
"""

import numpy as np

from ._hash import GOLDEN, mix64, to_unit


def symbol_matrix(seeds, length, kind, table, sigma):
    seeds = np.asarray(seeds, dtype=np.uint64)
    idx = (np.arange(1, length + 1, dtype=np.uint64) * np.uint64(GOLDEN))[None, :]
    with np.errstate(over="ignore"):
        u = to_unit(mix64(seeds[:, None] + idx))
    nrows, r = table.shape
    if kind == 0:
        return np.searchsorted(table[0, : r - 1], u, side="right").astype(np.uint8)
    out = np.empty(u.shape, np.uint8)
    state = np.zeros(seeds.shape[0], np.int64)
    for i in range(length):
        rows = table[state, : r - 1]
        s = (u[:, i, None] >= rows).sum(axis=1)
        out[:, i] = s
        if kind == 1:
            state = s + 1
        else:
            state = np.where(s == sigma, np.minimum(state + 1, nrows - 1), 0)
    return out


def _partition_levels(group, compare):
    """Run the level-synchronous partition; return (arrival ids, lcp) per comparison.

    ``group`` labels each key with its replicate; keys of one replicate must be
    contiguous and in arrival order.
    """
    elem = np.arange(group.shape[0], dtype=np.int64)
    seg = np.asarray(group, dtype=np.int64)
    es, lcps = [], []
    while elem.size > 1:
        start = np.empty(elem.size, dtype=bool)
        start[0] = True
        np.not_equal(seg[1:], seg[:-1], out=start[1:])
        rest = ~start
        if not rest.any():
            break
        gid = np.cumsum(start) - 1
        pivots = elem[start][gid]
        e = elem[rest]
        lcp, greater = compare(e, pivots[rest])
        es.append(e)
        lcps.append(lcp)
        newseg = 2 * gid[rest] + greater
        order = np.argsort(newseg, kind="stable")
        elem = e[order]
        seg = newseg[order]
    if not es:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(es), np.concatenate(lcps)


def _symbol_compare(sym):
    def compare(e, p):
        a = sym[e]
        b = sym[p]
        neq = a != b
        found = neq.any(axis=1)
        lcp = neq.argmax(axis=1).astype(np.int64)
        rows = np.arange(e.size)
        greater = (a[rows, lcp] > b[rows, lcp]).astype(np.int64)
        lcp[~found] = -1
        greater[~found] = 1
        return lcp, greater

    return compare


def bst_batch(seeds, offsets, length, kind, table, sigma, k_out, s_out, hist_out, status):
    reps = offsets.shape[0] - 1
    sym = symbol_matrix(seeds, length, kind, table, sigma)
    group = np.repeat(np.arange(reps), np.diff(offsets))
    e, lcp = _partition_levels(group, _symbol_compare(sym))
    rep = group[e]
    bad = lcp < 0
    if bad.any():
        status[np.unique(rep[bad])] = 1
    good = ~bad
    rep, lcp = rep[good], lcp[good]
    k_out[:] = np.bincount(rep, minlength=reps)
    s_out[:] = np.bincount(rep, weights=lcp + 1, minlength=reps).astype(np.int64)
    hist_out[:] = np.bincount(rep * length + lcp, minlength=reps * length).reshape(reps, length)


def trajectory(sym, checkpoints, k_out, s_out, hist_out):
    n, length = sym.shape
    e, lcp = _partition_levels(np.zeros(n, np.int64), _symbol_compare(sym))
    if (lcp < 0).any():
        return 1
    ncp = checkpoints.shape[0]
    bucket = np.searchsorted(checkpoints, e, side="right")
    per = np.bincount(bucket * length + lcp, minlength=(ncp + 1) * length).reshape(ncp + 1, length)
    hist_out[:] = np.cumsum(per, axis=0)[:ncp]
    k_out[:] = hist_out.sum(axis=1)
    s_out[:] = (hist_out * np.arange(1, length + 1)).sum(axis=1)
    return 0


def key_only_batch(perms, k_out):
    reps, n = perms.shape
    flat = np.ascontiguousarray(perms).reshape(-1)

    def compare(e, p):
        return np.zeros(e.size, np.int64), (flat[e] > flat[p]).astype(np.int64)

    e, _ = _partition_levels(np.repeat(np.arange(reps), n), compare)
    k_out[:] = np.bincount(e // n, minlength=reps) if n else 0
