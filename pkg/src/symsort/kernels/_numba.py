"""numba kernels. Imported only when the JIT is enabled."""

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U53 = 2.0**-53


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(cache=True)
def _fill_row(seed, out, kind, table, sigma):
    length = out.shape[0]
    nrows, r = table.shape
    state = 0
    for i in range(length):
        bits = _mix64(seed + np.uint64(i + 1) * _GOLDEN)
        u = np.float64(bits >> _S11) * _U53
        s = 0
        while s < r - 1 and u >= table[state, s]:
            s += 1
        out[i] = s
        if kind == 1:
            state = s + 1
        elif kind == 2:
            if s == sigma:
                state = state + 1 if state + 1 < nrows else nrows - 1
            else:
                state = 0


@njit(cache=True)
def symbol_matrix(seeds, length, kind, table, sigma):
    out = np.empty((seeds.shape[0], length), np.uint8)
    for j in range(seeds.shape[0]):
        _fill_row(seeds[j], out[j], kind, table, sigma)
    return out


@njit(cache=True, inline="always")
def _insert(sym, j, left, right, hist):
    """Insert key j below root 0. Returns (ok, comparisons, symbols examined)."""
    length = sym.shape[1]
    node = 0
    k = 0
    s = 0
    while True:
        i = 0
        while i < length and sym[j, i] == sym[node, i]:
            i += 1
        if i == length:
            return False, k, s
        k += 1
        s += i + 1
        hist[i] += 1
        if sym[j, i] < sym[node, i]:
            nxt = left[node]
            if nxt < 0:
                left[node] = j
                return True, k, s
        else:
            nxt = right[node]
            if nxt < 0:
                right[node] = j
                return True, k, s
        node = nxt


@njit(cache=True)
def trajectory(sym, checkpoints, k_out, s_out, hist_out):
    n = sym.shape[0]
    left = np.full(n, -1, np.int64)
    right = np.full(n, -1, np.int64)
    hist = np.zeros(sym.shape[1], np.int64)
    ncp = checkpoints.shape[0]
    K = 0
    S = 0
    c = 0
    while c < ncp and checkpoints[c] <= 0:
        c += 1
    for j in range(n):
        if j > 0:
            ok, dk, ds = _insert(sym, j, left, right, hist)
            if not ok:
                return 1
            K += dk
            S += ds
        while c < ncp and checkpoints[c] <= j + 1:
            k_out[c] = K
            s_out[c] = S
            hist_out[c, :] = hist
            c += 1
    return 0


@njit(cache=True, parallel=True)
def bst_batch(seeds, offsets, length, kind, table, sigma, k_out, s_out, hist_out, status):
    reps = offsets.shape[0] - 1
    for r in prange(reps):
        a = offsets[r]
        n = offsets[r + 1] - a
        if n < 2:
            continue
        sym = np.empty((n, length), np.uint8)
        for j in range(n):
            _fill_row(seeds[a + j], sym[j], kind, table, sigma)
        left = np.full(n, -1, np.int64)
        right = np.full(n, -1, np.int64)
        K = 0
        S = 0
        for j in range(1, n):
            ok, dk, ds = _insert(sym, j, left, right, hist_out[r])
            if not ok:
                status[r] = 1
                break
            K += dk
            S += ds
        k_out[r] = K
        s_out[r] = S


@njit(cache=True, parallel=True)
def key_only_batch(perms, k_out):
    reps, n = perms.shape
    for r in prange(reps):
        if n < 2:
            continue
        left = np.full(n, -1, np.int64)
        right = np.full(n, -1, np.int64)
        root = perms[r, 0]
        K = 0
        for j in range(1, n):
            v = perms[r, j]
            node = root
            while True:
                K += 1
                if v < node:
                    if left[node] < 0:
                        left[node] = v
                        break
                    node = left[node]
                else:
                    if right[node] < 0:
                        right[node] = v
                        break
                    node = right[node]
        k_out[r] = K
