"""Instrumented QuickSort under the natural coupling.

The pivot of every (sub)list is its first key and partitioning is stable, so
the pairs compared when sorting ``X_1, ..., X_n`` are exactly the
ancestor/descendant pairs of the binary search tree built by inserting the
keys in arrival order. Growing that tree one key at a time therefore yields
the whole coupled trajectory ``(K_n, S_n)``, n = 1, 2, ...
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DepthCapExceeded
from .lexcmp import DEFAULT_DEPTH_CAP, CostTally, Order, compare_count

INITIAL_LENGTH = 64


def quicksort_count(keys: Sequence, tally: CostTally | None = None, depth_cap: int = DEFAULT_DEPTH_CAP):
    """Sort ``keys`` with first-key pivots, counting every comparison in ``tally``.

    Returns ``(sorted_keys, tally)``.
    """
    tally = CostTally() if tally is None else tally
    track = tally.per_prefix is not None
    out = []
    stack = [(False, list(keys))]
    while stack:
        is_pivot, item = stack.pop()
        if is_pivot:
            out.append(item)
            continue
        if len(item) <= 1:
            out.extend(item)
            continue
        pivot = item[0]
        lo, hi = [], []
        for k in item[1:]:
            oc = compare_count(k, pivot, depth_cap)
            tally.record(oc, k.prefix(min(oc.lcp, tally.prefix_depth)) if track else None)
            (lo if oc.order is Order.LESS else hi).append(k)
        stack.append((False, hi))
        stack.append((True, pivot))
        stack.append((False, lo))
    return out, tally


@dataclass
class Trajectory:
    checkpoints: list
    tallies: list

    @property
    def K(self) -> np.ndarray:
        return np.array([t.key_comps for t in self.tallies], dtype=np.int64)

    @property
    def S(self) -> np.ndarray:
        return np.array([t.symbol_comps for t in self.tallies], dtype=np.int64)


def _check_checkpoints(checkpoints, n):
    cps = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if cps and (cps[0] < 0 or cps[-1] > n):
        raise ValueError(f"checkpoints must lie in [0, {n}]")
    return cps


def _lengths(depth_cap):
    length = min(INITIAL_LENGTH, depth_cap)
    while True:
        yield length
        if length >= depth_cap:
            return
        length = min(2 * length, depth_cap)


def bst_incremental(keys, checkpoints, depth_cap: int = DEFAULT_DEPTH_CAP,
                    track_prefixes: int | None = None) -> Trajectory:
    """Insert keys into an unbalanced BST and snapshot the tally at each checkpoint.

    The snapshot at ``n`` equals ``quicksort_count(keys[:n])``. With
    ``track_prefixes`` set, per-prefix counts up to that depth are kept (this
    uses the pure-Python path).
    """
    keys = list(keys)
    cps = _check_checkpoints(checkpoints, len(keys))
    if track_prefixes is not None:
        return _bst_python(keys, cps, depth_cap, track_prefixes)
    if not keys:
        return Trajectory(cps, [CostTally() for _ in cps])
    source = keys[0].source
    if any(k.source is not source for k in keys):
        raise ValueError("all keys must come from the same source")
    seeds = np.array([k.key_seed for k in keys], dtype=np.uint64)
    for length in _lengths(depth_cap):
        sym = kernels.symbol_matrix(seeds, length, source.symbol_table(length))
        try:
            _, _, hist = kernels.trajectory(sym, np.array(cps, dtype=np.int64))
        except kernels.LcpOverflow:
            continue
        return Trajectory(cps, [CostTally.from_histogram(h) for h in hist])
    raise DepthCapExceeded(f"two keys agree on their first {depth_cap} symbols")


def _bst_python(keys, cps, depth_cap, prefix_depth):
    tally = CostTally.tracking_prefixes(prefix_depth)
    left, right = {}, {}
    snaps = []
    c = 0
    while c < len(cps) and cps[c] == 0:
        snaps.append(tally.copy())
        c += 1
    for j, key in enumerate(keys):
        if j > 0:
            node = 0
            while True:
                oc = compare_count(key, keys[node], depth_cap)
                tally.record(oc, key.prefix(min(oc.lcp, prefix_depth)))
                branch = left if oc.order is Order.LESS else right
                if node not in branch:
                    branch[node] = j
                    break
                node = branch[node]
        while c < len(cps) and cps[c] == j + 1:
            snaps.append(tally.copy())
            c += 1
    return Trajectory(cps, snaps)


def batch_counts(source, seeds: np.ndarray, offsets: np.ndarray, depth_cap: int = DEFAULT_DEPTH_CAP):
    """Full-run tallies for many independent replicates.

    Replicate ``r`` sorts the keys with seeds ``seeds[offsets[r]:offsets[r+1]]``
    in that arrival order. Returns ``(K, S, hists)`` where ``hists[r]`` is the
    longest-common-prefix histogram of replicate ``r``.
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    reps = offsets.size - 1
    K = np.zeros(reps, np.int64)
    S = np.zeros(reps, np.int64)
    hists = [None] * reps
    todo = np.arange(reps)
    for length in _lengths(depth_cap):
        sub_seeds = np.concatenate([seeds[offsets[r]:offsets[r + 1]] for r in todo]) if todo.size else seeds[:0]
        sub_offsets = np.concatenate([[0], np.cumsum(offsets[todo + 1] - offsets[todo])])
        k, s, hist, overflow = kernels.bst_batch(sub_seeds, sub_offsets, length, source.symbol_table(length))
        done = ~overflow
        K[todo[done]] = k[done]
        S[todo[done]] = s[done]
        for i in np.flatnonzero(done):
            hists[todo[i]] = hist[i]
        todo = todo[overflow]
        if not todo.size:
            return K, S, hists
    raise DepthCapExceeded(f"two keys agree on their first {depth_cap} symbols")


def key_comparison_run(n: int, rng: np.random.Generator) -> int:
    """Key comparisons ``K_n`` of QuickSort on a uniformly random permutation of ``n`` ranks.

    For any continuous source ``K_n`` depends only on the relative ranks of
    the keys, so no symbols are generated.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    return int(kernels.key_comparisons(rng.permutation(n)[None, :])[0])
