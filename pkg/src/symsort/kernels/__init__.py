"""Hot loops behind a backend switch.

Two implementations of every kernel exist: numba-compiled tree walks
(:mod:`._numba`) and vectorized numpy partitioning (:mod:`._numpy`). The
default is chosen from ``SYMSORT_DISABLE_JIT`` (see :mod:`symsort._jit`);
:func:`use_backend` overrides it temporarily. Both produce bit-identical
results.
"""

from contextlib import contextmanager
from typing import NamedTuple

import numpy as np

from .. import _jit
from . import _numpy
from ._hash import derive_seed, key_seeds, mix64, stream_at, to_unit  # noqa: F401

KIND_MEMORYLESS = 0
KIND_MARKOV = 1
KIND_INTERMITTENT = 2

_backends = {"numpy": _numpy}
if _jit.HAS_NUMBA:
    from . import _numba

    _backends["numba"] = _numba

_active = "numba" if _jit.JIT_ENABLED else "numpy"


class SymbolTable(NamedTuple):
    """Inverse-CDF tables for symbol generation.

    ``table[state, s]`` is the cumulative probability of symbols ``0..s`` in
    generator state ``state``; the last column is never read.
    """

    kind: int
    table: np.ndarray
    sigma: int = 0


class LcpOverflow(Exception):
    """Raised internally when two keys agree on every materialized symbol."""


def backend():
    return _active


def available_backends():
    return tuple(sorted(_backends))


@contextmanager
def use_backend(name):
    global _active
    if name not in _backends:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    prev, _active = _active, name
    try:
        yield
    finally:
        _active = prev


def set_threads(n):
    """Bound replicate-level parallelism (numba backend only)."""
    if n is None or "numba" not in _backends:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _impl():
    return _backends[_active]


def symbol_matrix(seeds, length, tab):
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    return _impl().symbol_matrix(seeds, int(length), tab.kind, tab.table, tab.sigma)


def bst_batch(seeds, offsets, length, tab):
    """Insert each replicate's keys into a BST; return per-replicate tallies.

    Returns ``(K, S, hist, overflow)`` where ``hist[r, i]`` counts comparisons
    whose longest common prefix is ``i`` and ``overflow[r]`` marks replicates
    in which some compared pair agreed on all ``length`` symbols (their
    tallies are then meaningless).
    """
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    reps = offsets.shape[0] - 1
    k = np.zeros(reps, np.int64)
    s = np.zeros(reps, np.int64)
    hist = np.zeros((reps, length), np.int64)
    status = np.zeros(reps, np.int64)
    _impl().bst_batch(seeds, offsets, int(length), tab.kind, tab.table, tab.sigma, k, s, hist, status)
    return k, s, hist, status.astype(bool)


def trajectory(sym, checkpoints):
    """Tally snapshots after inserting the first ``n`` rows, for each checkpoint ``n``."""
    sym = np.ascontiguousarray(sym, dtype=np.uint8)
    checkpoints = np.ascontiguousarray(checkpoints, dtype=np.int64)
    ncp = checkpoints.shape[0]
    k = np.zeros(ncp, np.int64)
    s = np.zeros(ncp, np.int64)
    hist = np.zeros((ncp, sym.shape[1]), np.int64)
    if _impl().trajectory(sym, checkpoints, k, s, hist):
        raise LcpOverflow
    return k, s, hist


def key_comparisons(perms):
    """Key comparisons of first-pivot QuickSort on each row of ``perms``.

    Rows must be permutations of ``0..n-1``.
    """
    perms = np.ascontiguousarray(np.atleast_2d(perms), dtype=np.int64)
    k = np.zeros(perms.shape[0], np.int64)
    _impl().key_only_batch(perms, k)
    return k
