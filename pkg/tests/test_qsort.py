import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symsort import DepthCapExceeded, kernels
from symsort.lexcmp import CostTally
from symsort.qsort import batch_counts, bst_incremental, key_comparison_run, quicksort_count
from symsort.sources import Key, keys_from_seeds, make_source

from conftest import SHIPPED, ListKey, make_keys


def pair_oracle(keys):
    """(K, S, per_depth) from the rule: keys i < j (arrival) are compared iff
    no key arriving before both has rank strictly between them."""
    n = len(keys)
    words = [k.prefix(200) for k in keys]
    rank = sorted(range(n), key=lambda i: words[i])
    pos = {i: r for r, i in enumerate(rank)}
    K = S = 0
    depth = []
    for i, j in itertools.combinations(range(n), 2):
        lo, hi = sorted((pos[i], pos[j]))
        if min(rank[lo:hi + 1]) in (i, j):
            lcp = next(x for x in range(200) if words[i][x] != words[j][x])
            K += 1
            S += lcp + 1
            depth.extend(range(lcp + 1))
    per_depth = np.bincount(depth).tolist() if depth else []
    return K, S, per_depth


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_quicksort_against_pair_oracle(name):
    for seed in range(5):
        keys = make_keys(SHIPPED[name], seed, 30)
        out, tally = quicksort_count(keys)
        tally.verify()
        assert [k.prefix(200) for k in out] == sorted(k.prefix(200) for k in keys)
        assert (tally.K, tally.S, tally.per_depth) == pair_oracle(keys)


@given(st.lists(st.lists(st.integers(0, 2), min_size=6, max_size=6), min_size=0, max_size=25, unique_by=tuple))
def test_quicksort_on_distinct_words(words):
    keys = [ListKey(w, pad=i + 3) for i, w in enumerate(words)]  # pads make ties impossible
    out, tally = quicksort_count(keys)
    assert [k.symbols for k in out] == sorted(words)
    tally.verify()


def test_quicksort_small_cases(fair):
    _, t = quicksort_count([])
    assert t.K == t.S == 0
    _, t = quicksort_count(make_keys(fair, 1, 1))
    assert t.K == t.S == 0
    _, t = quicksort_count(make_keys(fair, 1, 2))
    assert t.K == 1 and t.S >= 1


def test_identical_keys_hit_depth_cap(fair):
    with pytest.raises(DepthCapExceeded):
        quicksort_count([Key(fair, 5), Key(fair, 5)], depth_cap=100)
    with pytest.raises(DepthCapExceeded):
        bst_incremental([Key(fair, 5), Key(fair, 5)], [2], depth_cap=300)
    with pytest.raises(DepthCapExceeded):
        batch_counts(fair, np.array([5, 5], np.uint64), np.array([0, 2]), depth_cap=300)


def test_bst_matches_quicksort_every_prefix(shipped):
    for seed in range(8):
        keys = make_keys(shipped, 100 + seed, 40)
        traj = bst_incremental(keys, range(41))
        for n, tally in zip(traj.checkpoints, traj.tallies):
            _, ref = quicksort_count(keys[:n])
            assert (tally.K, tally.S, tally.per_depth) == (ref.K, ref.S, ref.per_depth)


def test_trajectory_monotone(shipped):
    keys = make_keys(shipped, 3, 300)
    traj = bst_incremental(keys, range(0, 301, 10))
    assert np.all(np.diff(traj.K) >= 0) and np.all(np.diff(traj.S) >= 0)
    assert np.all(traj.S >= traj.K)


def test_trajectory_needs_longer_keys():
    # a heavily intermittent source produces long common prefixes, so the kernel reruns with longer keys
    src = make_source({"type": "intermittent", "r": 2, "gamma": 1.0, "sigma": 0})
    keys = make_keys(src, 11, 2000)
    traj = bst_incremental(keys, [2000])
    _, ref = quicksort_count(keys)
    assert traj.tallies[0].per_depth == ref.per_depth
    assert len(ref.per_depth) > 64


def test_prefix_tracking_path(shipped):
    keys = make_keys(shipped, 8, 60)
    fast = bst_incremental(keys, [20, 60])
    slow = bst_incremental(keys, [20, 60], track_prefixes=3)
    for a, b in zip(fast.tallies, slow.tallies):
        assert (a.K, a.S, a.per_depth) == (b.K, b.S, b.per_depth)
        b.verify()
    _, ref = quicksort_count(keys, CostTally.tracking_prefixes(3))
    assert slow.tallies[-1].per_prefix == ref.per_prefix


def test_checkpoint_validation(fair):
    keys = make_keys(fair, 1, 5)
    with pytest.raises(ValueError):
        bst_incremental(keys, [3, 2])
    with pytest.raises(ValueError):
        bst_incremental(keys, [6])
    assert bst_incremental([], [0]).K.tolist() == [0]


def test_mixed_sources_rejected(fair):
    with pytest.raises(ValueError):
        bst_incremental([Key(fair, 1), Key(SHIPPED["markov_2"], 2)], [2])


def test_batch_counts_matches_quicksort(shipped):
    sizes = [0, 1, 2, 17, 50, 3]
    seeds = np.concatenate([kernels.key_seeds(9, r, m) for r, m in enumerate(sizes)])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    K, S, hists = batch_counts(shipped, seeds, offsets)
    for r, m in enumerate(sizes):
        _, ref = quicksort_count(keys_from_seeds(shipped, kernels.key_seeds(9, r, m)))
        assert (K[r], S[r]) == (ref.K, ref.S)
        assert CostTally.from_histogram(hists[r]).per_depth == ref.per_depth


def _first_pivot_quicksort(a):
    if len(a) <= 1:
        return 0
    p = a[0]
    return len(a) - 1 + _first_pivot_quicksort([x for x in a[1:] if x < p]) + \
        _first_pivot_quicksort([x for x in a[1:] if x > p])


@settings(max_examples=50)
@given(st.permutations(list(range(12))))
def test_key_comparisons_kernel(perm):
    assert kernels.key_comparisons(np.array(perm))[0] == _first_pivot_quicksort(perm)


def test_key_comparison_run(rng):
    assert key_comparison_run(0, rng) == 0
    assert key_comparison_run(2, rng) == 1
    # exhaustive mean over all permutations of 6 ranks is E K_6 = 2*7*H_6 - 24
    allk = kernels.key_comparisons(np.array(list(itertools.permutations(range(6)))))
    assert allk.mean() == pytest.approx(14 * (1 + 1 / 2 + 1 / 3 + 1 / 4 + 1 / 5 + 1 / 6) - 24, rel=1e-14)
    with pytest.raises(ValueError):
        key_comparison_run(-1, rng)
