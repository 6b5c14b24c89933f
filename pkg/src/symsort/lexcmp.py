"""Lexicographic key comparison with symbol-level cost accounting.

Deciding the order of two keys whose longest common prefix has length ``k``
inspects ``k + 1`` symbol pairs. A tally attributes such a comparison to
every depth ``0..k``: it is one comparison of (d+1)st symbols for each of
those depths, so the total symbol count is exactly the sum of the per-depth
counts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DepthCapExceeded

DEFAULT_DEPTH_CAP = 10_000
DEFAULT_PREFIX_DEPTH = 8


class Order(enum.IntEnum):
    LESS = -1
    GREATER = 1


@dataclass(frozen=True)
class CompareOutcome:
    order: Order
    cost: int
    lcp: int


def compare_count(a, b, depth_cap: int = DEFAULT_DEPTH_CAP) -> CompareOutcome:
    """Compare keys ``a`` and ``b`` symbol by symbol.

    Raises DepthCapExceeded when the first ``depth_cap`` symbols agree, which
    for a continuous source means the keys are (almost surely) the same key.
    """
    if depth_cap < 1:
        raise ValueError("depth_cap must be at least 1")
    sym_a, sym_b = a.symbol_at, b.symbol_at
    for i in range(depth_cap):
        x, y = sym_a(i), sym_b(i)
        if x != y:
            return CompareOutcome(Order.LESS if x < y else Order.GREATER, i + 1, i)
    raise DepthCapExceeded(f"keys agree on their first {depth_cap} symbols")


@dataclass
class CostTally:
    """Counts for one sorting run.

    ``per_depth[k]`` is the number of comparisons of (k+1)st symbols. When
    ``per_prefix`` is a dict, it also counts comparisons between keys sharing
    each prefix ``w`` with ``len(w) <= prefix_depth``.
    """

    key_comps: int = 0
    symbol_comps: int = 0
    per_depth: list = field(default_factory=list)
    per_prefix: Optional[dict] = None
    prefix_depth: int = DEFAULT_PREFIX_DEPTH

    @classmethod
    def tracking_prefixes(cls, depth: int = DEFAULT_PREFIX_DEPTH) -> "CostTally":
        return cls(per_prefix={}, prefix_depth=depth)

    @classmethod
    def from_histogram(cls, hist) -> "CostTally":
        """Build from ``hist[i]`` = number of comparisons with longest common prefix ``i``."""
        hist = np.asarray(hist, dtype=np.int64)
        nz = np.flatnonzero(hist)
        hist = hist[: nz[-1] + 1] if nz.size else hist[:0]
        per_depth = np.cumsum(hist[::-1])[::-1]
        return cls(
            key_comps=int(hist.sum()),
            symbol_comps=int((hist * np.arange(1, hist.size + 1)).sum()),
            per_depth=[int(x) for x in per_depth],
        )

    @property
    def K(self) -> int:
        return self.key_comps

    @property
    def S(self) -> int:
        return self.symbol_comps

    def record(self, outcome: CompareOutcome, shared_prefix=None) -> "CostTally":
        lcp = outcome.lcp
        self.key_comps += 1
        self.symbol_comps += outcome.cost
        pd = self.per_depth
        if len(pd) <= lcp:
            pd.extend([0] * (lcp + 1 - len(pd)))
        for k in range(lcp + 1):
            pd[k] += 1
        if self.per_prefix is not None:
            top = min(lcp, self.prefix_depth)
            if shared_prefix is None or len(shared_prefix) < top:
                raise ValueError("prefix tracking needs the shared prefix of the compared keys")
            w = tuple(shared_prefix[:top])
            for k in range(top + 1):
                self.per_prefix[w[:k]] = self.per_prefix.get(w[:k], 0) + 1
        return self

    def merge(self, other: "CostTally") -> "CostTally":
        n = max(len(self.per_depth), len(other.per_depth))
        pd = [0] * n
        for src in (self.per_depth, other.per_depth):
            for k, v in enumerate(src):
                pd[k] += v
        prefixes = None
        if self.per_prefix is not None and other.per_prefix is not None:
            prefixes = dict(self.per_prefix)
            for w, v in other.per_prefix.items():
                prefixes[w] = prefixes.get(w, 0) + v
        return CostTally(self.key_comps + other.key_comps, self.symbol_comps + other.symbol_comps,
                         pd, prefixes, min(self.prefix_depth, other.prefix_depth))

    def copy(self) -> "CostTally":
        return CostTally(self.key_comps, self.symbol_comps, list(self.per_depth),
                         None if self.per_prefix is None else dict(self.per_prefix), self.prefix_depth)

    def verify(self) -> None:
        """Check the structural identities; raise AssertionError on violation."""
        pd = self.per_depth
        assert self.symbol_comps == sum(pd), "S != sum_k S_k"
        assert (pd[0] if pd else 0) == self.key_comps, "S_0 != K"
        assert all(x >= y for x, y in zip(pd, pd[1:])), "S_k not nonincreasing"
        assert self.symbol_comps >= self.key_comps
        if self.per_prefix is not None:
            sums: dict = {}
            for w, v in self.per_prefix.items():
                sums[len(w)] = sums.get(len(w), 0) + v
            for k, v in sums.items():
                assert v == pd[k], f"prefix counts at depth {k} do not add up to S_{k}"
