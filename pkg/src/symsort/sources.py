"""Probabilistic sources over a finite ordered alphabet ``{0, ..., r-1}``.

A source is a random process emitting an infinite symbol string (a key).
Three families are supported: memoryless (iid symbols), Markov (symbols form
a Markov chain with an explicit initial law) and intermittent (the law of
the next symbol depends only on the length ``k`` of the trailing run of a
distinguished symbol ``sigma``: uniform when ``k = 0``, otherwise mass
``(k/(k+1))**gamma`` on ``sigma`` and the rest spread evenly).

Keys are generated lazily from a counter-based SplitMix64 stream keyed by
``(key_seed, index)``, so requesting symbols in any order gives the same key.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .errors import FrontierOverflow, InvalidSpec, TailBoundUnavailable

PROB_TOL = 1e-12
MAX_ALPHABET = 256  # symbols are stored as uint8

Prefix = tuple


@dataclass(frozen=True)
class MemorylessSpec:
    probs: tuple


@dataclass(frozen=True)
class MarkovSpec:
    init: tuple
    trans: tuple


@dataclass(frozen=True)
class IntermittentSpec:
    r: int
    gamma: float
    sigma: int = 0


SourceSpec = Union[MemorylessSpec, MarkovSpec, IntermittentSpec]

_FIELDS = {
    "memoryless": ("probs",),
    "markov": ("init", "trans"),
    "intermittent": ("r", "gamma", "sigma"),
}


def spec_from_dict(d: dict) -> SourceSpec:
    if not isinstance(d, dict) or "type" not in d:
        raise InvalidSpec("source spec must be a JSON object with a 'type' field")
    kind = d["type"]
    if kind not in _FIELDS:
        raise InvalidSpec(f"unknown source type {kind!r}")
    keys = set(d) - {"type"}
    if keys != set(_FIELDS[kind]):
        raise InvalidSpec(f"{kind} source needs fields {_FIELDS[kind]}, got {sorted(keys)}")
    try:
        if kind == "memoryless":
            return MemorylessSpec(tuple(float(x) for x in d["probs"]))
        if kind == "markov":
            return MarkovSpec(
                tuple(float(x) for x in d["init"]),
                tuple(tuple(float(x) for x in row) for row in d["trans"]),
            )
        r = d["r"]
        sigma = d["sigma"]
        if isinstance(r, bool) or isinstance(sigma, bool) or int(r) != r or int(sigma) != sigma:
            raise InvalidSpec("intermittent r and sigma must be integers")
        return IntermittentSpec(int(r), float(d["gamma"]), int(sigma))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"malformed {kind} source: {exc}") from exc


def spec_to_dict(spec: SourceSpec) -> dict:
    if isinstance(spec, MemorylessSpec):
        return {"type": "memoryless", "probs": list(spec.probs)}
    if isinstance(spec, MarkovSpec):
        return {"type": "markov", "init": list(spec.init), "trans": [list(r) for r in spec.trans]}
    if isinstance(spec, IntermittentSpec):
        return {"type": "intermittent", "r": spec.r, "gamma": spec.gamma, "sigma": spec.sigma}
    raise InvalidSpec(f"not a source spec: {spec!r}")


def _prob_vector(v, what) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise InvalidSpec(f"{what} must be a nonempty vector")
    if a.size > MAX_ALPHABET:
        raise InvalidSpec(f"{what}: alphabet size {a.size} exceeds {MAX_ALPHABET}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise InvalidSpec(f"{what} has negative or non-finite entries")
    if abs(math.fsum(a) - 1.0) > PROB_TOL:
        raise InvalidSpec(f"{what} sums to {math.fsum(a)!r}, not 1")
    return a


def make_source(spec: SourceSpec | dict) -> "Source":
    """Validate ``spec`` and build the corresponding source model."""
    if isinstance(spec, dict):
        spec = spec_from_dict(spec)
    if isinstance(spec, MemorylessSpec):
        return MemorylessSource(spec)
    if isinstance(spec, MarkovSpec):
        return MarkovSource(spec)
    if isinstance(spec, IntermittentSpec):
        return IntermittentSource(spec)
    raise InvalidSpec(f"not a source spec: {spec!r}")


def load_source(path) -> "Source":
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path}: invalid JSON ({exc})") from exc
    return make_source(d)


def shipped_sources() -> dict:
    """The example sources bundled in ``symsort/data``, by file stem."""
    out = {}
    for entry in sorted(resources.files("symsort").joinpath("data").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = make_source(json.loads(entry.read_text()))
    return out


@dataclass
class Frontier:
    """Prefix classes retained by a probability-threshold expansion.

    Retained classes have ``p >= threshold``; pruned entries are the roots of
    the subtrees that were not expanded. Each class stands for ``mult``
    prefixes of the same probability.
    """

    p: np.ndarray
    mult: np.ndarray
    depth: np.ndarray
    pruned_p: np.ndarray
    pruned_mult: np.ndarray
    pruned_depth: np.ndarray
    pruned_state: np.ndarray

    @property
    def size(self) -> int:
        return int(self.p.size)


class Source:
    """Base class. Subclasses define the conditional law on generator states."""

    spec: SourceSpec
    r: int
    p_max: float
    initial_state = 0

    # -- conditional law ---------------------------------------------------
    def _cond(self, state) -> np.ndarray:
        raise NotImplementedError

    def _next(self, state, s):
        raise NotImplementedError

    def prefix_prob(self, w: Sequence[int]) -> float:
        p = 1.0
        state = self.initial_state
        for s in w:
            s = int(s)
            if not 0 <= s < self.r:
                raise InvalidSpec(f"symbol {s} outside alphabet of size {self.r}")
            p *= float(self._cond(state)[s])
            state = self._next(state, s)
        return p

    def pi_k(self, k: int) -> float:
        """Largest prefix probability over all prefixes of length ``k``."""
        return float(self.pi_sequence(k)[k])

    def depth_weight(self, k: int) -> float:
        """Sum of squared prefix probabilities over all prefixes of length ``k``."""
        return float(self.depth_weights(k)[k])

    def pi_sequence(self, kmax: int) -> np.ndarray:
        raise NotImplementedError

    def depth_weights(self, kmax: int) -> np.ndarray:
        raise NotImplementedError

    def symbol_table(self, length: int) -> kernels.SymbolTable:
        raise NotImplementedError

    # -- tail certificates ---------------------------------------------------
    def pi_tail(self, depths) -> np.ndarray:
        """Certified upper bounds on ``sum_{k >= d} pi_k`` for each ``d``."""
        raise NotImplementedError

    def power_factor(self, states, j: int):
        """Bounds ``(lo, hi)`` on ``G_j(s) = sum_{u extends w} (p_u / p_w)**j`` for ``w`` ending in state ``s``.

        The sum includes ``u = w``. Returns None when no closed form is known.
        """
        return None

    # -- frontier expansion ----------------------------------------------------
    def _children(self, states):
        """Vectorized children of states: (cond probs, next states, multiplicity), each (N, c)."""
        raise NotImplementedError

    def frontier(self, threshold: float, k_max: int, max_nodes: int = 2_000_000) -> Frontier:
        p = np.array([1.0])
        mult = np.array([1.0])
        st = np.array([self.initial_state], dtype=np.int64)
        ret, pruned = [], []
        if threshold > 1.0:
            pruned.append((p, mult, np.zeros(1, np.int64), st))
            p = p[:0]
        depth = 0
        total = p.size
        while p.size:
            ret.append((p, mult, np.full(p.size, depth, np.int64)))
            cond, nxt, mf = self._children(st)
            cp = p[:, None] * cond
            cm = mult[:, None] * mf
            positive = cp > 0
            keep = (cp >= threshold) if depth < k_max else np.zeros_like(positive)
            drop = positive & ~keep
            pruned.append((cp[drop], cm[drop], np.full(int(drop.sum()), depth + 1, np.int64), nxt[drop]))
            p, mult, st = cp[keep], cm[keep], nxt[keep]
            total += p.size
            if total > max_nodes:
                raise FrontierOverflow(f"more than {max_nodes} prefix classes above threshold {threshold:g}")
            depth += 1
        return _assemble(ret, pruned)


def _assemble(ret, pruned) -> Frontier:
    def cat(parts, i, dtype):
        return np.concatenate([x[i] for x in parts]).astype(dtype) if parts else np.zeros(0, dtype)

    return Frontier(
        cat(ret, 0, float), cat(ret, 1, float), cat(ret, 2, np.int64),
        cat(pruned, 0, float), cat(pruned, 1, float), cat(pruned, 2, np.int64), cat(pruned, 3, np.int64),
    )


class MemorylessSource(Source):
    def __init__(self, spec: MemorylessSpec):
        self.spec = spec
        self.probs = _prob_vector(spec.probs, "probs")
        self.r = self.probs.size
        self.p_max = float(self.probs.max())
        if self.p_max >= 1.0:
            raise InvalidSpec("memoryless source concentrated on a single symbol (p_max = 1)")
        self.Q = float(np.sum(self.probs**2))
        self._table = kernels.SymbolTable(kernels.KIND_MEMORYLESS, np.cumsum(self.probs)[None, :])

    def _cond(self, state):
        return self.probs

    def _next(self, state, s):
        return 0

    def pi_sequence(self, kmax):
        return self.p_max ** np.arange(kmax + 1, dtype=float)

    def depth_weights(self, kmax):
        return self.Q ** np.arange(kmax + 1, dtype=float)

    def symbol_table(self, length):
        return self._table

    def pi_tail(self, depths):
        return self.p_max ** np.asarray(depths, dtype=float) / (1.0 - self.p_max)

    def power_factor(self, states, j):
        g = np.full(np.shape(states), 1.0 / (1.0 - float(np.sum(self.probs**j))))
        return g, g

    def frontier(self, threshold, k_max, max_nodes=2_000_000):
        # Prefixes with equal symbol counts share a probability; expand count
        # profiles and carry the number of prefixes in each.
        r = self.r
        ret, pruned = [], []
        if threshold > 1.0:
            return _assemble([], [(np.ones(1), np.ones(1), np.zeros(1, np.int64), np.zeros(1, np.int64))])
        level = {(0,) * r: (1.0, 1.0)}
        depth = 0
        total = 1
        while level:
            vals = np.array(list(level.values()))
            ret.append((vals[:, 0], vals[:, 1], np.full(len(level), depth, np.int64)))
            nxt = {}
            pp, pm = [], []
            for prof, (p, m) in level.items():
                for s in range(r):
                    ps = self.probs[s]
                    if ps == 0.0:
                        continue
                    cp = p * ps
                    if depth < k_max and cp >= threshold:
                        key = prof[:s] + (prof[s] + 1,) + prof[s + 1:]
                        if key in nxt:
                            nxt[key] = (nxt[key][0], nxt[key][1] + m)
                        else:
                            nxt[key] = (cp, m)
                    else:
                        pp.append(cp)
                        pm.append(m)
            pruned.append((np.array(pp), np.array(pm), np.full(len(pp), depth + 1, np.int64),
                           np.zeros(len(pp), np.int64)))
            level = nxt
            total += len(level)
            if total > max_nodes:
                raise FrontierOverflow(f"more than {max_nodes} prefix classes above threshold {threshold:g}")
            depth += 1
        return _assemble(ret, pruned)


class MarkovSource(Source):
    """Markov chain symbols. State 0 is "no symbol yet"; state ``s + 1`` follows symbol ``s``."""

    def __init__(self, spec: MarkovSpec):
        self.spec = spec
        self.init = _prob_vector(spec.init, "init")
        self.r = self.init.size
        trans = np.asarray(spec.trans, dtype=np.float64)
        if trans.shape != (self.r, self.r):
            raise InvalidSpec(f"trans must be {self.r}x{self.r}, got shape {trans.shape}")
        for i, row in enumerate(trans):
            _prob_vector(row, f"trans row {i}")
        self.trans = trans
        self.p_max = float(trans.max())
        if self.p_max >= 1.0:
            raise InvalidSpec("a Markov transition row puts all mass on one symbol")
        self._sq = trans**2
        self._mu = float(self._sq.sum(axis=1).max())  # q_{k+1} <= mu * q_k
        self._cond_rows = np.vstack([self.init, trans])
        self._table = kernels.SymbolTable(kernels.KIND_MARKOV, np.cumsum(self._cond_rows, axis=1))
        self._pi = np.array([1.0])

    def _cond(self, state):
        return self._cond_rows[state]

    def _next(self, state, s):
        return s + 1

    def pi_sequence(self, kmax):
        if self._pi.size <= kmax:
            out = np.empty(max(kmax + 1, 2 * self._pi.size))
            out[0] = 1.0
            v = self.init.copy()
            for k in range(1, out.size):
                out[k] = v.max()
                v = (v[:, None] * self.trans).max(axis=0)
            self._pi = out
        return self._pi[: kmax + 1].copy()

    def depth_weights(self, kmax):
        out = np.empty(kmax + 1)
        out[0] = 1.0
        v = self.init**2
        for k in range(1, kmax + 1):
            out[k] = v.sum()
            v = v @ self._sq
        return out

    def symbol_table(self, length):
        return self._table

    def pi_tail(self, depths):
        depths = np.asarray(depths, dtype=np.int64)
        kmax = int(depths.max(initial=0)) + 1
        pi = self.pi_sequence(kmax)
        # sum_{k >= kmax} pi_k <= pi_kmax / (1 - rho) since pi_{k+1} <= rho * pi_k
        tail = np.cumsum(pi[::-1])[::-1]
        tail = tail - pi[kmax] + pi[kmax] / (1.0 - self.p_max)
        return tail[depths]

    def power_factor(self, states, j):
        # G_j on states 1..r solves (I - T**j) G = 1, entrywise power
        G = np.linalg.solve(np.eye(self.r) - self.trans**j, np.ones(self.r))
        full = np.concatenate([[1.0 + float(self.init**j @ G)], G])
        g = full[np.asarray(states, dtype=np.int64)]
        return g, g

    def _children(self, states):
        cond = self._cond_rows[states]
        nxt = np.broadcast_to(np.arange(1, self.r + 1), cond.shape)
        return cond, nxt, np.ones_like(cond)


class IntermittentSource(Source):
    """Run-length driven source; the generator state is the trailing ``sigma`` run length."""

    # Beyond this depth the maximal prefix is taken to be sigma^k, as holds for
    # all large k; pi_tail checks the exact value has already settled there.
    TAIL_DEPTH = 512

    def __init__(self, spec: IntermittentSpec):
        self.spec = spec
        r, gamma, sigma = spec.r, spec.gamma, spec.sigma
        if not 2 <= r <= MAX_ALPHABET:
            raise InvalidSpec(f"intermittent alphabet size must be in [2, {MAX_ALPHABET}], got {r}")
        if not (math.isfinite(gamma) and gamma > 0):
            raise InvalidSpec(f"intermittent exponent gamma must be > 0, got {gamma}")
        if not 0 <= sigma < r:
            raise InvalidSpec(f"sigma must lie in [0, {r}), got {sigma}")
        self.r, self.gamma, self.sigma = r, float(gamma), sigma
        self.p_max = 1.0 / r  # first-symbol law is uniform
        self._tables = {}
        self._dp = {}

    def _a(self, m):
        """Probability of continuing a run of length ``m`` with ``sigma``."""
        m = np.asarray(m, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (m / (m + 1.0)) ** self.gamma
        return np.where(m == 0, 1.0 / self.r, a)

    def _b(self, m):
        """Probability of each individual non-``sigma`` symbol after a run of length ``m``."""
        m = np.asarray(m, dtype=float)
        return np.where(m == 0, 1.0 / self.r, (1.0 - self._a(m)) / (self.r - 1))

    def _cond(self, state):
        row = np.full(self.r, float(self._b(state)))
        row[self.sigma] = float(self._a(state))
        return row

    def _next(self, state, s):
        return state + 1 if s == self.sigma else 0

    def _run_dp(self, kmax, mode):
        cached = self._dp.get(mode)
        if cached is not None and cached.size > kmax:
            return cached[: kmax + 1].copy()
        out = np.empty(kmax + 1)
        out[0] = 1.0
        v = np.array([1.0])
        for k in range(1, kmax + 1):
            m = np.arange(v.size)
            a, b = self._a(m), self._b(m)
            new = np.empty(v.size + 1)
            if mode == "max":
                new[1:] = v * a
                new[0] = (v * b).max()
                out[k] = new.max()
            else:
                new[1:] = v * a**2
                new[0] = (self.r - 1) * (v * b**2).sum()
                out[k] = new.sum()
            v = new
        self._dp[mode] = out
        return out.copy()

    def pi_sequence(self, kmax):
        return self._run_dp(kmax, "max")

    def depth_weights(self, kmax):
        return self._run_dp(kmax, "sum")

    def symbol_table(self, length):
        rows = 64
        while rows < length:
            rows *= 2
        tab = self._tables.get(rows)
        if tab is None:
            m = np.arange(rows)
            probs = np.repeat(self._b(m)[:, None], self.r, axis=1)
            probs[:, self.sigma] = self._a(m)
            tab = kernels.SymbolTable(kernels.KIND_INTERMITTENT, np.cumsum(probs, axis=1), self.sigma)
            self._tables[rows] = tab
        return tab

    def tamed_constant(self, kmax=None):
        """Smallest ``A`` with ``pi_k <= A (k+1)**-gamma`` for ``k <= kmax``."""
        kmax = self.TAIL_DEPTH if kmax is None else kmax
        pi = self.pi_sequence(kmax)
        return float(np.max(pi * (np.arange(kmax + 1) + 1.0) ** self.gamma))

    def pi_tail(self, depths):
        if self.gamma <= 1.0:
            raise TailBoundUnavailable(
                f"sum of pi_k diverges for an intermittent source with gamma={self.gamma} <= 1"
            )
        depths = np.asarray(depths, dtype=np.int64)
        K = max(self.TAIL_DEPTH, int(depths.max(initial=0)))
        pi = self.pi_sequence(K)
        settled = self.r**-1.0 * K**-self.gamma
        if abs(pi[K] - settled) > 1e-9 * settled:
            raise TailBoundUnavailable(f"max prefix probability not yet attained by sigma^k at k={K}")
        A = float(np.max(pi * (np.arange(K + 1) + 1.0) ** self.gamma))
        beyond = A * (K + 1.0) ** (1.0 - self.gamma) / (self.gamma - 1.0)
        tail = np.cumsum(pi[::-1])[::-1] + beyond
        return tail[depths]

    POWER_TERMS = 4096

    def power_factor(self, states, j):
        # G_j(m) = 1 + a_m^j G_j(m+1) + (r-1) b_m^j G_j(0). Unrolling along
        # sigma-continuations gives G_j(m) = C(m) + D(m) G_j(0) with
        # C(m) = sum_l W_l(m), W_l(m) = (m/(m+l))^(j gamma) for m >= 1, and
        # D(m) = (r-1) sum_l W_l(m) b_{m+l}^j. The sums are truncated after
        # POWER_TERMS terms and the rest bracketed by the integral test.
        e = j * self.gamma
        if e <= 1.0:
            return None
        states = np.asarray(states, dtype=np.int64)
        uniq, inv = np.unique(np.append(states, 1), return_inverse=True)
        m = np.maximum(uniq, 1).astype(float)
        L = self.POWER_TERMS
        C = np.empty((2, m.size))
        D = np.empty((2, m.size))
        l = np.arange(L)[None, :]
        for lo in range(0, m.size, 256):
            mm = m[lo:lo + 256, None]
            W = (mm / (mm + l)) ** e
            # integral test on both sides of sum_{l >= L} (m/(m+l))^e
            tail_c = mm[:, 0] ** e * (mm[:, 0] + L - 1.0) ** (1.0 - e) / (e - 1.0)
            tail_lo = mm[:, 0] ** e * (mm[:, 0] + L) ** (1.0 - e) / (e - 1.0)
            cw = W.sum(axis=1)
            dw = (self.r - 1) * (W * self._b(mm + l) ** j).sum(axis=1)
            C[0, lo:lo + 256], C[1, lo:lo + 256] = cw + tail_lo, cw + tail_c
            D[0, lo:lo + 256] = dw
            D[1, lo:lo + 256] = dw + (self.r - 1) * self._b(mm[:, 0] + L) ** j * tail_c  # b decreasing past 0
        one = int(np.flatnonzero(uniq == 1)[0])
        a0 = (1.0 / self.r) ** j
        out = []
        for c, d in zip(C, D):
            c0 = 1.0 + a0 * c[one]
            d0 = (self.r - 1) * self.r**-float(j) + a0 * d[one]
            if not d0 < 1.0:
                return None
            g0 = c0 / (1.0 - d0)
            out.append(np.where(uniq == 0, g0, c + d * g0)[inv[:-1]])
        return out[0], out[1]

    def _children(self, states):
        m = np.asarray(states, dtype=np.int64)
        cond = np.stack([self._a(m), self._b(m)], axis=1)
        nxt = np.stack([m + 1, np.zeros_like(m)], axis=1)
        mult = np.broadcast_to(np.array([1.0, self.r - 1.0]), cond.shape)
        return cond, nxt, mult


@dataclass
class PrefixEnumeration:
    retained: list = field(default_factory=list)  # (prefix, p_w), depth-first order
    pruned: list = field(default_factory=list)  # (subtree root prefix, p_w)

    def by_depth(self) -> dict:
        out = {}
        for w, p in self.retained:
            out.setdefault(len(w), []).append((w, p))
        return out


def enumerate_prefixes(source: Source, threshold: float, k_max: int, max_nodes: int = 1_000_000) -> PrefixEnumeration:
    """Depth-first expansion of every prefix with ``p_w >= threshold`` and ``|w| <= k_max``.

    Children of retained prefixes that fall below the threshold, or that lie
    below depth ``k_max``, are reported as pruned subtree roots.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    out = PrefixEnumeration()
    if threshold > 1.0:
        out.pruned.append(((), 1.0))
        return out
    stack = [((), 1.0, source.initial_state)]
    while stack:
        w, p, state = stack.pop()
        out.retained.append((w, p))
        if len(out.retained) > max_nodes:
            raise FrontierOverflow(f"more than {max_nodes} prefixes above threshold {threshold:g}")
        cond = source._cond(state)
        children = []
        for s in range(source.r):
            c = float(cond[s])
            if c == 0.0:
                continue
            cw, cp = w + (s,), p * c
            if len(w) < k_max and cp >= threshold:
                children.append((cw, cp, source._next(state, s)))
            else:
                out.pruned.append((cw, cp))
        stack.extend(reversed(children))
    return out


class Key:
    """A lazily generated, memoized infinite key."""

    __slots__ = ("source", "key_seed", "_buf")

    def __init__(self, source: Source, key_seed: int):
        self.source = source
        self.key_seed = int(key_seed) & kernels._hash.MASK64
        self._buf: list = []

    def __repr__(self):
        head = "".join(str(s) for s in self._buf[:16])
        return f"Key(seed={self.key_seed:#x}, materialized={len(self._buf)}, head={head!r})"

    @property
    def materialized(self) -> int:
        return len(self._buf)

    def _extend(self, n: int) -> None:
        length = max(n, 2 * len(self._buf), 32)
        row = kernels.symbol_matrix(np.array([self.key_seed], np.uint64), length,
                                    self.source.symbol_table(length))[0]
        self._buf.extend(row[len(self._buf):].tolist())

    def symbol_at(self, i: int) -> int:
        if i < 0:
            raise IndexError("symbol index must be nonnegative")
        if i >= len(self._buf):
            self._extend(i + 1)
        return self._buf[i]

    def prefix(self, k: int) -> Prefix:
        if k > len(self._buf):
            self._extend(k)
        return tuple(self._buf[:k])


def keys_from_seeds(source: Source, seeds: Iterable[int]) -> list:
    return [Key(source, int(s)) for s in seeds]
