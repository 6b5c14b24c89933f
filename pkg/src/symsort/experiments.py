"""Seeded Monte Carlo runs of QuickSort cost and the statistics built on them.

Every random quantity is addressed by a label path below the master seed:
replicate ``r`` draws its Poisson count or permutation from
``rng_stream(seed, (r,))`` and its keys from the counter-based key seeds of
:func:`symsort.kernels.key_seeds`, so a replicate's sample does not depend
on how many replicates run or in what order they are computed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__, analytic, kernels
from .errors import InsufficientSamples
from .lexcmp import DEFAULT_DEPTH_CAP
from .qsort import batch_counts
from .sources import SourceSpec, make_source, spec_from_dict, spec_to_dict

MODES = ("poisson", "fixed-n", "key-only", "fixed-point")
QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
KEYS_PER_CHUNK = 1 << 18
PERM_CHUNK = 256


def rng_stream(master_seed: int, labels: Sequence[int] = ()) -> np.random.Generator:
    """Generator for the substream at ``labels`` below ``master_seed``."""
    if master_seed < 0 or master_seed >= 1 << 64:
        raise ValueError("master_seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(x) for x in labels))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ExperimentConfig:
    """What to simulate.

    ``t`` applies to mode ``poisson``, ``n`` to ``fixed-n`` and ``key-only``,
    ``depth`` to ``fixed-point``. ``tol`` is the certified accuracy of the
    centering constant; by default it is ``1e-6`` times the divisor, so the
    centering error in ``Y`` stays below ``1e-6``.
    """

    mode: str
    reps: int
    master_seed: int
    source: SourceSpec | None = None
    t: float | None = None
    n: int | None = None
    depth: int | None = None
    depth_cap: int = DEFAULT_DEPTH_CAP
    tol: float | None = None
    control_variate: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.mode in ("poisson", "fixed-n") and self.source is None:
            raise ValueError(f"mode {self.mode} needs a source")
        if self.mode == "poisson" and not (self.t is not None and self.t > 0):
            raise ValueError("poisson mode needs t > 0")
        if self.mode in ("fixed-n", "key-only") and not (self.n is not None and self.n >= 0):
            raise ValueError(f"mode {self.mode} needs n >= 0")
        if self.mode == "fixed-point" and not (self.depth is not None and self.depth >= 0):
            raise ValueError("fixed-point mode needs depth >= 0")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.control_variate and self.mode != "fixed-n":
            raise ValueError("the control variate applies to fixed-n runs only")

    @property
    def divisor(self) -> float:
        if self.mode == "poisson":
            return float(self.t)
        if self.mode == "fixed-n":
            return float(max(self.n, 1))
        if self.mode == "key-only":
            return float(self.n + 1)
        return 1.0

    def centering_tol(self) -> float:
        return self.tol if self.tol is not None else 1e-6 * self.divisor

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "source": None if self.source is None else spec_to_dict(self.source),
            "t": self.t,
            "n": self.n,
            "depth": self.depth,
            "reps": self.reps,
            "master_seed": self.master_seed,
            "depth_cap": self.depth_cap,
            "tol": self.centering_tol() if self.mode in ("poisson", "fixed-n") else None,
            "control_variate": self.control_variate,
            "version": __version__,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        src = d.get("source")
        return cls(mode=d["mode"], reps=d["reps"], master_seed=d["master_seed"],
                   source=None if src is None else spec_from_dict(src), t=d.get("t"),
                   n=d.get("n"), depth=d.get("depth"), depth_cap=d.get("depth_cap", DEFAULT_DEPTH_CAP),
                   tol=d.get("tol"), control_variate=d.get("control_variate", False))


@dataclass(frozen=True)
class EmpiricalStats:
    count: int
    mean: float
    variance: float
    skewness: float
    se_mean: float
    se_variance: float
    se_skewness: float
    quantiles: dict  # level -> type-7 quantile

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantiles"] = {f"{k:g}": v for k, v in self.quantiles.items()}
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalStats":
        d = dict(d)
        d["quantiles"] = {float(k): v for k, v in d["quantiles"].items()}
        return cls(**{k: (math.nan if v is None else v) for k, v in d.items()})


def empirical_stats(samples) -> EmpiricalStats:
    """Moments, type-7 quantiles and delta-method standard errors.

    Standard errors use the influence functions of the central moments
    ``m2``, ``m3``: ``se = sd(IF) / sqrt(n)``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {n}")
    mean = math.fsum(x) / n
    d = x - mean
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        d = np.zeros_like(d)
    m3 = float(np.mean(d**3))
    var = m2 * n / (n - 1)
    if_m2 = d * d - m2
    if m2 > 0:
        skew = m3 / m2**1.5
        if_skew = (d**3 - m3 - 3.0 * m2 * d) / m2**1.5 - 1.5 * skew * if_m2 / m2
        se_skew = float(np.std(if_skew) / math.sqrt(n))
    else:
        skew, se_skew = math.nan, math.nan
    qs = np.quantile(x, QUANTILE_LEVELS, method="linear")
    return EmpiricalStats(
        count=n, mean=mean, variance=var, skewness=skew,
        se_mean=math.sqrt(var / n), se_variance=float(np.std(if_m2) / math.sqrt(n)),
        se_skewness=se_skew, quantiles={lv: float(q) for lv, q in zip(QUANTILE_LEVELS, qs)},
    )


def ks_distance(a, b) -> float:
    """Sup-norm distance between the empirical CDFs of ``a`` and ``b``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if not a.size or not b.size:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical_value(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value at level ``alpha``."""
    if n < 1 or m < 1 or not 0 < alpha < 1:
        raise ValueError("need n, m >= 1 and 0 < alpha < 1")
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) * math.sqrt((n + m) / (n * m))


def moderate_dev_check(t: float, eps: float, reps: int, rng: np.random.Generator):
    """Frequency of ``|N(t) - t| >= t^(1/2 + eps)`` over ``reps`` Poisson draws, and its lead-order value."""
    analytic_value = analytic.moderate_dev_prob(t, eps)
    if analytic_value * reps < 10:
        raise ValueError(f"reps={reps} too few to resolve a probability of {analytic_value:.3g}")
    N = rng.poisson(t, reps)
    hits = np.abs(N - t) >= t ** (0.5 + eps)
    return float(np.mean(hits)), analytic_value


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    N: np.ndarray | None
    K: np.ndarray | None
    S: np.ndarray | None
    Y: np.ndarray
    per_depth: list | None
    centering: dict
    stats: EmpiricalStats | None
    adjusted: np.ndarray | None = None  # control-variate samples when enabled
    extra: dict = field(default_factory=dict)

    @property
    def reps(self) -> int:
        return int(self.Y.size)

    def replicates(self) -> list:
        out = []
        for r in range(self.reps):
            rec = {"rep": r}
            for name in ("N", "K", "S"):
                arr = getattr(self, name)
                rec[name] = None if arr is None else int(arr[r])
            rec["Y"] = float(self.Y[r])
            if self.adjusted is not None:
                rec["Y_adjusted"] = float(self.adjusted[r])
            if self.per_depth is not None:
                rec["per_depth"] = list(self.per_depth[r])
            out.append(rec)
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "centering": self.centering,
            "replicates": self.replicates(),
            "stats": None if self.stats is None else self.stats.to_dict(),
        }


def _stats_or_none(x):
    return empirical_stats(x) if np.size(x) >= 2 else None


def _per_depth(hist) -> list:
    h = np.asarray(hist, dtype=np.int64)
    nz = np.flatnonzero(h)
    h = h[: nz[-1] + 1] if nz.size else h[:0]
    return [int(v) for v in np.cumsum(h[::-1])[::-1]]


def _simulate_counts(source, sizes: np.ndarray, cfg: ExperimentConfig):
    reps = sizes.size
    K = np.zeros(reps, np.int64)
    S = np.zeros(reps, np.int64)
    per_depth = [None] * reps
    lo = 0
    while lo < reps:
        hi = lo + 1
        total = int(sizes[lo])
        while hi < reps and total + sizes[hi] <= KEYS_PER_CHUNK:
            total += int(sizes[hi])
            hi += 1
        seeds = np.concatenate([kernels.key_seeds(cfg.master_seed, r, int(sizes[r])) for r in range(lo, hi)])
        offsets = np.concatenate([[0], np.cumsum(sizes[lo:hi])])
        k, s, hists = batch_counts(source, seeds, offsets, cfg.depth_cap)
        K[lo:hi], S[lo:hi] = k, s
        for i, h in enumerate(hists):
            per_depth[lo + i] = _per_depth(h)
        lo = hi
    return K, S, per_depth


def run_poisson(cfg: ExperimentConfig) -> ExperimentResult:
    """Replicates of ``S(t)`` with ``N ~ Poisson(t)`` keys and ``Y = (S - E S(t)) / t``."""
    if cfg.mode != "poisson":
        raise ValueError("run_poisson needs a poisson config")
    source = make_source(cfg.source)
    center = analytic.exp_symbol_poisson(source, cfg.t, tol=cfg.centering_tol())
    N = np.array([rng_stream(cfg.master_seed, (r,)).poisson(cfg.t) for r in range(cfg.reps)], dtype=np.int64)
    K, S, per_depth = _simulate_counts(source, N, cfg)
    Y = (S - center.value) / cfg.t
    centering = {"kind": "symbol-t", "value": center.value, "bound": center.bound, "divisor": cfg.t}
    return ExperimentResult(cfg, N, K, S, Y, per_depth, centering, _stats_or_none(Y))


def run_fixed_n(cfg: ExperimentConfig) -> ExperimentResult:
    """Replicates of ``S_n`` and ``Y_n = (S_n - E S_n) / n`` (divisor 1 when ``n = 0``).

    With ``control_variate`` set, ``Y_adjusted = Y - b (K - E K_n) / n`` with
    ``b`` fitted on the whole batch; stats are then those of ``Y_adjusted``.
    """
    if cfg.mode != "fixed-n":
        raise ValueError("run_fixed_n needs a fixed-n config")
    source = make_source(cfg.source)
    n = cfg.n
    center = analytic.exp_symbol_discrete(source, n, tol=cfg.centering_tol())
    N = np.full(cfg.reps, n, dtype=np.int64)
    K, S, per_depth = _simulate_counts(source, N, cfg)
    div = cfg.divisor
    Y = (S - center.value) / div
    centering = {"kind": "symbol-n", "value": center.value, "bound": center.bound, "divisor": div}
    adjusted = None
    samples = Y
    if cfg.control_variate:
        ek = analytic.exp_key_discrete(n)
        Z = (K - ek) / div
        vz = float(np.var(Z))
        coef = float(np.mean((Z - Z.mean()) * (Y - Y.mean())) / vz) if vz > 0 else 0.0
        adjusted = Y - coef * Z
        samples = adjusted
        centering["control_variate"] = {"key_mean": ek, "coefficient": coef}
    return ExperimentResult(cfg, N, K, S, Y, per_depth, centering, _stats_or_none(samples), adjusted)


def run_key_only(cfg: ExperimentConfig) -> ExperimentResult:
    """Replicates of ``(K_n - E K_n) / (n + 1)`` from uniformly random permutations."""
    if cfg.mode != "key-only":
        raise ValueError("run_key_only needs a key-only config")
    n = cfg.n
    K = np.zeros(cfg.reps, np.int64)
    for lo in range(0, cfg.reps, PERM_CHUNK):
        hi = min(lo + PERM_CHUNK, cfg.reps)
        perms = np.stack([rng_stream(cfg.master_seed, (r,)).permutation(n) for r in range(lo, hi)]) \
            if n else np.zeros((hi - lo, 0), np.int64)
        K[lo:hi] = kernels.key_comparisons(perms)
    ek = analytic.exp_key_discrete(n)
    Y = (K - ek) / (n + 1)
    centering = {"kind": "key-n", "value": ek, "bound": 0.0, "divisor": float(n + 1)}
    return ExperimentResult(cfg, np.full(cfg.reps, n, np.int64), K, None, Y, None, centering, _stats_or_none(Y))


def run_fixed_point(cfg: ExperimentConfig) -> ExperimentResult:
    """Samples of the depth-``d`` iterate of the limit map for ``T``."""
    if cfg.mode != "fixed-point":
        raise ValueError("run_fixed_point needs a fixed-point config")
    Y = analytic.fixed_point_sample(analytic.FixedPointConfig(cfg.depth, cfg.reps), rng_stream(cfg.master_seed, (0,)))
    centering = {"kind": "none", "value": 0.0, "bound": 0.0, "divisor": 1.0}
    return ExperimentResult(cfg, None, None, None, Y, None, centering, _stats_or_none(Y),
                            extra={"variance_target": analytic.t_variance_target()})


_RUNNERS = {"poisson": run_poisson, "fixed-n": run_fixed_n, "key-only": run_key_only, "fixed-point": run_fixed_point}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return _RUNNERS[cfg.mode](cfg)
