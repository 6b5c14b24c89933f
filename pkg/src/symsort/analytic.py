"""Exact and asymptotic expectations, tameness series, and the limit law of K_n.

``phi(y) = (e^-y - 1 + y) / y^2`` drives the Poissonized key-comparison
mean ``E K(t) = 2 int_0^t (t - y) phi(y) dy``. Since ``0 < phi <= 1/2``,
``E K(s) <= s^2 / 2`` for every ``s``; combined with
``E S(t) = sum_w E K(p_w t)`` this bounds the contribution of any pruned
set of prefixes and certifies every truncated sum below.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, special, stats

from .errors import TailBoundUnavailable

EULER_GAMMA = 0.57721566490153286061

_PHI_SERIES_CUTOFF = 1e-2
# sum_{m>=0} (-1)^m y^m / (m+2)!
_PHI_COEF = np.array([(-1.0) ** m / math.factorial(m + 2) for m in range(12)])
# E K(s) = 2 sum_m (-1)^m s^(m+2) / ((m+2)! (m+1) (m+2)), used for s <= 1
_EK_COEF = np.array([2.0 * (-1.0) ** m / (math.factorial(m + 2) * (m + 1) * (m + 2)) for m in range(24)])


class CertifiedValue(NamedTuple):
    value: float
    bound: float  # 0 <= true value - value <= bound


# -- key comparisons, fixed n ---------------------------------------------------

def harmonic(n: int) -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n <= 10_000:
        return math.fsum(1.0 / k for k in range(1, n + 1))
    return float(special.digamma(n + 1.0)) + EULER_GAMMA


def exp_key_discrete(n: int) -> float:
    """``E K_n = 2 (n+1) H_n - 4 n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 2.0 * (n + 1) * harmonic(n) - 4.0 * n


def exp_key_discrete_asym(n: float) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    ln = math.log(n)
    return 2 * n * ln - (4 - 2 * EULER_GAMMA) * n + 2 * ln + (2 * EULER_GAMMA + 1)


def exp_key_table(n: int) -> np.ndarray:
    """``E K_m`` for ``m = 0..n``."""
    m = np.arange(n + 1, dtype=float)
    H = np.concatenate([[0.0], np.cumsum(1.0 / m[1:])])
    return 2.0 * (m + 1) * H - 4.0 * m


# -- key comparisons, Poissonized -------------------------------------------------

def _phi(y: float) -> float:
    if y < _PHI_SERIES_CUTOFF:
        return float(np.polyval(_PHI_COEF[::-1], y))
    return (math.expm1(-y) + y) / (y * y)


def _panels(t: float):
    edges = [0.0, min(t, 1.0)]
    while edges[-1] < t:
        edges.append(min(2.0 * edges[-1], t))
    return zip(edges[:-1], edges[1:])


def _quad(f, t):
    # tolerances sit at double precision; QUADPACK's roundoff warnings are expected
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        parts = [integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-14, limit=200)[0] for a, b in _panels(t)]
    return math.fsum(parts)


def exp_key_poisson(t):
    """``E K(t)``, the mean key comparisons when ``Poisson(t)`` keys are sorted.

    Accepts a scalar or an array. Arguments up to 1 use the termwise-integrated
    series of ``phi``; larger ones use adaptive quadrature.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("t must be nonnegative")
    out = np.empty(arr.shape)
    flat, res = arr.reshape(-1), out.reshape(-1)
    small = flat <= 1.0
    s = flat[small]
    res[small] = np.polyval(_EK_COEF[::-1], s) * s * s
    for i in np.flatnonzero(~small):
        ti = flat[i]
        res[i] = 2.0 * _quad(lambda y, ti=ti: (ti - y) * _phi(y), ti)
    return float(out) if np.ndim(t) == 0 else out


def exp_key_poisson_asym(t: float) -> float:
    if t < 1:
        raise ValueError("t must be at least 1")
    lt = math.log(t)
    return 2 * t * lt - (4 - 2 * EULER_GAMMA) * t + 2 * lt + (2 * EULER_GAMMA + 2)


def exp_key_poisson_deriv(t: float) -> float:
    """``d(t) = 2 int_0^t phi``, the (increasing) derivative of ``E K(t)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    return 2.0 * _quad(_phi, t)


# -- symbol comparisons -------------------------------------------------------------

# Pruned subtrees are summed through the power series of the per-prefix mean,
# terms j = 2..SERIES_ORDER-1 exactly and the j = SERIES_ORDER term as bound.
SERIES_ORDER = 6


def _aggregate(source, mean_of_p, coef, scale, tol, max_nodes):
    """Sum ``mean_of_p(p_w)`` over all prefixes ``w`` with a certified error below ``tol``.

    ``coef(j)`` is the coefficient of ``p**j`` in the power series of
    ``mean_of_p``, whose terms alternate in sign and shrink in magnitude
    whenever ``p * scale <= 1``. Prefixes below that threshold are pruned and
    each pruned subtree contributes ``sum_j coef(j) p_w**j G_j(state)``.
    Truncating after an odd power leaves a nonnegative remainder no larger
    than the next term, so the returned value never exceeds the true sum.
    """
    source.pi_tail([0])  # raises when sum_k pi_k cannot be certified finite
    threshold = min(1.0, 1.0 / scale)
    while True:
        fr = source.frontier(threshold, k_max=100_000, max_nodes=max_nodes)
        parts = [math.fsum(fr.mult * mean_of_p(fr.p))] if fr.size else []
        slack = []
        for j in range(2, SERIES_ORDER + 1):
            g = source.power_factor(fr.pruned_state, j)
            if g is None:
                raise TailBoundUnavailable(f"no closed-form power sums of order {j} for this source")
            lo, hi = g
            c = coef(j)
            w = fr.pruned_mult * fr.pruned_p**j
            if j == SERIES_ORDER:
                slack.append(abs(c) * float(np.sum(w * hi)))
                break
            parts.append(c * float(np.sum(w * (lo if c > 0 else hi))))
            slack.append(abs(c) * float(np.sum(w * (hi - lo))))
        bound = math.fsum(slack)
        if bound < tol:
            return CertifiedValue(math.fsum(parts), bound)
        threshold /= 4.0


def _key_series_coef(j: int) -> float:
    """``E K_m = sum_j 2 (-1)^j C(m, j) / (j (j-1))``; this returns ``2 (-1)^j / (j (j-1))``."""
    return 2.0 * (-1.0) ** j / (j * (j - 1))


def exp_symbol_poisson(source, t: float, tol: float = 1e-6, max_nodes: int = 2_000_000) -> CertifiedValue:
    """``E S(t) = sum_w E K(p_w t)`` with a certified truncation bound below ``tol``."""
    if t < 0 or not tol > 0:
        raise ValueError("need t >= 0 and tol > 0")
    if t == 0:
        return CertifiedValue(0.0, 0.0)
    return _aggregate(source, lambda p: exp_key_poisson(p * t),
                      lambda j: _key_series_coef(j) * t**j / math.factorial(j), t, tol, max_nodes)


def _binomial_key_mean(n):
    ek = exp_key_table(n)
    m = np.arange(n + 1)

    def mean(p):
        p = np.asarray(p, dtype=float)
        out = np.empty(p.shape)
        for lo in range(0, p.size, 2048):
            pc = p[lo:lo + 2048]
            out[lo:lo + 2048] = stats.binom.pmf(m[None, :], n, pc[:, None]) @ ek
        return out

    return mean


def exp_symbol_discrete(source, n: int, tol: float = 1e-6, max_nodes: int = 2_000_000) -> CertifiedValue:
    """``E S_n = sum_w E[E K_B]`` with ``B ~ Binomial(n, p_w)`` keys sharing prefix ``w``.

    ``E[E K_B] = sum_j 2 (-1)^j C(n, j) p^j / (j (j-1))`` since
    ``E C(B, j) = C(n, j) p^j``.
    """
    if n < 0 or not tol > 0:
        raise ValueError("need n >= 0 and tol > 0")
    if n < 2:
        return CertifiedValue(0.0, 0.0)
    return _aggregate(source, _binomial_key_mean(n), lambda j: _key_series_coef(j) * math.comb(n, j), n, tol, max_nodes)


# -- the limit T of (K_n - E K_n)/(n+1) ------------------------------------------------

def g(u):
    """``1 + 2 u ln u + 2 (1-u) ln(1-u)``, extended by continuity to ``g(0) = g(1) = 1``."""
    u = np.asarray(u, dtype=float)
    out = 1.0 + 2.0 * special.xlogy(u, u) + 2.0 * special.xlogy(1.0 - u, 1.0 - u)
    return float(out) if out.ndim == 0 else out


def t_variance_target() -> float:
    """``Var T = 3 int_0^1 g(u)^2 du``, the fixed point of ``v = (2/3) v + E g(U)^2``."""
    val, _ = integrate.quad(lambda u: g(u) ** 2, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return 3.0 * val


@dataclass(frozen=True)
class FixedPointConfig:
    depth: int
    reps: int
    exact_depth: int = 10  # levels expanded as a full tree with fresh randomness
    pool: int = 1 << 16  # population for the levels below exact_depth

    def __post_init__(self):
        if self.depth < 0 or self.reps < 0:
            raise ValueError("depth and reps must be nonnegative")


def _full_tree(leaves: np.ndarray, levels: int, rng) -> np.ndarray:
    """Apply ``levels`` rounds of ``x = U x1 + (1-U) x2 + g(U)`` pairwise, bottom-up."""
    x = leaves
    for _ in range(levels):
        u = rng.random(x.shape[:-1] + (x.shape[-1] // 2,))
        x = u * x[..., 0::2] + (1.0 - u) * x[..., 1::2] + g(u)
    return x[..., 0]


def fixed_point_sample(cfg: FixedPointConfig, rng: np.random.Generator) -> np.ndarray:
    """Samples of ``T^(d)``: ``T^(0) = 0``, ``T^(d) = U T1^(d-1) + (1-U) T2^(d-1) + g(U)``.

    The top ``min(depth, exact_depth)`` levels are a full binary recursion
    tree with fresh uniforms at every node. Deeper levels, whose weight in the
    variance is at most ``(2/3)^exact_depth``, are drawn from a population of
    ``pool`` draws of ``T^(depth - exact_depth)`` evolved with the same map.
    """
    top = min(cfg.depth, cfg.exact_depth)
    bottom = cfg.depth - top
    width = 1 << top
    if bottom:
        pop = np.zeros(cfg.pool)
        for _ in range(bottom):
            u = rng.random(cfg.pool)
            i = rng.integers(0, cfg.pool, cfg.pool)
            j = (i + rng.integers(1, cfg.pool, cfg.pool)) % cfg.pool  # distinct partners
            pop = u * pop[i] + (1.0 - u) * pop[j] + g(u)
    out = np.empty(cfg.reps)
    chunk = max(1, (1 << 20) // width)
    for lo in range(0, cfg.reps, chunk):
        m = min(chunk, cfg.reps - lo)
        leaves = pop[rng.integers(0, cfg.pool, (m, width))] if bottom else np.zeros((m, width))
        out[lo:lo + m] = _full_tree(leaves, top, rng) if top else leaves[:, 0]
    return out


# -- tameness -------------------------------------------------------------------------

class Verdict(str, enum.Enum):
    CONVERGES = "ConvergesWithBound"
    DIVERGES = "DivergesDetected"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class TamenessReport:
    p: float
    k_max: int
    partial_sums_cond: np.ndarray  # running sums of q_k^(1/p), k = 0..k_max
    partial_sums_pi: np.ndarray  # running sums of pi_k^(1/p)
    tail_cond: float  # certified bound when verdict_cond converges, else an extrapolation
    tail_pi: float
    verdict_cond: Verdict
    verdict_pi: Verdict
    decay: str  # "geometric" or "polynomial"
    rate_cond: float  # geometric ratio or polynomial exponent of q_k
    rate_pi: float
    pi_tamed: tuple | None = None  # (gamma, A) with pi_k <= A (k+1)^-gamma
    notes: list = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        if Verdict.CONVERGES in (self.verdict_cond, self.verdict_pi):
            return Verdict.CONVERGES
        if self.verdict_cond is Verdict.DIVERGES:
            return Verdict.DIVERGES
        return Verdict.INCONCLUSIVE

    @property
    def sum_cond(self) -> float:
        return float(self.partial_sums_cond[-1])

    @property
    def sum_pi(self) -> float:
        return float(self.partial_sums_pi[-1])

    def to_dict(self) -> dict:
        """JSON-ready summary; infinite tails and rates become None."""
        def fin(x):
            return float(x) if math.isfinite(x) else None

        return {
            "p": self.p, "k_max": self.k_max,
            "partial_sum_cond": fin(self.sum_cond), "partial_sum_pi": fin(self.sum_pi),
            "tail_cond": fin(self.tail_cond), "tail_pi": fin(self.tail_pi),
            "verdict_cond": self.verdict_cond.value, "verdict_pi": self.verdict_pi.value,
            "verdict": self.verdict.value, "decay": self.decay,
            "rate_cond": fin(self.rate_cond), "rate_pi": fin(self.rate_pi),
            "pi_tamed": None if self.pi_tamed is None else [fin(x) for x in self.pi_tamed],
            "notes": list(self.notes),
        }


def _geometric_tail(last: float, ratio: float, p: float) -> float:
    """``sum_{j>=1} (last * ratio^j)^(1/p)``."""
    rp = ratio ** (1.0 / p)
    return last ** (1.0 / p) * rp / (1.0 - rp)


def _power_tail(A: float, expo: float, k_max: int) -> float:
    """Bound on ``sum_{k > k_max} A (k+1)^-expo`` by the integral test (``expo > 1``)."""
    return A * (k_max + 1.0) ** (1.0 - expo) / (expo - 1.0)


def _loglog_slope(x: np.ndarray, k_max: int) -> float:
    k = np.arange(max(1, k_max // 2), k_max + 1)
    return float(-np.polyfit(np.log(k + 1.0), np.log(x[k]), 1)[0])


def _geometric_pi_tamed(pi_seq, ratio, gamma):
    # pi_k (k+1)^gamma <= pi_K ratio^(k-K) (k+1)^gamma is decreasing past k* = gamma / -ln(ratio)
    k = np.arange(pi_seq.size)
    return (gamma, float(np.max(pi_seq * (k + 1.0) ** gamma)))


def tameness_report(source, p: float = 2.0, k_max: int = 200, margin: float = 0.05) -> TamenessReport:
    """Partial sums and convergence verdicts for ``sum_k q_k^(1/p)`` and ``sum_k pi_k^(1/p)``.

    ``q_k`` is the sum of squared prefix probabilities at depth ``k`` and
    ``pi_k`` the largest one. ``q_k <= pi_k``, so the second series dominates.
    """
    from .sources import IntermittentSource, MarkovSource, MemorylessSource

    if p < 2:
        raise ValueError("moment order p must be at least 2")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    q = source.depth_weights(k_max)
    pi = source.pi_sequence(k_max)
    ps_cond = np.cumsum(q ** (1.0 / p))
    ps_pi = np.cumsum(pi ** (1.0 / p))
    notes = []

    if isinstance(source, (MemorylessSource, MarkovSource)):
        if isinstance(source, MemorylessSource):
            rc, rp = source.Q, source.p_max
        else:
            rc, rp = source._mu, source.p_max
        tail_cond = _geometric_tail(q[-1], rc, p)
        tail_pi = _geometric_tail(pi[-1], rp, p)
        gam = 2.0 * p
        kk = int(math.ceil(gam / -math.log(rp))) + 1
        pi_long = source.pi_sequence(max(k_max, kk))
        return TamenessReport(p, k_max, ps_cond, ps_pi, tail_cond, tail_pi,
                              Verdict.CONVERGES, Verdict.CONVERGES, "geometric", rc, rp,
                              _geometric_pi_tamed(pi_long, rp, gam), notes)

    if not isinstance(source, IntermittentSource):
        raise TypeError(f"unsupported source {type(source).__name__}")
    gamma = source.gamma
    e_pi = gamma / p
    A = source.tamed_constant(max(k_max, source.TAIL_DEPTH))
    pi_tamed = (gamma, A)
    if e_pi > 1.0:
        v_pi, tail_pi = Verdict.CONVERGES, _power_tail(A ** (1.0 / p), e_pi, k_max)
    else:
        v_pi, tail_pi = Verdict.DIVERGES, math.inf
        notes.append(f"pi_k ~ k^-{gamma:g}/r, so the pi-series has terms ~ k^-{e_pi:g}")
    beta = _loglog_slope(q, k_max)
    e_cond = beta / p
    if v_pi is Verdict.CONVERGES:
        v_cond, tail_cond = Verdict.CONVERGES, tail_pi
    elif e_cond < 1.0 - margin:
        v_cond, tail_cond = Verdict.DIVERGES, math.inf
    else:
        v_cond = Verdict.INCONCLUSIVE
        tail_cond = (q[-1] ** (1.0 / p)) * (k_max + 1.0) / (e_cond - 1.0) if e_cond > 1.0 else math.inf
        notes.append(f"q_k decays like k^-{beta:.3g}; no certified bound without the pi-series")
    return TamenessReport(p, k_max, ps_cond, ps_pi, tail_cond, tail_pi, v_cond, v_pi,
                          "polynomial", beta, gamma, pi_tamed, notes)


# -- moderate deviations of N(t) ---------------------------------------------------------

def moderate_dev_prob(t: float, eps: float) -> float:
    """Lead-order ``P(|N(t) - t| >= t^(1/2 + eps))`` for ``N(t) ~ Poisson(t)``."""
    if t < 1 or not 0 < eps < 1 / 6:
        raise ValueError("need t >= 1 and 0 < eps < 1/6")
    return math.sqrt(2.0 / math.pi) * t**-eps * math.exp(-0.5 * t ** (2 * eps))
