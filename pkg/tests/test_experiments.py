import math

import numpy as np
import pytest
from scipy import stats

from symsort import InsufficientSamples, analytic
from symsort import experiments as ex
from symsort.sources import spec_from_dict

from conftest import FAIR, SHIPPED

FAIR_SPEC = spec_from_dict(FAIR)


def cfg(mode, reps=50, seed=1, **kw):
    if mode in ("poisson", "fixed-n") and "source" not in kw:
        kw["source"] = FAIR_SPEC
    return ex.ExperimentConfig(mode, reps, seed, **kw)


# -- streams ---------------------------------------------------------------------------

def test_rng_stream_determinism():
    a = ex.rng_stream(5, (1, 2)).random(100)
    b = ex.rng_stream(5, (1, 2)).random(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(ex.rng_stream(5, (0,)).random(10), ex.rng_stream(5, (1,)).random(10))
    assert not np.array_equal(ex.rng_stream(5, (1,)).random(10), ex.rng_stream(6, (1,)).random(10))


def test_rng_stream_sibling_independence():
    a = ex.rng_stream(9, (0,)).random(10**6)
    b = ex.rng_stream(9, (1,)).random(10**6)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_rng_stream_seed_range():
    with pytest.raises(ValueError):
        ex.rng_stream(-1)
    with pytest.raises(ValueError):
        ex.rng_stream(1 << 64)


# -- KS and summary statistics ---------------------------------------------------------------

def test_ks_examples():
    assert ex.ks_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert ex.ks_distance([0, 1], [2, 3, 4]) == 1.0
    assert ex.ks_distance([1, 2], [1.5]) == 0.5
    with pytest.raises(ValueError):
        ex.ks_distance([], [1.0])


def test_ks_matches_scipy(rng):
    for _ in range(20):
        a = rng.normal(size=rng.integers(1, 300))
        b = rng.normal(0.2, 1.3, size=rng.integers(1, 300))
        assert ex.ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-15)
    a = rng.integers(0, 5, 200).astype(float)  # ties
    b = rng.integers(0, 6, 150).astype(float)
    assert ex.ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-15)


def test_ks_critical_value():
    assert ex.ks_critical_value(5000, 5000) == pytest.approx(1.6276 * math.sqrt(2 / 5000), rel=1e-4)
    with pytest.raises(ValueError):
        ex.ks_critical_value(0, 5)


def test_empirical_stats_examples():
    s = ex.empirical_stats([0.0, 1.0])
    assert s.mean == 0.5 and s.variance == 0.5
    c = ex.empirical_stats([3.0] * 10)
    assert c.variance == 0.0 and c.mean == 3.0 and math.isnan(c.skewness)
    with pytest.raises(InsufficientSamples):
        ex.empirical_stats([1.0])


def test_empirical_stats_quantiles_and_errors(rng):
    x = rng.normal(size=100_000)
    s = ex.empirical_stats(x)
    assert abs(s.mean) < 3 * s.se_mean
    assert s.se_mean == pytest.approx(1 / math.sqrt(x.size), rel=0.01)
    assert s.se_variance == pytest.approx(math.sqrt(2 / x.size), rel=0.03)  # normal theory
    assert s.se_skewness == pytest.approx(math.sqrt(6 / x.size), rel=0.05)
    qs = list(s.quantiles.values())
    assert qs == sorted(qs)
    assert s.quantiles[0.5] == np.quantile(x, 0.5)
    assert s.quantiles[0.95] == pytest.approx(1.645, abs=0.03)
    e = ex.empirical_stats(rng.exponential(size=50_000))
    assert e.skewness == pytest.approx(2.0, abs=5 * e.se_skewness)
    assert ex.EmpiricalStats.from_dict(s.to_dict()) == s


# -- configs -----------------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(mode="nope", reps=1, master_seed=1),
    dict(mode="poisson", reps=0, master_seed=1, source=FAIR_SPEC, t=1.0),
    dict(mode="poisson", reps=1, master_seed=-1, source=FAIR_SPEC, t=1.0),
    dict(mode="poisson", reps=1, master_seed=1, t=1.0),
    dict(mode="poisson", reps=1, master_seed=1, source=FAIR_SPEC, t=0.0),
    dict(mode="fixed-n", reps=1, master_seed=1, source=FAIR_SPEC, n=-1),
    dict(mode="key-only", reps=1, master_seed=1),
    dict(mode="fixed-point", reps=1, master_seed=1),
    dict(mode="poisson", reps=1, master_seed=1, source=FAIR_SPEC, t=1.0, tol=0.0),
    dict(mode="poisson", reps=1, master_seed=1, source=FAIR_SPEC, t=1.0, control_variate=True),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ex.ExperimentConfig(**kw)


def test_config_round_trip():
    c = cfg("fixed-n", n=12, tol=1e-3, control_variate=True)
    assert ex.ExperimentConfig.from_dict(c.to_dict()) == c


# -- runs ----------------------------------------------------------------------------------------

def test_poisson_tiny_t_gives_empty_runs():
    r = ex.run(cfg("poisson", reps=200, t=0.05))
    few = r.N <= 1
    assert few.sum() > 150
    assert np.all(r.S[few] == 0) and np.all(r.K[few] == 0)
    assert np.allclose(r.Y[few], -r.centering["value"] / 0.05)


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_poisson_identities_and_recompute(name):
    spec = SHIPPED[name].spec
    r = ex.run(cfg("poisson", reps=40, t=60.0, source=spec))
    assert r.reps == 40 and len(r.replicates()) == 40
    for K, S, pd in zip(r.K, r.S, r.per_depth):
        assert sum(pd) == S and (pd[0] if pd else 0) == K
        assert all(a >= b for a, b in zip(pd, pd[1:])) and S >= K
    c = r.centering
    assert np.array_equal(r.Y, (r.S - c["value"]) / c["divisor"])
    assert c["bound"] < r.config.centering_tol()


def test_poisson_counts_follow_seed_streams():
    r = ex.run(cfg("poisson", reps=5, t=30.0, seed=77))
    assert [ex.rng_stream(77, (i,)).poisson(30.0) for i in range(5)] == r.N.tolist()


def test_replicates_do_not_depend_on_batch():
    small = ex.run(cfg("poisson", reps=5, t=40.0, seed=3))
    big = ex.run(cfg("poisson", reps=30, t=40.0, seed=3))
    assert np.array_equal(small.S, big.S[:5]) and small.per_depth == big.per_depth[:5]


def test_reproducible_results():
    for c in (cfg("poisson", t=30.0), cfg("fixed-n", n=30), cfg("key-only", n=30), cfg("fixed-point", depth=5)):
        assert ex.run(c).to_dict() == ex.run(c).to_dict()


def test_chunking_invariance(monkeypatch):
    configs = [cfg("poisson", reps=30, t=50.0, seed=4), cfg("key-only", reps=10, n=50)]
    refs = [ex.run(c).to_dict() for c in configs]
    monkeypatch.setattr(ex, "KEYS_PER_CHUNK", 64)
    monkeypatch.setattr(ex, "PERM_CHUNK", 3)
    assert [ex.run(c).to_dict() for c in configs] == refs


def test_fixed_n_small():
    r = ex.run(cfg("fixed-n", n=1))
    assert np.all(r.S == 0) and np.all(r.Y == 0)
    r = ex.run(cfg("fixed-n", n=0))
    assert np.all(r.S == 0) and r.centering["divisor"] == 1.0


def test_key_only_small():
    r = ex.run(cfg("key-only", n=2))
    assert np.all(r.K == 1) and np.all(r.Y == 0)
    r = ex.run(cfg("key-only", reps=3, n=0))
    assert np.all(r.Y == 0)


def test_key_only_matches_fixed_n_key_law():
    # K_n does not depend on the source: compare two independent samplers
    a = ex.run(cfg("key-only", reps=3000, n=60, seed=1)).K
    b = ex.run(cfg("fixed-n", reps=3000, n=60, seed=2, source=SHIPPED["markov_3"].spec)).K
    assert ex.ks_distance(a, b) < ex.ks_critical_value(a.size, b.size, 0.001)


@pytest.mark.parametrize("name", ["markov_2", "intermittent_3", "memoryless_3"])
def test_symbol_means_agree_with_simulation(name):
    spec = SHIPPED[name].spec
    p = ex.run(cfg("poisson", reps=3000, t=50.0, source=spec, seed=10))
    assert abs(p.stats.mean) < 4 * p.stats.se_mean
    f = ex.run(cfg("fixed-n", reps=3000, n=50, source=spec, seed=11))
    assert abs(f.stats.mean) < 4 * f.stats.se_mean


def test_control_variate():
    plain = ex.run(cfg("fixed-n", reps=2000, n=100, seed=5))
    cv = ex.run(cfg("fixed-n", reps=2000, n=100, seed=5, control_variate=True))
    assert np.array_equal(plain.Y, cv.Y)
    assert cv.stats.variance < 0.5 * plain.stats.variance
    assert abs(cv.stats.mean) < 4 * cv.stats.se_mean
    assert "control_variate" in cv.centering and "control_variate" not in plain.centering
    assert cv.replicates()[0]["Y_adjusted"] == cv.adjusted[0]


def test_fixed_point_mode():
    r = ex.run(cfg("fixed-point", reps=20_000, depth=12))
    target = analytic.t_variance_target() * (1 - (2 / 3) ** 12)
    assert r.stats.variance == pytest.approx(target, rel=0.05)
    assert r.N is None and r.S is None


def test_single_replicate_has_no_stats():
    r = ex.run(cfg("poisson", reps=1, t=5.0))
    assert r.stats is None and r.to_dict()["stats"] is None


def test_moderate_dev_check(rng):
    emp, val = ex.moderate_dev_check(1e4, 0.1, 100_000, rng)
    assert 0 <= emp <= 1 and val == analytic.moderate_dev_prob(1e4, 0.1)
    emp_small, _ = ex.moderate_dev_check(1e4, 0.01, 10_000, rng)
    # the window is t^eps ~ 1.1 standard deviations wide
    assert emp_small > emp
    assert emp_small == pytest.approx(2 * stats.norm.sf(1e4**0.01), abs=0.02)
    with pytest.raises(ValueError):
        ex.moderate_dev_check(1e4, 0.15, 100, rng)
