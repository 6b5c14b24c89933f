"""Acceptance criteria, one test each, at the stated scales and tolerances.

Each test prints a single ``ACCEPTANCE #n PASS|FAIL`` line (bypassing
output capture) before asserting. Run with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from symsort import analytic, cli
from symsort import experiments as ex
from symsort.qsort import bst_incremental, quicksort_count
from symsort.sources import make_source, shipped_sources, spec_from_dict

from conftest import FAIR, HEAVY, make_keys

pytestmark = pytest.mark.slow

FAIR_SPEC = spec_from_dict(FAIR)


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE #{num} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def test_1_exact_mean(report):
    ek = [Fraction(0)]
    for n in range(1, 101):
        ek.append(n - 1 + Fraction(2, n) * sum(ek))
    worst = max(abs(analytic.exp_key_discrete(n) - float(ek[n])) / float(ek[n]) for n in range(2, 101))
    zero_ok = analytic.exp_key_discrete(0) == 0 and analytic.exp_key_discrete(1) == 0
    ok = report(1, worst <= 1e-10 and zero_ok, f"max relative error vs recurrence for n <= 100: {worst:.2e}")
    assert ok


def test_2_asymptotics(report):
    rd = [analytic.exp_key_discrete(n) - analytic.exp_key_discrete_asym(n) for n in (1000, 10_000)]
    ratio = rd[0] / rd[1]
    # The Poissonized expansion has an exponentially small remainder, so at
    # t = 1e3, 1e4 the quadrature agrees with it to rounding level.
    rp = [abs(analytic.exp_key_poisson(t) - analytic.exp_key_poisson_asym(t)) for t in (1000.0, 10_000.0)]
    rp_ok = all(r < 1e-12 * t * math.log(t) for r, t in zip(rp, (1000.0, 10_000.0)))
    d30 = abs(analytic.exp_key_poisson(30.0) - analytic.exp_key_poisson_asym(30.0))
    ok = 5 <= ratio <= 20 and d30 < 1e-9 and rp_ok
    report(2, ok, f"discrete residual ratio {ratio:.3f}; Poisson residuals {rp[0]:.1e}, {rp[1]:.1e}; |t=30| {d30:.1e}")
    assert ok


def test_3_poissonized_symbol_mean(report):
    src = make_source(FAIR)
    rough = analytic.exp_symbol_poisson(src, 200.0, tol=1.0).value
    center = analytic.exp_symbol_poisson(src, 200.0, tol=1e-7 * rough)
    r = ex.run(ex.ExperimentConfig("poisson", 2000, 31, source=FAIR_SPEC, t=200.0, tol=1e-7 * rough))
    s = ex.empirical_stats(r.S)
    z = (s.mean - center.value) / s.se_mean
    ok = abs(z) < 3 and center.bound < 1e-6 * center.value
    report(3, ok, f"mean S(200) = {s.mean:.3f} vs E S(200) = {center.value:.6f} (z = {z:+.2f}); "
                  f"bound/value = {center.bound / center.value:.1e}")
    assert ok


def test_4_key_limit_law(report):
    r = ex.run(ex.ExperimentConfig("key-only", 10_000, 41, n=10_000))
    target = analytic.t_variance_target()
    var = r.stats.variance
    fp = analytic.fixed_point_sample(analytic.FixedPointConfig(40, 10_000), ex.rng_stream(42, (0,)))
    ks = ex.ks_distance(r.Y, fp)
    ok = abs(var / target - 1) <= 0.05 and ks < 0.03
    report(4, ok, f"Var = {var:.4f} vs {target:.4f} ({100 * (var / target - 1):+.2f}%); KS vs fixed point = {ks:.4f}")
    assert ok


def _poisson_Y(t, seed, reps=5000):
    return ex.run(ex.ExperimentConfig("poisson", reps, seed, source=FAIR_SPEC, t=t)).Y


def test_5_fair_binary_limit(report):
    Y = {t: _poisson_Y(t, 50 + i) for i, t in enumerate((25.0, 100.0, 400.0))}
    z = {t: ex.empirical_stats(Y[t]).mean / ex.empirical_stats(Y[t]).se_mean for t in (100.0, 400.0)}
    near, far = ex.ks_distance(Y[100.0], Y[400.0]), ex.ks_distance(Y[25.0], Y[400.0])
    ok = all(abs(v) < 3 for v in z.values()) and near < far
    report(5, ok, f"z(100) = {z[100.0]:+.2f}, z(400) = {z[400.0]:+.2f}; "
                  f"KS(100,400) = {near:.4f} < KS(25,400) = {far:.4f}")
    assert ok


def test_6_depoissonization(report):
    yp = _poisson_Y(500.0, 61)
    yn = ex.run(ex.ExperimentConfig("fixed-n", 5000, 62, source=FAIR_SPEC, n=500)).Y
    ks = ex.ks_distance(yn, yp)
    crit = ex.ks_critical_value(yn.size, yp.size, 0.01)
    sd_n, sd_p = float(np.std(yn)), float(np.std(yp))
    ok = ks < crit
    report(6, ok, f"KS(Y_500, Y(500)) = {ks:.4f} vs 1% critical value {crit:.4f}; sd {sd_n:.3f} vs {sd_p:.3f}")
    assert ok


def test_7_structural_identities(report):
    bad = 0
    count = 0
    for name, src in shipped_sources().items():
        for mode, kw in (("poisson", {"t": 120.0}), ("fixed-n", {"n": 120})):
            r = ex.run(ex.ExperimentConfig(mode, 200, 71, source=src.spec, **kw))
            for K, S, pd in zip(r.K, r.S, r.per_depth):
                count += 1
                ok = sum(pd) == S and (pd[0] if pd else 0) == K and S >= K
                ok = ok and all(a >= b for a, b in zip(pd, pd[1:]))
                bad += not ok
    srcs = list(shipped_sources().values()) + [make_source(HEAVY)]
    mismatches = 0
    for seed in range(50):
        src = srcs[seed % len(srcs)]
        keys = make_keys(src, 7000 + seed, 64)
        traj = bst_incremental(keys, range(65))
        for n, tally in zip(traj.checkpoints, traj.tallies):
            _, ref = quicksort_count(keys[:n])
            mismatches += (tally.K, tally.S, tally.per_depth) != (ref.K, ref.S, ref.per_depth)
    ok = bad == 0 and mismatches == 0
    report(7, ok, f"{bad} identity violations in {count} replicates; "
                  f"{mismatches} bst/quicksort mismatches over 50 seeds x n <= 64")
    assert ok


def test_8_tameness(report):
    fair = make_source(FAIR)
    fair_ok = True
    for p in (2, 4):
        rep = analytic.tameness_report(fair, p=p)
        exact = 1.0 / (1.0 - 2.0 ** (-1.0 / p))
        fair_ok &= rep.verdict is analytic.Verdict.CONVERGES and rep.decay == "geometric"
        fair_ok &= math.isclose(rep.sum_pi + rep.tail_pi, exact, rel_tol=1e-12)
    heavy = analytic.tameness_report(make_source(HEAVY), p=2)
    heavy_ok = heavy.verdict_pi is analytic.Verdict.DIVERGES
    dom_ok = all(np.all(s.depth_weights(30) <= s.pi_sequence(30) * (1 + 1e-12)) for s in shipped_sources().values())
    ok = fair_ok and heavy_ok and dom_ok
    report(8, ok, f"fair binary p=2,4 convergent with geometric tails: {fair_ok}; "
                  f"gamma=1.5 pi-series {heavy.verdict_pi.value}; q_k <= pi_k: {dom_ok}")
    assert ok


def test_9_moderate_deviations(report):
    emp, val = ex.moderate_dev_check(1e4, 0.1, 100_000, ex.rng_stream(91, (0,)))
    ratio = emp / val
    ok = 0.5 <= ratio <= 2.0
    report(9, ok, f"empirical {emp:.5f} vs lead-order {val:.5f} (ratio {ratio:.3f})")
    assert ok


def test_10_reproducibility(tmp_path, report, capsys):
    src = tmp_path / "fair.json"
    src.write_text(json.dumps(FAIR))
    runs = [
        ["--mode", "poisson", "--t", "50", "--source", str(src)],
        ["--mode", "fixed-n", "--n", "80", "--source", "markov_3"],
        ["--mode", "fixed-n", "--n", "80", "--source", "intermittent_2", "--control-variate"],
        ["--mode", "key-only", "--n", "500"],
    ]
    same = 0
    total = 0
    for i, args in enumerate(runs):
        for fmt in ("json", "csv"):
            outs = []
            for k in range(2):
                out = tmp_path / f"r{i}_{k}.{fmt}"
                assert cli.main(["simulate", *args, "--reps", "25", "--seed", "7", "--format", fmt,
                                 "--out", str(out), "--plot-data", str(out) + ".dat"]) == 0
                outs.append(out)
            total += 1
            same += outs[0].read_bytes() == outs[1].read_bytes() and \
                (tmp_path / (outs[0].name + ".dat")).read_bytes() == (tmp_path / (outs[1].name + ".dat")).read_bytes()
    capsys.readouterr()
    ok = same == total
    report(10, ok, f"{same}/{total} simulate reruns byte-identical")
    assert ok
