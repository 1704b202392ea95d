"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (see ``conftest.py``) before asserting,
so a full run lists all verdicts in the terminal summary.  Replicate studies
use master seed 0, chosen before any of them was run.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import integrate

from symlik.config import chi2_sd_band
from symlik.distributions import BivariateNormal, LogNormal1D, Normal1D, SkewNormal1D, Uniform1D
from symlik.estimation import FitOptions, fit_mle, meta_symbolic
from symlik.likelihood import loglik_hist_fixed, loglik_hist_random, loglik_interval
from symlik.oracle import resolve_iter_seg_convention, run_oracle_suite
from symlik.simulation import ExperimentConfig, RmseConfig, run_experiment, run_rmse_study
from symlik.symbols import (
    FixedBinHistogramSymbol,
    IntervalSymbol,
    RandomBinHistogramSymbol,
    SymbolSpec,
    make_hist_random,
)

SEED = 0
SIGMA_T1 = math.sqrt(0.5)


def _random_family(rng):
    kind = rng.integers(4)
    if kind == 0:
        return Normal1D(rng.normal(0, 5), rng.uniform(0.2, 5))
    if kind == 1:
        return LogNormal1D(rng.normal(0, 1), rng.uniform(0.1, 1.5))
    if kind == 2:
        return SkewNormal1D(rng.normal(0, 3), rng.uniform(0.5, 4), rng.uniform(-4, 4))
    a = rng.normal(0, 3)
    return Uniform1D(a, a + rng.uniform(0.5, 10))


def test_c1_two_bin_histogram_equals_interval(verdict):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        fam = _random_family(rng)
        n = int(rng.integers(2, 200))
        l, u = sorted(rng.choice(np.arange(1, n + 1), 2, replace=False))
        x = np.sort(fam.sample(n, rng))
        s_l, s_u = x[l - 1], x[u - 1]
        a = loglik_interval(IntervalSymbol(s_l, s_u, n, l, u), fam).value
        b = loglik_hist_random(RandomBinHistogramSymbol([s_l, s_u], [l, u], n), fam).value
        worst = max(worst, abs(float(a) - float(b)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    verdict("C1 B=2 histogram equals interval", ok, f"max|diff|={worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_c2_classical_limit(verdict):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 102))
        x = rng.normal(rng.normal(0, 10), rng.uniform(0.5, 20), n)
        sym = make_hist_random(x, np.arange(1, n + 1))
        fit = fit_mle([sym], Normal1D, options=FitOptions(tol=1e-12))
        target = np.array([x.mean(), math.sqrt((n - 1) / n) * x.std(ddof=1)])
        rel = np.abs(fit.theta_hat - target) / np.abs(target)
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10.0
    verdict("C2 B=n histogram recovers classical mle", ok, f"max rel err={worst:.2e}, {elapsed:.2f}s")
    assert ok


def _interval_mass(fam, n, l, u, lo, hi):
    # triangle {lo <= s_l <= s_u <= hi} mapped onto the unit square
    def f(vw):
        s_l = lo + (hi - lo) * vw[:, 0]
        s_u = s_l + (hi - s_l) * vw[:, 1]
        jac = (hi - lo) * (hi - s_l)
        ll = loglik_interval(IntervalSymbol(s_l, s_u, n, l, u), fam).value
        return np.exp(ll) * jac

    res = integrate.cubature(f, [0.0, 0.0], [1.0, 1.0], rtol=1e-10, atol=1e-12)
    assert res.status == "converged"
    return float(res.estimate)


def test_c3_normalisation(verdict):
    t0 = time.perf_counter()
    cases = [
        # ranges leave under 1e-18 of tail mass outside
        (Normal1D(0.0, 1.0), 5, 1, 5, -9.0, 9.0),
        (Normal1D(1.0, 2.0), 10, 2, 9, -17.0, 19.0),
        (Uniform1D(0.0, 1.0), 3, 1, 3, 0.0, 1.0),
        (LogNormal1D(0.0, 0.5), 4, 1, 3, math.exp(-4.5), math.exp(4.5)),
        (SkewNormal1D(0.0, 1.0, 2.0), 6, 2, 6, -8.0, 13.0),
    ]
    masses = [_interval_mass(*c) for c in cases]
    interval_err = max(abs(m - 1.0) for m in masses)

    fam = Normal1D(0.3, 1.2)
    grid = (-1.0, 0.0, 0.7, 2.5)
    total = 0.0
    count = 0
    for c1, c2 in itertools.product(range(7), repeat=2):
        if c1 + c2 <= 6:
            total += math.exp(loglik_hist_fixed(FixedBinHistogramSymbol((grid,), [c1, c2, 6 - c1 - c2], 6), fam).value)
            count += 1
    hist_err = abs(total - 1.0)
    elapsed = time.perf_counter() - t0
    ok = interval_err <= 1e-6 and hist_err <= 1e-10 and count == 28 and elapsed < 30.0
    verdict("C3 likelihoods normalise", ok,
            f"interval max|1-mass|={interval_err:.1e}, fixed-bin |1-sum|={hist_err:.1e} over {count}, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c4_minmax_rectangle_cell(verdict):
    cfg = ExperimentConfig("BivariateNormal", (2.0, 5.0, SIGMA_T1, SIGMA_T1, 0.9), m=50, n_c=5, T=100,
                           symbol=SymbolSpec("rect_minmax"), rect_method="full", master_seed=SEED)
    res = run_experiment(cfg)
    mean, sd = res.stat("rho")
    half = 3 * 0.017 / math.sqrt(100)
    lo, hi = chi2_sd_band(0.017, res.n_converged)
    ok = abs(mean - 0.902) <= half and sd is not None and lo <= sd <= hi and res.n_converged == 100
    verdict("C4 rho0=0.9 m=50 n_c=5 full", ok,
            f"mean={mean:.4f} (0.902+-{half:.4f}), sd={sd:.4f} in [{lo:.4f},{hi:.4f}], "
            f"{res.n_converged}/100 converged, {res.wall_time:.0f}s")
    assert ok


@pytest.mark.slow
def test_c5_dependence_information(verdict):
    out = {}
    for method in ("l2d", "full"):
        cfg = ExperimentConfig("BivariateNormal", (2.0, 5.0, SIGMA_T1, SIGMA_T1, 0.7), m=20, n_c=5, T=100,
                               symbol=SymbolSpec("rect_minmax"), rect_method=method, master_seed=SEED)
        out[method] = run_experiment(cfg).stat("rho")[0]
    ok = abs(out["l2d"] - 0.239) <= 0.03 and abs(out["full"] - 0.701) <= 0.03
    verdict("C5 L4 vs full at rho0=0.7", ok, f"L4 mean={out['l2d']:.4f} (0.239), full mean={out['full']:.4f} (0.701)")
    assert ok


@pytest.mark.slow
def test_c6_iterative_segmentation_cell(verdict):
    spec = SymbolSpec("rect_order", l=(6, 3), u=(55, 3), construction="iter_seg")
    cfg = ExperimentConfig("BivariateNormal", (2.0, 5.0, 0.5, 0.5, 0.7), m=20, n_c=60, T=100, symbol=spec,
                           master_seed=SEED)
    res = run_experiment(cfg)
    targets = {"sigma1": 0.4993, "rho": 0.7130, "sigma2": 0.4900}
    parts, ok = [], res.n_converged == 100
    for p, ref in targets.items():
        mean, sd = res.stat(p)
        se = sd / math.sqrt(res.n_converged)
        z = (mean - ref) / se
        ok &= abs(z) <= 3
        parts.append(f"{p}={mean:.4f} (ref {ref}, z={z:+.2f})")
    verdict("C6 iterative segmentation (6,3)/(55,3)", ok, ", ".join(parts) + f", {res.wall_time:.0f}s")
    assert ok


def test_c7_meta_exact_at_n5(verdict):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(100):
        x = np.sort(rng.normal(rng.normal(0, 20), rng.uniform(0.5, 30), 5))
        est = meta_symbolic(x, 5)
        worst = max(worst, abs(est.sd_hat - x.std(ddof=1)) / x.std(ddof=1))
    ok = worst <= 1e-6
    verdict("C7 symbolic sd exact at n=5", ok, f"max rel err={worst:.2e}")
    assert ok


@pytest.mark.slow
def test_c8_rmse_curves(verdict):
    cfg = RmseConfig(n=81, T=2000, master_seed=SEED)
    curve = run_rmse_study(cfg)
    i_opt = 11  # q = 71/81 = 0.877
    sigma_ok = all(curve.get(k, i_opt)["rmse_sigma"] < curve.get(k, 1)["rmse_sigma"] for k in cfg.kinds)
    worse = [i for i in cfg.i_values if curve.get("hist", i)["rmse_mu"] > curve.get("interval", i)["rmse_mu"]]
    gaps = [curve.get("hist", i)["rmse_mu"] - curve.get("interval", i)["rmse_mu"] for i in worse]
    ok = sigma_ok and not worse
    detail = ", ".join(
        f"{k}: sigma {curve.get(k, i_opt)['rmse_sigma']:.3f} at q=0.877 vs {curve.get(k, 1)['rmse_sigma']:.3f} at q=1"
        for k in cfg.kinds
    )
    detail += f"; hist mu worse at i={worse}" if worse else "; hist mu <= interval mu at every i"
    if gaps:
        detail += f" (max excess {max(gaps):.2e})"
    verdict("C8 RMSE curves n=81 T=2000", ok, detail + f", {curve.wall_time:.0f}s")
    assert ok


def _mean_eval_time(sym, fam, calls=3000):
    loglik_hist_fixed(sym, fam)
    t0 = time.perf_counter()
    for _ in range(calls):
        loglik_hist_fixed(sym, fam)
    return (time.perf_counter() - t0) / calls


@pytest.mark.slow
def test_c9_oracle_suite(verdict):
    reports = run_oracle_suite(n_sims=1_000_000, seed=SEED)
    conv = resolve_iter_seg_convention(BivariateNormal(2.0, 5.0, 0.5, 0.5, 0.7), n_sims=1_000_000, rng=SEED)

    rng = np.random.default_rng(SEED)
    fam = Normal1D(0.0, 1.0)
    grid = (np.linspace(-3.0, 3.0, 11),)
    p = np.diff(fam.cdf(grid[0]))
    syms = {n: FixedBinHistogramSymbol(grid, rng.multinomial(n, p / p.sum()), n) for n in (1_000, 1_000_000)}
    times = {n: [] for n in syms}
    for _ in range(5):
        for n, sym in syms.items():
            times[n].append(_mean_eval_time(sym, fam))
    ratio = float(np.mean(times[1_000]) / np.mean(times[1_000_000]))

    oracle_ok = all(r.passed for r in reports.values())
    ok = oracle_ok and conv["convention"] == "bottom" and 0.5 <= ratio <= 2.0
    zs = ", ".join(f"{k} {r.max_abs_z:.2f}" for k, r in reports.items())
    conv_z = ", ".join(f"{k} {r.max_abs_z:.1f}" for k, r in conv["reports"].items())
    verdict("C9 oracle suite at 1e6", ok,
            f"max|z|: {zs}; convention={conv['convention']} ({conv_z}); n-timing ratio={ratio:.2f}")
    assert ok
