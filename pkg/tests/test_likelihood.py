import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln, logsumexp

from symlik.distributions import BivariateNormal, Normal1D, SkewNormal1D, Uniform1D
from symlik.likelihood import (
    ConfigProbabilities,
    classical_loglik,
    dataset_loglik,
    loglik_hist_fixed,
    loglik_hist_random,
    loglik_interval,
    loglik_rect_2d,
    loglik_rect_full,
    loglik_rect_iter_seg,
    loglik_rect_marginal_orders,
    loglik_rect_marginalized,
    loglik_rect_seq_nest,
)
from symlik.symbols import (
    FixedBinHistogramSymbol,
    IntervalSymbol,
    OrderRectSymbol,
    RandomBinHistogramSymbol,
    RectConfig,
    RectMinMaxSymbol,
    make_hist_random,
    make_interval,
    make_rect_iter_seg,
    make_rect_minmax,
    make_rect_seq_nest,
)


def _order_stat_logpdf(x, k, N, dist):
    """Log density of the k-th of N order statistics."""
    return (gammaln(N + 1) - gammaln(k) - gammaln(N - k + 1)
            + (k - 1) * dist.logcdf(x) + (N - k) * dist.logsf(x) + dist.logpdf(x))


def _interval_ref(s_l, s_u, n, l, u, dist):
    return (gammaln(n + 1) - gammaln(l) - gammaln(u - l) - gammaln(n - u + 1)
            + (l - 1) * dist.logcdf(s_l) + (u - l - 1) * np.log(dist.cdf(s_u) - dist.cdf(s_l))
            + (n - u) * dist.logsf(s_u) + dist.logpdf(s_l) + dist.logpdf(s_u))


def test_interval_uniform_cases():
    fam = Uniform1D(0.0, 1.0)
    assert loglik_interval(IntervalSymbol(0.2, 0.7, 2, 1, 2), fam).value == pytest.approx(math.log(2), abs=1e-14)
    assert loglik_interval(IntervalSymbol(0.2, 0.7, 3, 1, 3), fam).value == pytest.approx(math.log(3), abs=1e-14)


def test_interval_matches_reference_formula():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 60))
        l, u = sorted(rng.choice(np.arange(1, n + 1), 2, replace=False))
        mu, sd = rng.normal(0, 3), rng.uniform(0.3, 4)
        x = np.sort(rng.normal(mu, sd, n))
        got = loglik_interval(IntervalSymbol(x[l - 1], x[u - 1], n, l, u), Normal1D(mu, sd)).value
        ref = _interval_ref(x[l - 1], x[u - 1], n, l, u, stats.norm(mu, sd))
        assert got == pytest.approx(ref, rel=1e-11, abs=1e-11)


def test_interval_far_tail_is_not_nan():
    v = loglik_interval(IntervalSymbol(-45.0, 50.0, 10, 1, 10), Normal1D(0.0, 1.0)).value
    assert not np.isnan(v)
    assert v == -np.inf or np.isfinite(v)


def test_hist_random_classical_limit():
    fam = SkewNormal1D(0.5, 2.0, 1.5)
    x = np.random.default_rng(1).normal(size=12)
    n = len(x)
    got = loglik_hist_random(make_hist_random(x, np.arange(1, n + 1)), fam).value
    assert got == pytest.approx(math.lgamma(n + 1) + classical_loglik(x, fam).value, rel=1e-13)


def test_hist_fixed_direct_multinomial():
    fam = Uniform1D(0.0, 1.0)
    sym = FixedBinHistogramSymbol(((0.0, 0.5, 1.0),), [1, 1], 2)
    assert loglik_hist_fixed(sym, fam).value == pytest.approx(math.log(0.5), abs=1e-15)
    sym = FixedBinHistogramSymbol(((0.0, 0.3, 1.0),), [7, 0], 7)
    assert loglik_hist_fixed(sym, fam).value == pytest.approx(7 * math.log(0.3), abs=1e-13)


def test_hist_fixed_bivariate_sums_to_one():
    fam = BivariateNormal(0.2, -0.1, 1.0, 1.5, 0.6)
    grids = ((-9.0, 0.0, 9.0), (-12.0, -1.0, 12.0))
    total = 0.0
    n = 3
    for a in range(n + 1):
        for b in range(n + 1 - a):
            for c in range(n + 1 - a - b):
                counts = [[a, b], [c, n - a - b - c]]
                total += math.exp(loglik_hist_fixed(FixedBinHistogramSymbol(grids, counts, n), fam).value)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_classical_and_dataset_sums():
    fam = Normal1D(0.0, 1.0)
    assert classical_loglik(np.array([0.0]), fam).value == pytest.approx(math.log(0.3989422804014327), abs=1e-15)
    x = np.random.default_rng(2).normal(size=1000)
    whole = classical_loglik(x, fam).value
    parts = classical_loglik(x[:300], fam).value + classical_loglik(x[300:], fam).value
    assert whole == pytest.approx(parts, rel=1e-14)
    rng = np.random.default_rng(3)
    syms = [make_interval(rng.normal(size=9), 2, 8) for _ in range(5)]
    single = dataset_loglik([syms[0]], fam).value
    assert single == loglik_interval(syms[0], fam).value
    assert dataset_loglik(syms, fam).value == dataset_loglik(syms[::-1], fam).value
    assert dataset_loglik([syms[1], syms[1]], fam).value == 2 * loglik_interval(syms[1], fam).value


def test_rect_full_two_points():
    fam = BivariateNormal(0.0, 0.0, 1.0, 1.0, 0.3)
    sym = make_rect_minmax([[-0.4, -0.2], [0.9, 1.1]])
    expected = math.log(2) + math.log(fam.pdf(np.array([-0.4, -0.2]))) + math.log(fam.pdf(np.array([0.9, 1.1])))
    assert loglik_rect_full(sym, fam).value == pytest.approx(expected, rel=1e-13)


def test_rect_configs_sum_to_product_of_intervals_under_independence():
    # with rho = 0 the rectangle density, summed over configurations, factorises
    fam = BivariateNormal(0.3, -0.2, 1.2, 0.8, 0.0)
    s_min, s_max, n = np.array([-1.1, -1.0]), np.array([1.4, 0.9]), 7
    per_config = [loglik_rect_full(RectMinMaxSymbol(s_min, s_max, c, n), fam).value for c in RectConfig.ALL]
    ref = sum(_interval_ref(s_min[j], s_max[j], n, 1, n, stats.norm(m, s))
              for j, (m, s) in enumerate(((0.3, 1.2), (-0.2, 0.8))))
    assert logsumexp(per_config) == pytest.approx(ref, rel=1e-9)


def test_rect_full_prefers_truth_for_diagonal_rectangles():
    truth = BivariateNormal(0.0, 0.0, 1.0, 1.0, 0.9)
    indep = BivariateNormal(0.0, 0.0, 1.0, 1.0, 0.0)
    diag = RectMinMaxSymbol([-1.0, -1.1], [1.2, 1.0], RectConfig.P2_BL_TR, 5)
    assert loglik_rect_full(diag, truth).value > loglik_rect_full(diag, indep).value
    # single draws can go either way; typical ones favour the truth
    rng = np.random.default_rng(4)
    wins = []
    while len(wins) < 200:
        sym = make_rect_minmax(truth.sample(5, rng))
        if int(sym.config) == RectConfig.P2_BL_TR:
            wins.append(loglik_rect_full(sym, truth).value > loglik_rect_full(sym, indep).value)
    assert np.mean(wins) > 0.9


def test_rect_2d_matches_full_for_four_point_rectangles():
    X = [[0.0, 1.0], [1.0, 0.0], [2.0, 1.5], [1.2, 3.0], [1.1, 1.2]]
    sym = make_rect_minmax(X)
    assert sym.p == 4
    fam = BivariateNormal(1.0, 1.0, 1.0, 1.0, 0.4)
    assert loglik_rect_2d(sym, fam).value == loglik_rect_full(sym, fam).value


def test_config_probabilities():
    cp = ConfigProbabilities(mc_samples=20_000, seed=0)
    for rho in (-0.8, 0.0, 0.5, 0.95):
        p = cp.probs(rho, 6)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(p >= 0)
    big = cp.probs(0.0, 200)
    small = cp.probs(0.0, 5)
    assert big[RectConfig.P4] > small[RectConfig.P4]
    assert big[RectConfig.P4] > 0.9
    exact = cp.direct(0.5, 6)
    assert np.max(np.abs(cp.probs(0.5, 6) - exact)) < 5e-3


def test_marginalised_bounded_by_best_configuration():
    fam = BivariateNormal(0.0, 0.0, 1.0, 1.0, 0.5)
    rng = np.random.default_rng(5)
    for _ in range(10):
        sym = make_rect_minmax(fam.sample(6, rng))
        best = max(loglik_rect_full(RectMinMaxSymbol(sym.s_min, sym.s_max, c, 6), fam).value
                   for c in RectConfig.ALL)
        value = loglik_rect_marginalized(sym.without_locations(), fam, mc_samples=20_000).value
        assert value <= best + 1e-12


def test_seq_nest_factorises_under_independence():
    fam = BivariateNormal(1.0, -1.0, 2.0, 0.5, 0.0)
    d1, d2 = stats.norm(1.0, 2.0), stats.norm(-1.0, 0.5)
    X = fam.sample(40, np.random.default_rng(6))
    for order, l, u in (((1, 2), (4, 3), (37, 25)), ((2, 1), (3, 5), (26, 36))):
        sym = make_rect_seq_nest(X, l, u, axis_order=order)
        f, s = order[0] - 1, order[1] - 1
        dists = (d1, d2)
        inner = u[f] - l[f] - 1
        ref = (_interval_ref(sym.s_l[f], sym.s_u[f], 40, l[f], u[f], dists[f])
               + _interval_ref(sym.s_l[s], sym.s_u[s], inner, l[s], u[s], dists[s]))
        assert loglik_rect_seq_nest(sym, fam).value == pytest.approx(ref, rel=1e-10)


def test_seq_nest_minimal_exponents():
    # every region count zero: four densities and two conditional interval terms
    fam = BivariateNormal(0.0, 0.0, 1.0, 1.0, 0.0)
    sym = make_rect_seq_nest([[0.0, 0.1], [0.5, -0.3], [0.7, 0.4], [1.0, 0.2]], (1, 1), (4, 2))
    d = stats.norm()
    inside = math.log(d.cdf(1.0) - d.cdf(0.0))
    ref = (math.log(24) + d.logpdf(0.0) + d.logpdf(1.0)
           + d.logpdf(-0.3) + d.logpdf(0.4) + 2 * inside)
    assert loglik_rect_seq_nest(sym, fam).value == pytest.approx(ref, rel=1e-12)


def test_iter_seg_factorises_under_independence():
    fam = BivariateNormal(2.0, 5.0, 0.5, 0.7, 0.0)
    d1, d2 = stats.norm(2.0, 0.5), stats.norm(5.0, 0.7)
    X = fam.sample(60, np.random.default_rng(7))
    l, u = (6, 3), (55, 3)
    sym = make_rect_iter_seg(X, l, u)
    ref = (_interval_ref(sym.s_l[0], sym.s_u[0], 60, 6, 55, d1)
           + _order_stat_logpdf(sym.s_l[1], 3, 5, d2)
           + _order_stat_logpdf(sym.s_u[1], 3, 5, d2))
    assert loglik_rect_iter_seg(sym, fam).value == pytest.approx(ref, rel=1e-10)


def test_marginal_orders():
    x = np.random.default_rng(8).normal(size=(30, 2))
    fam = BivariateNormal(0.1, -0.2, 1.1, 0.9, 0.4)
    sym = OrderRectSymbol(np.array([x[:, 0].min(), -1.0]), np.array([x[:, 0].max(), 1.2]), [1, 3], [30, 27], 30)
    m1, m2 = Normal1D(0.1, 1.1), Normal1D(-0.2, 0.9)
    a = loglik_rect_marginal_orders(sym, [m1, m2]).value
    assert a == pytest.approx(loglik_rect_marginal_orders(sym, fam).value, rel=1e-14)
    swapped = OrderRectSymbol(sym.s_l[::-1], sym.s_u[::-1], sym.l[::-1], sym.u[::-1], 30)
    assert loglik_rect_marginal_orders(swapped, [m2, m1]).value == pytest.approx(a, rel=1e-14)
    one = OrderRectSymbol([-1.0], [1.2], [3], [27], 30)
    assert loglik_rect_marginal_orders(one, [m2]).value == loglik_interval(IntervalSymbol(-1.0, 1.2, 30, 3, 27), m2).value


def test_batched_equals_single():
    rng = np.random.default_rng(9)
    fam = Normal1D(0.5, 1.5)
    x = rng.normal(size=(6, 15))
    batch = RandomBinHistogramSymbol(np.sort(x, axis=1)[:, [0, 7, 14]], [1, 8, 15], 15)
    single = [loglik_hist_random(make_hist_random(row, [1, 8, 15]), fam).value for row in x]
    np.testing.assert_allclose(loglik_hist_random(batch, fam).value, single, rtol=1e-15)
