import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symlik.errors import SymbolError, TieError
from symlik.symbols import (
    FixedBinHistogramSymbol,
    IntervalSymbol,
    RectConfig,
    SymbolSpec,
    make_hist_fixed,
    make_hist_random,
    make_interval,
    make_rect_iter_seg,
    make_rect_marginal,
    make_rect_minmax,
    make_rect_seq_nest,
    stack_symbols,
    symbol_from_dict,
    symbol_to_dict,
)


def test_interval_small_cases():
    s = make_interval([3.0, 1.0, 2.0], 1, 3)
    assert (float(s.s_l), float(s.s_u), int(s.n)) == (1.0, 3.0, 3)
    s = make_interval([5.0, 5.0, 5.0], 1, 3)
    assert (float(s.s_l), float(s.s_u)) == (5.0, 5.0)


def test_interval_full_sort_oracle():
    x = np.random.default_rng(0).normal(size=21)
    s = make_interval(x, 3, 19)
    xs = sorted(x)
    assert (float(s.s_l), float(s.s_u)) == (xs[2], xs[18])


def test_interval_rejects_bad_orders():
    with pytest.raises(SymbolError):
        make_interval([1.0, 2.0, 3.0], 2, 2)
    with pytest.raises(SymbolError):
        IntervalSymbol(2.0, 1.0, 5, 1, 5)


def test_minmax_two_points():
    s = make_rect_minmax([[0.0, 0.0], [1.0, 1.0]])
    assert s.p == 2
    assert [p.tolist() for p in s.locations] == [[0.0, 0.0], [1.0, 1.0]]
    assert s.s_min.tolist() == [0.0, 0.0] and s.s_max.tolist() == [1.0, 1.0]


def test_minmax_three_points():
    s = make_rect_minmax([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]])
    assert s.p == 3 and int(s.config) == RectConfig.P3_BL
    assert [p.tolist() for p in s.locations] == [[0.0, 0.0]]
    assert s.s_max.tolist() == [2.0, 2.0]


def test_minmax_four_points():
    X = [[0.0, 1.0], [1.0, 0.0], [2.0, 1.5], [1.2, 3.0]]
    s = make_rect_minmax(X)
    assert s.p == 4 and s.locations == []


def test_minmax_ties_raise():
    with pytest.raises(TieError):
        make_rect_minmax([[0.0, 0.0], [0.0, 1.0], [1.0, 2.0]])


def test_marginal_rectangle():
    x = np.random.default_rng(1).normal(size=40)
    s1 = make_rect_marginal(x[:, None], [3], [30])
    i1 = make_interval(x, 3, 30)
    assert float(s1.s_l[0]) == float(i1.s_l) and float(s1.s_u[0]) == float(i1.s_u)
    s = make_rect_marginal(np.column_stack([x, x]), [4, 4], [35, 35])
    assert s.s_l[0] == s.s_l[1] and s.s_u[0] == s.s_u[1]
    X = np.random.default_rng(2).normal(size=(60, 2))
    s = make_rect_marginal(X, [6, 6], [55, 55])
    for j in range(2):
        col = np.sort(X[:, j])
        assert (s.s_l[j], s.s_u[j]) == (col[5], col[54])


def test_seq_nest_boundary_case():
    X = np.random.default_rng(3).normal(size=(12, 2))
    n = len(X)
    s = make_rect_seq_nest(X, [1, 1], [n, n - 2])
    inside = X[np.argsort(X[:, 0])][1:-1, 1]
    assert s.s_l[1] == inside.min() and s.s_u[1] == inside.max()


def test_seq_nest_two_stage_sort():
    X = np.random.default_rng(4).normal(size=(60, 2))
    s = make_rect_seq_nest(X, [6, 5], [55, 35])
    x_sorted = np.sort(X[:, 0])
    lo, hi = x_sorted[5], x_sorted[54]
    inner = np.sort(X[(X[:, 0] > lo) & (X[:, 0] < hi), 1])
    assert len(inner) == 48
    assert s.s_l.tolist() == [lo, inner[4]]
    assert s.s_u.tolist() == [hi, inner[34]]


def test_seq_nest_axis_swap_on_mirrored_data():
    X = np.random.default_rng(5).normal(size=(30, 2))
    a = make_rect_seq_nest(X, [3, 2], [28, 20], axis_order=(1, 2))
    b = make_rect_seq_nest(X[:, ::-1], [2, 3], [20, 28], axis_order=(2, 1))
    assert a.s_l.tolist() == b.s_l[::-1].tolist()
    assert a.s_u.tolist() == b.s_u[::-1].tolist()


def test_iter_seg_subsets():
    X = np.random.default_rng(6).normal(size=(60, 2))
    s = make_rect_iter_seg(X, [6, 3], [55, 3])
    x_sorted = np.sort(X[:, 0])
    below = np.sort(X[X[:, 0] < x_sorted[5], 1])
    above = np.sort(X[X[:, 0] > x_sorted[54], 1])
    assert len(below) == 5 and len(above) == 5
    assert s.s_l[1] == below[2]
    assert s.s_u[1] == above[2]
    big = make_rect_iter_seg(np.random.default_rng(7).normal(size=(300, 2)), [30, 15], [275, 15])
    assert big.n == 300


def test_iter_seg_degenerate_request():
    X = np.random.default_rng(8).normal(size=(20, 2))
    with pytest.raises(SymbolError):
        make_rect_iter_seg(X, [4, 3], [15, 2])


def test_hist_fixed_binning():
    s = make_hist_fixed([0.5, 1.5, 1.0], [(0.0, 1.0, 2.0)])
    assert s.counts.tolist() == [2, 1]


def test_hist_fixed_matches_double_loop():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(10_000, 2))
    g1 = np.linspace(-5, 5, 11)
    g2 = np.linspace(-6, 6, 11)
    s = make_hist_fixed(X, [g1, g2])
    naive = np.zeros((10, 10), dtype=int)
    for x, y in X:
        i = next(k for k in range(10) if x <= g1[k + 1])
        j = next(k for k in range(10) if y <= g2[k + 1])
        naive[i, j] += 1
    assert np.array_equal(s.counts, naive)
    assert s.counts.sum() == 10_000


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=50))
def test_hist_fixed_counts_sum_to_n(values):
    s = make_hist_fixed(values, [(-10.0, -1.0, 0.0, 3.0, 10.0)])
    assert int(s.counts.sum()) == len(values)


def test_hist_random():
    x = np.array([4.0, 2.0, 5.0, 1.0, 3.0])
    assert make_hist_random(x, [1, 2, 3, 4, 5]).s.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]
    y = np.random.default_rng(10).normal(size=21)
    s = make_hist_random(y, [1, 6, 11, 16, 21])
    ys = np.sort(y)
    assert s.s.tolist() == [ys[0], ys[5], ys[10], ys[15], ys[20]]
    assert s.s[2] == np.median(y)
    with pytest.raises(SymbolError):
        make_hist_random(x, [2, 2, 3])


def test_spec_negative_indices():
    spec = SymbolSpec("interval", l=2, u=-2)
    x = np.arange(10.0)
    s = spec.build(x)
    assert (int(s.l), int(s.u)) == (2, 9)


def test_stack_and_take():
    rng = np.random.default_rng(11)
    syms = [make_interval(rng.normal(size=8), 2, 7) for _ in range(4)]
    batch = stack_symbols(syms)
    assert len(batch) == 4
    assert float(batch.take(2).s_l) == float(syms[2].s_l)
    with pytest.raises(SymbolError):
        stack_symbols([syms[0], make_hist_random(rng.normal(size=8), [1, 8])])


@pytest.mark.parametrize("sym", [
    make_interval([0.3, 1.2, -0.5, 2.0], 1, 3),
    make_rect_minmax([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]]),
    make_rect_minmax([[0.0, 1.0], [1.0, 0.0], [2.0, 1.5], [1.2, 3.0]]),
    make_rect_minmax([[0.0, 1.0], [1.0, 0.0]]),
    make_rect_seq_nest(np.random.default_rng(12).normal(size=(20, 2)), [2, 2], [19, 10]),
    make_rect_iter_seg(np.random.default_rng(13).normal(size=(20, 2)), [2, 4], [2, 17], axis_order=(2, 1)),
    make_hist_fixed(np.random.default_rng(14).uniform(size=(9, 2)), [(0, 0.5, 1), (0, 0.3, 1)]),
    make_hist_random(np.random.default_rng(15).normal(size=9), [1, 5, 9]),
])
def test_dict_round_trip(sym):
    back = symbol_from_dict(symbol_to_dict(sym))
    assert type(back) is type(sym)
    assert symbol_to_dict(back) == symbol_to_dict(sym)


def test_hist_fixed_rejects_bad_grid():
    with pytest.raises(SymbolError):
        FixedBinHistogramSymbol(((0.0, 0.0, 1.0),), [1, 1], 2)
    with pytest.raises(SymbolError):
        make_hist_fixed([5.0], [(0.0, 1.0)])
