"""Aggregation functions: micro-data matrices to symbols.

Each symbol dataclass holds either a single symbol (scalar / vector fields) or
a batch of symbols (extra leading axes on every data field).  The batched
form is what the likelihood kernels consume; :func:`stack_symbols` turns a
list of single symbols into one batch and ``SymbolSpec.build_batch`` builds a
batch straight from an array of simulated samples.

Order indices are 1-based throughout, as are ``axis_order`` entries.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .distributions import DataMatrix
from .errors import SymbolError, TieError

__all__ = [
    "IntervalSymbol",
    "RectMinMaxSymbol",
    "OrderRectSymbol",
    "FixedBinHistogramSymbol",
    "RandomBinHistogramSymbol",
    "Symbol",
    "RectConfig",
    "SymbolSpec",
    "make_interval",
    "make_rect_minmax",
    "make_rect_marginal",
    "make_rect_seq_nest",
    "make_rect_iter_seg",
    "make_hist_fixed",
    "make_hist_random",
    "stack_symbols",
    "symbol_to_dict",
    "symbol_from_dict",
]


class RectConfig:
    """Integer codes for the construction-point configuration of a min/max rectangle.

    Corners: BL = (min1, min2), TL = (min1, max2), TR = (max1, max2),
    BR = (max1, min2).  ``UNKNOWN`` marks a rectangle stored without locations.
    """

    UNKNOWN = -1
    P2_BL_TR = 0
    P2_TL_BR = 1
    P3_BL = 2
    P3_TL = 3
    P3_TR = 4
    P3_BR = 5
    P4 = 6

    ALL = (0, 1, 2, 3, 4, 5, 6)
    P = {-1: 0, 0: 2, 1: 2, 2: 3, 3: 3, 4: 3, 5: 3, 6: 4}
    # P as an array indexed by code + 1
    P_TABLE = np.array([0, 2, 2, 3, 3, 3, 3, 4])
    # corner of the single point for p=3 as (use_max_1, use_max_2)
    CORNER = {2: (0, 0), 3: (0, 1), 4: (1, 1), 5: (1, 0)}


def _int_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.int64)


def _float_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _index(value, idx):
    return value[idx] if isinstance(value, np.ndarray) and value.ndim > 0 else value


class _SymbolBase:
    kind: str = ""
    # names of fields carrying per-symbol data (indexed by take())
    _data_fields: tuple[str, ...] = ()

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return np.shape(self.n)

    def take(self, idx):
        """Index the leading batch axis (all per-symbol fields).

        The parent batch is already validated, so the invariants are not
        re-checked; this keeps the optimiser's inner loop cheap.
        """
        new = object.__new__(type(self))
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in self._data_fields:
                value = _index(value, idx)
            object.__setattr__(new, f.name, value)
        return new

    def __len__(self) -> int:
        shape = self.batch_shape
        if not shape:
            raise TypeError("single symbol has no length")
        return shape[0]


@dataclass(frozen=True)
class IntervalSymbol(_SymbolBase):
    """Order-statistic interval (x_(l), x_(u), n)."""

    s_l: Any
    s_u: Any
    n: Any
    l: Any
    u: Any
    kind = "interval"
    _data_fields = ("s_l", "s_u", "n", "l", "u")

    def __post_init__(self):
        s_l, s_u = np.broadcast_arrays(_float_array(self.s_l), _float_array(self.s_u))
        n, l, u = np.broadcast_arrays(*(_int_array(v) for v in (self.n, self.l, self.u)))
        n, l, u = (np.broadcast_to(v, s_l.shape) for v in (n, l, u))
        if np.any(s_l > s_u):
            raise SymbolError("interval requires s_l <= s_u")
        if np.any(l < 1) or np.any(l >= u) or np.any(u > n):
            raise SymbolError("interval requires 1 <= l < u <= n")
        for name, value in zip(("s_l", "s_u", "n", "l", "u"), (s_l, s_u, n, l, u)):
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class RectMinMaxSymbol(_SymbolBase):
    """Bivariate min/max rectangle with construction-point configuration."""

    s_min: Any
    s_max: Any
    config: Any
    n: Any
    kind = "rect_minmax"
    _data_fields = ("s_min", "s_max", "config", "n")

    def __post_init__(self):
        s_min = _float_array(self.s_min)
        s_max = _float_array(self.s_max)
        if s_min.shape[-1:] != (2,) or s_max.shape != s_min.shape:
            raise SymbolError("rectangle bounds must be matching (..., 2) arrays")
        bshape = s_min.shape[:-1]
        config = np.broadcast_to(_int_array(self.config), bshape)
        n = np.broadcast_to(_int_array(self.n), bshape)
        if np.any(s_min > s_max):
            raise SymbolError("rectangle requires s_min <= s_max")
        if not np.all(np.isin(config, (RectConfig.UNKNOWN,) + RectConfig.ALL)):
            raise SymbolError("unknown rectangle configuration code")
        p = RectConfig.P_TABLE[config + 1]
        if np.any(n < 2) or np.any((config >= 0) & (p > n)):
            raise SymbolError("rectangle requires n >= 2 and p <= n")
        object.__setattr__(self, "s_min", s_min)
        object.__setattr__(self, "s_max", s_max)
        object.__setattr__(self, "config", config)
        object.__setattr__(self, "n", n)

    @property
    def p(self):
        if self.config.ndim == 0:
            value = RectConfig.P[int(self.config)]
            return value or None
        return RectConfig.P_TABLE[self.config + 1]

    @property
    def locations(self) -> list[np.ndarray] | None:
        """Defining points: two corners (p=2), one corner (p=3), none (p=4)."""
        if self.config.ndim != 0:
            raise TypeError("locations is defined for single symbols")
        c = int(self.config)
        lo, hi = self.s_min, self.s_max
        if c == RectConfig.UNKNOWN:
            return None
        if c == RectConfig.P2_BL_TR:
            return [lo.copy(), hi.copy()]
        if c == RectConfig.P2_TL_BR:
            return [np.array([lo[0], hi[1]]), np.array([hi[0], lo[1]])]
        if c in RectConfig.CORNER:
            m1, m2 = RectConfig.CORNER[c]
            return [np.array([(lo, hi)[m1][0], (lo, hi)[m2][1]])]
        return []

    def without_locations(self) -> "RectMinMaxSymbol":
        return dataclasses.replace(self, config=np.full_like(self.config, RectConfig.UNKNOWN))


CONSTRUCTIONS = ("marginal", "seq_nest", "iter_seg")


@dataclass(frozen=True)
class OrderRectSymbol(_SymbolBase):
    """Rectangle from marginal order statistics.

    ``s_l``, ``s_u``, ``l`` and ``u`` are given in the original axis order;
    ``axis_order`` (1-based) records which margin was processed first.
    """

    s_l: Any
    s_u: Any
    l: Any
    u: Any
    n: Any
    construction: str = "marginal"
    axis_order: tuple[int, ...] = (1, 2)
    kind = "rect_order"
    _data_fields = ("s_l", "s_u", "l", "u", "n")

    def __post_init__(self):
        s_l = _float_array(self.s_l)
        s_u = _float_array(self.s_u)
        if s_l.ndim == 0 or s_l.shape != s_u.shape:
            raise SymbolError("order rectangle bounds must be matching (..., d) arrays")
        d = s_l.shape[-1]
        l = np.broadcast_to(_int_array(self.l), s_l.shape)
        u = np.broadcast_to(_int_array(self.u), s_l.shape)
        n = np.broadcast_to(_int_array(self.n), s_l.shape[:-1])
        if self.construction not in CONSTRUCTIONS:
            raise SymbolError(f"construction must be one of {CONSTRUCTIONS}")
        axis_order = tuple(int(a) for a in self.axis_order)
        if len(axis_order) != d:
            axis_order = tuple(range(1, d + 1)) if self.construction == "marginal" else axis_order
        if sorted(axis_order) != list(range(1, d + 1)):
            raise SymbolError("axis_order must be a permutation of 1..d")
        # under iterative segmentation the second-margin bounds come from
        # disjoint row subsets, so only the first processed margin is ordered
        checked = [axis_order[0] - 1] if self.construction == "iter_seg" else slice(None)
        if np.any(s_l[..., checked] > s_u[..., checked]):
            raise SymbolError("order rectangle requires s_l <= s_u")
        _check_orders(self.construction, l, u, n, axis_order)
        object.__setattr__(self, "s_l", s_l)
        object.__setattr__(self, "s_u", s_u)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "axis_order", axis_order)

    @property
    def d(self) -> int:
        return self.s_l.shape[-1]


def _check_orders(construction, l, u, n, axis_order):
    if np.any(l < 1):
        raise SymbolError("order indices must be >= 1")
    if construction == "marginal":
        if np.any(l >= u) or np.any(u > n[..., None]):
            raise SymbolError("marginal rectangle requires 1 <= l_i < u_i <= n")
        return
    if l.shape[-1] != 2:
        raise SymbolError(f"{construction} construction is implemented for d = 2 only")
    first, second = axis_order[0] - 1, axis_order[1] - 1
    l1, u1, l2, u2 = l[..., first], u[..., first], l[..., second], u[..., second]
    if np.any(l1 >= u1) or np.any(u1 > n):
        raise SymbolError("first margin requires 1 <= l < u <= n")
    if construction == "seq_nest":
        if np.any(u2 < 2) or np.any(u2 > u1 - l1 - 1) or np.any(l2 >= u2):
            raise SymbolError("sequential nesting requires 1 <= l2 < u2 and 2 <= u2 <= u1 - l1 - 1")
    else:
        if np.any(l2 >= l1 - 1):
            raise SymbolError("iterative segmentation requires l2 < l1 - 1")
        if np.any(u2 >= n - u1):
            raise SymbolError("iterative segmentation requires u2 < n - u1")


@dataclass(frozen=True)
class FixedBinHistogramSymbol(_SymbolBase):
    """Counts over a fixed product grid; bins are (left, right] per margin."""

    grids: tuple
    counts: Any
    n: Any
    kind = "hist_fixed"
    _data_fields = ("counts", "n")

    def __post_init__(self):
        grids = tuple(np.asarray(g, dtype=float) for g in self.grids)
        for g in grids:
            if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0) or not np.all(np.isfinite(g)):
                raise SymbolError("each grid needs >= 2 strictly increasing finite edges")
        counts = _int_array(self.counts)
        nb = tuple(g.size - 1 for g in grids)
        if counts.shape[counts.ndim - len(grids):] != nb:
            raise SymbolError(f"counts shape {counts.shape} does not match grid bins {nb}")
        bshape = counts.shape[: counts.ndim - len(grids)]
        n = np.broadcast_to(_int_array(self.n), bshape)
        if np.any(counts < 0):
            raise SymbolError("counts must be nonnegative")
        axes = tuple(range(len(bshape), counts.ndim))
        if np.any(counts.sum(axis=axes) != n):
            raise SymbolError("counts must sum to n")
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", n)

    @property
    def d(self) -> int:
        return len(self.grids)


@dataclass(frozen=True)
class RandomBinHistogramSymbol(_SymbolBase):
    """Selected order statistics (x_(k_1), ..., x_(k_B), n)."""

    s: Any
    k: Any
    n: Any
    kind = "hist_random"
    _data_fields = ("s", "k", "n")

    def __post_init__(self):
        s = _float_array(self.s)
        if s.ndim == 0:
            raise SymbolError("random-bin histogram needs a vector of order statistics")
        k = np.broadcast_to(_int_array(self.k), s.shape)
        n = np.broadcast_to(_int_array(self.n), s.shape[:-1])
        if np.any(np.diff(s, axis=-1) < 0):
            raise SymbolError("order statistics must be nondecreasing")
        if np.any(k[..., 0] < 1) or np.any(np.diff(k, axis=-1) <= 0) or np.any(k[..., -1] > n):
            raise SymbolError("orders must satisfy 1 <= k_1 < ... < k_B <= n")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n", n)

    @property
    def B(self) -> int:
        return self.s.shape[-1]

    def implied_counts(self) -> np.ndarray:
        """Counts of the B + 1 open bins between consecutive order statistics."""
        zero = np.zeros(self.k.shape[:-1] + (1,), dtype=np.int64)
        ext = np.concatenate([zero, self.k, (self.n + 1)[..., None]], axis=-1)
        return np.diff(ext, axis=-1) - 1


Symbol = (
    IntervalSymbol
    | RectMinMaxSymbol
    | OrderRectSymbol
    | FixedBinHistogramSymbol
    | RandomBinHistogramSymbol
)


# -- vectorised builders ----------------------------------------------------


def _check_distinct(sorted_vals, what="data"):
    if np.any(np.diff(sorted_vals, axis=-1) == 0):
        raise TieError(f"tied values in {what}; constructions assume continuous data")


def _interval_batch(x, l, u) -> IntervalSymbol:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if not (1 <= l < u <= n):
        raise SymbolError(f"need 1 <= l < u <= n, got l={l}, u={u}, n={n}")
    xs = np.sort(x, axis=-1)
    return IntervalSymbol(xs[..., l - 1], xs[..., u - 1], n, l, u)


def _hist_random_batch(x, k) -> RandomBinHistogramSymbol:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    k = np.asarray(k, dtype=np.int64)
    if k.ndim != 1 or k.size < 1 or k[0] < 1 or k[-1] > n or np.any(np.diff(k) <= 0):
        raise SymbolError(f"orders must satisfy 1 <= k_1 < ... < k_B <= n={n}, got {k.tolist()}")
    xs = np.sort(x, axis=-1)
    return RandomBinHistogramSymbol(xs[..., k - 1], k, n)


def _minmax_batch(X) -> RectMinMaxSymbol:
    X = np.asarray(X, dtype=float)
    n, d = X.shape[-2:]
    if d != 2:
        raise SymbolError("min/max rectangles with construction points are implemented for d = 2")
    if n < 2:
        raise SymbolError("min/max rectangle needs n >= 2")
    lo = X.min(axis=-2)
    hi = X.max(axis=-2)
    if np.any((X == lo[..., None, :]).sum(axis=-2) > 1) or np.any((X == hi[..., None, :]).sum(axis=-2) > 1):
        raise TieError("a marginal extreme is attained by more than one row")
    i1 = X[..., 0].argmin(axis=-1)
    i2 = X[..., 0].argmax(axis=-1)
    j1 = X[..., 1].argmin(axis=-1)
    j2 = X[..., 1].argmax(axis=-1)
    config = np.full(i1.shape, RectConfig.P4, dtype=np.int64)
    bl, tl, tr, br = i1 == j1, i1 == j2, i2 == j2, i2 == j1
    config[bl] = RectConfig.P3_BL
    config[tl] = RectConfig.P3_TL
    config[tr] = RectConfig.P3_TR
    config[br] = RectConfig.P3_BR
    config[bl & tr] = RectConfig.P2_BL_TR
    config[tl & br] = RectConfig.P2_TL_BR
    return RectMinMaxSymbol(lo, hi, config, n)


def _marginal_batch(X, l, u) -> OrderRectSymbol:
    X = np.asarray(X, dtype=float)
    n, d = X.shape[-2:]
    l = np.asarray(l, dtype=np.int64).reshape(d)
    u = np.asarray(u, dtype=np.int64).reshape(d)
    if np.any(l < 1) or np.any(l >= u) or np.any(u > n):
        raise SymbolError("marginal rectangle requires 1 <= l_i < u_i <= n")
    xs = np.sort(X, axis=-2)
    cols = np.arange(d)
    return OrderRectSymbol(xs[..., l - 1, cols], xs[..., u - 1, cols], l, u, n, "marginal", tuple(range(1, d + 1)))


def _nested_parts(X, axis_order):
    X = np.asarray(X, dtype=float)
    n, d = X.shape[-2:]
    if d != 2:
        raise SymbolError("nested constructions are implemented for d = 2")
    axis_order = tuple(int(a) for a in axis_order)
    if sorted(axis_order) != [1, 2]:
        raise SymbolError("axis_order must be a permutation of (1, 2)")
    first, second = axis_order[0] - 1, axis_order[1] - 1
    a = X[..., first]
    b = X[..., second]
    order = np.argsort(a, axis=-1, kind="stable")
    a_sorted = np.take_along_axis(a, order, axis=-1)
    _check_distinct(a_sorted, f"margin {first + 1}")
    _check_distinct(np.sort(b, axis=-1), f"margin {second + 1}")
    b_by_a = np.take_along_axis(b, order, axis=-1)
    return n, first, second, a_sorted, b_by_a, axis_order


def _assemble(first, second, s1_lo, s1_hi, s2_lo, s2_hi):
    s_l = np.empty(np.shape(s1_lo) + (2,))
    s_u = np.empty_like(s_l)
    s_l[..., first], s_u[..., first] = s1_lo, s1_hi
    s_l[..., second], s_u[..., second] = s2_lo, s2_hi
    return s_l, s_u


def _seq_nest_batch(X, l, u, axis_order=(1, 2)) -> OrderRectSymbol:
    n, first, second, a_sorted, b_by_a, axis_order = _nested_parts(X, axis_order)
    l = np.asarray(l, dtype=np.int64).reshape(2)
    u = np.asarray(u, dtype=np.int64).reshape(2)
    l1, u1, l2, u2 = l[first], u[first], l[second], u[second]
    _check_orders("seq_nest", l, u, np.asarray(n), axis_order)
    inner = np.sort(b_by_a[..., l1 : u1 - 1], axis=-1)
    s_l, s_u = _assemble(
        first, second, a_sorted[..., l1 - 1], a_sorted[..., u1 - 1], inner[..., l2 - 1], inner[..., u2 - 1]
    )
    return OrderRectSymbol(s_l, s_u, l, u, n, "seq_nest", axis_order)


def _iter_seg_batch(X, l, u, axis_order=(1, 2), upper_from_top: bool = False) -> OrderRectSymbol:
    n, first, second, a_sorted, b_by_a, axis_order = _nested_parts(X, axis_order)
    l = np.asarray(l, dtype=np.int64).reshape(2)
    u = np.asarray(u, dtype=np.int64).reshape(2)
    l1, u1, l2, u2 = l[first], u[first], l[second], u[second]
    _check_orders("iter_seg", l, u, np.asarray(n), axis_order)
    below = np.sort(b_by_a[..., : l1 - 1], axis=-1)
    above = np.sort(b_by_a[..., u1:], axis=-1)
    # the upper order statistic counts from the bottom of the upper subset
    upper_pos = (n - u1 - u2) if upper_from_top else (u2 - 1)
    s_l, s_u = _assemble(
        first, second, a_sorted[..., l1 - 1], a_sorted[..., u1 - 1], below[..., l2 - 1], above[..., upper_pos]
    )
    return OrderRectSymbol(s_l, s_u, l, u, n, "iter_seg", axis_order)


def _hist_fixed_batch(X, grids) -> FixedBinHistogramSymbol:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape[-2:]
    grids = tuple(np.asarray(g, dtype=float) for g in grids)
    if len(grids) != d:
        raise SymbolError(f"need one grid per dimension ({d}), got {len(grids)}")
    bshape = X.shape[:-2]
    flat = np.zeros(bshape + (n,), dtype=np.int64)
    nbins = []
    for j, g in enumerate(grids):
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise SymbolError("grid edges must be strictly increasing with at least one bin")
        x = X[..., j]
        if np.any(x < g[0]) or np.any(x > g[-1]):
            raise SymbolError(f"data outside the grid hull in dimension {j + 1}")
        idx = np.searchsorted(g, x, side="left") - 1
        idx = np.maximum(idx, 0)  # leftmost edge is inclusive
        flat = flat * (g.size - 1) + idx
        nbins.append(g.size - 1)
    total = int(np.prod(nbins))
    rows = flat.reshape(-1, n)
    counts = np.zeros((rows.shape[0], total), dtype=np.int64)
    for r in range(rows.shape[0]):
        counts[r] = np.bincount(rows[r], minlength=total)
    counts = counts.reshape(bshape + tuple(nbins))
    return FixedBinHistogramSymbol(grids, counts, n)


# -- single-symbol constructors ---------------------------------------------


def _matrix(X) -> np.ndarray:
    return X.values if isinstance(X, DataMatrix) else DataMatrix(X).values


def _vector(x) -> np.ndarray:
    v = _matrix(x)
    if v.shape[1] != 1:
        raise SymbolError("expected univariate data")
    return v[:, 0]


def make_interval(x, l: int, u: int) -> IntervalSymbol:
    """Interval (x_(l), x_(u), n) from a univariate sample."""
    return _interval_batch(_vector(x), int(l), int(u))


def make_rect_minmax(X) -> RectMinMaxSymbol:
    """Bounding box of bivariate data with the number and location of its defining points."""
    return _minmax_batch(_matrix(X))


def make_rect_marginal(X, l, u) -> OrderRectSymbol:
    """Per-margin order statistics, taken independently in each dimension."""
    return _marginal_batch(_matrix(X), l, u)


def make_rect_seq_nest(X, l, u, axis_order=(1, 2)) -> OrderRectSymbol:
    """Sequentially nested rectangle: second-margin orders among rows inside the first interval."""
    return _seq_nest_batch(_matrix(X), l, u, axis_order)


def make_rect_iter_seg(X, l, u, axis_order=(1, 2)) -> OrderRectSymbol:
    """Iteratively segmented rectangle.

    The second-margin lower bound is the ``l2``-th smallest value among rows
    below the first-margin lower bound; the upper bound is the ``u2``-th
    smallest among rows above the first-margin upper bound.
    """
    return _iter_seg_batch(_matrix(X), l, u, axis_order)


def make_hist_fixed(X, grids) -> FixedBinHistogramSymbol:
    """Counts of rows in each (left, right] bin of a product grid."""
    X = _matrix(X)
    if not isinstance(grids, (list, tuple)) or np.ndim(grids[0]) == 0:
        grids = (grids,)
    return _hist_fixed_batch(X, grids)


def make_hist_random(x, k) -> RandomBinHistogramSymbol:
    """Order statistics x_(k_1) <= ... <= x_(k_B) with n."""
    return _hist_random_batch(_vector(x), k)


# -- symbol specifications --------------------------------------------------


SYMBOL_KINDS = ("interval", "rect_minmax", "rect_order", "hist_fixed", "hist_random")


@dataclass(frozen=True)
class SymbolSpec:
    """Recipe for building a symbol from a class's micro-data.

    Negative order indices count from the end (-1 is n), which lets one spec
    serve classes of different sizes.
    """

    kind: str
    l: tuple[int, ...] | int | None = None
    u: tuple[int, ...] | int | None = None
    k: tuple[int, ...] | None = None
    grids: tuple[tuple[float, ...], ...] | None = None
    construction: str = "marginal"
    axis_order: tuple[int, ...] = (1, 2)
    upper_from_top: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.kind not in SYMBOL_KINDS:
            raise SymbolError(f"unknown symbol kind {self.kind!r}; choose from {SYMBOL_KINDS}")

    @staticmethod
    def _resolve(idx, n):
        arr = np.asarray(idx, dtype=np.int64)
        return np.where(arr < 0, n + 1 + arr, arr)

    def build(self, X) -> Symbol:
        """Build one symbol from a DataMatrix (or array)."""
        values = _matrix(X)
        return self.build_batch(values)

    def build_batch(self, X) -> Symbol:
        """Build a batch of symbols from an array of shape (..., n, d) (or (..., n) if d = 1)."""
        X = np.asarray(X, dtype=float)
        if self.kind in ("interval", "hist_random"):
            if X.ndim >= 2 and X.shape[-1] == 1:
                X = X[..., 0]
            n = X.shape[-1]
            if self.kind == "interval":
                return _interval_batch(X, int(self._resolve(self.l, n)), int(self._resolve(self.u, n)))
            return _hist_random_batch(X, self._resolve(self.k, n))
        if X.ndim == 1 or (self.kind == "hist_fixed" and len(self.grids) == 1 and X.shape[-1] != 1):
            X = X[..., None]
        n = X.shape[-2]
        if self.kind == "rect_minmax":
            return _minmax_batch(X)
        if self.kind == "hist_fixed":
            return _hist_fixed_batch(X, self.grids)
        l, u = self._resolve(self.l, n), self._resolve(self.u, n)
        if self.construction == "marginal":
            return _marginal_batch(X, l, u)
        if self.construction == "seq_nest":
            return _seq_nest_batch(X, l, u, self.axis_order)
        if self.construction == "iter_seg":
            return _iter_seg_batch(X, l, u, self.axis_order, self.upper_from_top)
        raise SymbolError(f"unknown construction {self.construction!r}")


# -- stacking ------------------------------------------------------------------


def stack_symbols(symbols: Sequence[Symbol]) -> Symbol:
    """Combine symbols of one type and equal batch shape along a new leading axis."""
    if not symbols:
        raise SymbolError("no symbols to stack")
    kinds = {type(s) for s in symbols}
    if len(kinds) != 1:
        raise SymbolError(f"mixed symbol types: {sorted(k.__name__ for k in kinds)}")
    first = symbols[0]
    if any(s.batch_shape != first.batch_shape for s in symbols):
        raise SymbolError("stack_symbols expects symbols with equal batch shapes")
    if isinstance(first, FixedBinHistogramSymbol):
        for s in symbols[1:]:
            if len(s.grids) != len(first.grids) or any(
                not np.array_equal(a, b) for a, b in zip(s.grids, first.grids)
            ):
                raise SymbolError("histograms with different grids cannot be stacked")
        return FixedBinHistogramSymbol(first.grids, np.stack([s.counts for s in symbols]), [s.n for s in symbols])
    if isinstance(first, OrderRectSymbol):
        if any(s.construction != first.construction or s.axis_order != first.axis_order for s in symbols):
            raise SymbolError("order rectangles with different constructions cannot be stacked")
        return OrderRectSymbol(
            *(np.stack([getattr(s, f) for s in symbols]) for f in ("s_l", "s_u", "l", "u", "n")),
            construction=first.construction,
            axis_order=first.axis_order,
        )
    if isinstance(first, RandomBinHistogramSymbol):
        if len({s.B for s in symbols}) != 1:
            raise SymbolError("random-bin histograms must share the number of bins B")
    return type(first)(*(np.stack([getattr(s, f) for s in symbols]) for f in first._data_fields))


# -- JSON mapping ------------------------------------------------------------


def _f(x):
    return [float(v) for v in np.ravel(x)] if np.ndim(x) else float(x)


def symbol_to_dict(sym: Symbol) -> dict:
    """Plain-dict form of a single symbol, following the documented JSON schema."""
    if sym.batch_shape:
        raise SymbolError("only single symbols can be serialised")
    n = int(sym.n)
    if isinstance(sym, IntervalSymbol):
        return {"type": "interval", "n": n, "s_l": float(sym.s_l), "s_u": float(sym.s_u), "l": int(sym.l), "u": int(sym.u)}
    if isinstance(sym, RectMinMaxSymbol):
        locs = sym.locations
        return {
            "type": "rect_minmax",
            "n": n,
            "s_min": _f(sym.s_min),
            "s_max": _f(sym.s_max),
            "p": sym.p,
            "locations": None if locs is None else [_f(p) for p in locs],
        }
    if isinstance(sym, OrderRectSymbol):
        return {
            "type": "rect_order",
            "n": n,
            "s_l": _f(sym.s_l),
            "s_u": _f(sym.s_u),
            "l": [int(v) for v in sym.l],
            "u": [int(v) for v in sym.u],
            "construction": sym.construction,
            "axis_order": list(sym.axis_order),
        }
    if isinstance(sym, FixedBinHistogramSymbol):
        return {
            "type": "hist_fixed",
            "n": n,
            "grids": [_f(g) for g in sym.grids],
            "counts": sym.counts.tolist(),
        }
    if isinstance(sym, RandomBinHistogramSymbol):
        return {"type": "hist_random", "n": n, "s": _f(sym.s), "k": [int(v) for v in sym.k]}
    raise SymbolError(f"cannot serialise {type(sym).__name__}")


def _config_from_locations(s_min, s_max, p, locations) -> int:
    if p is None and locations is None:
        return RectConfig.UNKNOWN
    p = int(p)
    locations = [np.asarray(v, dtype=float) for v in (locations or [])]

    def corner_code(pt):
        m1 = {s_min[0]: 0, s_max[0]: 1}.get(pt[0])
        m2 = {s_min[1]: 0, s_max[1]: 1}.get(pt[1])
        if m1 is None or m2 is None:
            raise SymbolError(f"location {pt.tolist()} is not a rectangle corner")
        return (m1, m2)

    if p == 4:
        if locations:
            raise SymbolError("p = 4 rectangles carry no locations")
        return RectConfig.P4
    if p == 3:
        if len(locations) != 1:
            raise SymbolError("p = 3 rectangles carry exactly one corner location")
        code = corner_code(locations[0])
        return {v: k for k, v in RectConfig.CORNER.items()}[code]
    if p == 2:
        if len(locations) != 2:
            raise SymbolError("p = 2 rectangles carry two corner locations")
        corners = {corner_code(v) for v in locations}
        if corners == {(0, 0), (1, 1)}:
            return RectConfig.P2_BL_TR
        if corners == {(0, 1), (1, 0)}:
            return RectConfig.P2_TL_BR
        raise SymbolError("p = 2 locations must be opposite corners")
    raise SymbolError(f"unsupported p = {p}")


def symbol_from_dict(obj: dict) -> Symbol:
    """Inverse of :func:`symbol_to_dict`; raises SymbolError on schema violations."""
    try:
        kind = obj["type"]
        n = int(obj["n"])
        if kind == "interval":
            return IntervalSymbol(float(obj["s_l"]), float(obj["s_u"]), n, int(obj["l"]), int(obj["u"]))
        if kind == "rect_minmax":
            s_min = np.asarray(obj["s_min"], dtype=float)
            s_max = np.asarray(obj["s_max"], dtype=float)
            config = _config_from_locations(s_min, s_max, obj.get("p"), obj.get("locations"))
            return RectMinMaxSymbol(s_min, s_max, config, n)
        if kind == "rect_order":
            return OrderRectSymbol(
                obj["s_l"], obj["s_u"], obj["l"], obj["u"], n,
                construction=obj.get("construction", "marginal"),
                axis_order=tuple(obj.get("axis_order", range(1, len(obj["s_l"]) + 1))),
            )
        if kind == "hist_fixed":
            return FixedBinHistogramSymbol(tuple(obj["grids"]), np.asarray(obj["counts"]), n)
        if kind == "hist_random":
            return RandomBinHistogramSymbol(obj["s"], obj["k"], n)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SymbolError):
            raise
        raise SymbolError(f"malformed symbol object: {exc}") from exc
    raise SymbolError(f"unknown symbol type {obj.get('type')!r}")
