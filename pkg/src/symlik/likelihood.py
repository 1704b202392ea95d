"""Log symbolic likelihoods for every symbol type.

All kernels are vectorised.  A kernel takes a (possibly batched) symbol and a
(possibly batched) family and returns the per-symbol log-likelihood,
broadcasting the family's parameter shape against the symbol batch shape.
Shaping family parameters as ``(K, 1)`` against ``m`` symbols therefore gives
a ``(K, m)`` table, which is how the optimiser evaluates a whole simplex (or a
whole set of replicate fits) at once.

Combinatorial constants are always included.  Powers are taken with
``xlogy`` after flooring the base at zero, so a zero exponent contributes
exactly 0 and a zero base under a positive exponent gives ``-inf``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .distributions import BivariateNormal, DataMatrix, Family
from .errors import DomainError, InvalidParameterError, SymbolError
from .symbols import (
    FixedBinHistogramSymbol,
    IntervalSymbol,
    OrderRectSymbol,
    RandomBinHistogramSymbol,
    RectConfig,
    RectMinMaxSymbol,
    stack_symbols,
)

__all__ = [
    "LogLik",
    "RECT_METHODS",
    "ConfigProbabilities",
    "loglik_interval",
    "loglik_rect_full",
    "loglik_rect_marginalized",
    "loglik_rect_2d",
    "loglik_rect_seq_nest",
    "loglik_rect_iter_seg",
    "loglik_rect_marginal_orders",
    "loglik_hist_fixed",
    "loglik_hist_random",
    "classical_loglik",
    "dataset_loglik",
    "symbol_logliks",
]

RECT_METHODS = ("full", "empty", "l2d")
MIN_MC_SAMPLES = 1000
DEFAULT_RHO_GRID = 401
DEFAULT_MC_SAMPLES = 100_000


@dataclass(frozen=True)
class LogLik:
    """Natural-log likelihood value; ``value`` may be an array for batched input."""

    value: float | np.ndarray
    includes_constant: bool = True

    def __float__(self) -> float:
        return float(self.value)


def _wrap(value) -> LogLik:
    value = np.asarray(value, dtype=float)
    if np.isnan(value).any():
        raise FloatingPointError("log-likelihood evaluated to NaN")
    return LogLik(float(value) if value.ndim == 0 else value)


def _logfact(k):
    return gammaln(np.asarray(k, dtype=float) + 1.0)


def _pow(k, base):
    """k * log(max(base, 0)) with 0 * log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return xlogy(k, np.maximum(base, 0.0))


def _log(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.maximum(x, 0.0))


def _expand(family: Family, k: int) -> Family:
    """Same family with ``k`` trailing singleton axes on every parameter."""
    if k == 0:
        return family
    idx = (Ellipsis,) + (None,) * k
    return type(family)(*(getattr(family, p)[idx] for p in family.param_names), check=False)


def _require_univariate(family: Family):
    if family.dim != 1:
        raise InvalidParameterError(f"{family.name} is not univariate")


def _require_bivariate(family: Family):
    if not isinstance(family, BivariateNormal):
        raise InvalidParameterError("rectangle likelihoods need a BivariateNormal family")


# -- univariate order statistics --------------------------------------------


def _interval_kernel(s_l, s_u, n, l, u, family: Family):
    const = _logfact(n) - _logfact(l - 1) - _logfact(u - l - 1) - _logfact(n - u)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = np.where(l - 1 > 0, (l - 1) * family.logcdf(s_l), 0.0)
        upper = np.where(n - u > 0, (n - u) * family.logsf(s_u), 0.0)
    middle = _pow(u - l - 1, family.cdf(s_u) - family.cdf(s_l))
    out = const + lower + middle + upper + family.logpdf(s_l) + family.logpdf(s_u)
    return np.where(s_l <= s_u, out, -np.inf)


def _ll_interval(sym: IntervalSymbol, family: Family):
    _require_univariate(family)
    return _interval_kernel(sym.s_l, sym.s_u, sym.n, sym.l, sym.u, family)


def _hist_random_kernel(s, k, n, family: Family):
    fam = _expand(family, 1)
    k = np.broadcast_to(k, np.shape(s))
    top = np.broadcast_to(np.asarray(n) + 1, k.shape[:-1])[..., None]
    ext = np.concatenate([np.zeros_like(top), k, top], axis=-1)
    counts = np.diff(ext, axis=-1) - 1  # (..., B + 1)
    cdf = fam.cdf(s)
    dens = np.sum(fam.logpdf(s), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(counts[..., 0] > 0, counts[..., 0] * fam.logcdf(s[..., :1])[..., 0], 0.0)
        last = np.where(counts[..., -1] > 0, counts[..., -1] * fam.logsf(s[..., -1:])[..., 0], 0.0)
    inner = np.sum(_pow(counts[..., 1:-1], np.diff(cdf, axis=-1)), axis=-1)
    const = _logfact(n) - np.sum(_logfact(counts), axis=-1)
    out = const + dens + first + inner + last
    return np.where(np.all(np.diff(s, axis=-1) >= 0, axis=-1), out, -np.inf)


def _ll_hist_random(sym: RandomBinHistogramSymbol, family: Family):
    _require_univariate(family)
    return _hist_random_kernel(sym.s, sym.k, sym.n, family)


def _ll_hist_fixed(sym: FixedBinHistogramSymbol, family: Family):
    d = sym.d
    if d != family.dim:
        raise InvalidParameterError(f"histogram has d={d} but {family.name} has d={family.dim}")
    fam = _expand(family, d)
    if d == 1:
        g = fam.cdf(sym.grids[0])
        probs = np.diff(g, axis=-1)
    elif d == 2:
        e1 = sym.grids[0][:, None]
        e2 = sym.grids[1][None, :]
        G = fam.cdf2(e1, e2)
        probs = np.diff(np.diff(G, axis=-2), axis=-1)
    else:
        raise InvalidParameterError("fixed-bin histograms are supported for d <= 2")
    probs = np.maximum(probs, 0.0)
    axes = tuple(range(-d, 0))
    hull = np.sum(probs, axis=axes, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = probs / hull
    counts = sym.counts
    const = _logfact(sym.n) - np.sum(_logfact(counts), axis=axes)
    return const + np.sum(_pow(counts, probs), axis=axes)


# -- min/max rectangles ----------------------------------------------------------


def _rect_pieces(s_min, s_max, family: BivariateNormal):
    """Log of every building block of the min/max rectangle likelihoods."""
    a1, a2 = s_min[..., 0], s_min[..., 1]
    b1, b2 = s_max[..., 0], s_max[..., 1]
    f = family
    pts = {
        "BL": (a1, a2),
        "TL": (a1, b2),
        "TR": (b1, b2),
        "BR": (b1, a2),
    }
    corner = {k: f.logpdf(np.stack(np.broadcast_arrays(x, y), axis=-1)) for k, (x, y) in pts.items()}
    m1, m2 = f.marginal(0), f.marginal(1)
    # a point on the edge X_i = value with the other coordinate inside the rectangle
    edge = {
        "x1min": m1.logpdf(a1) + _log(f.cond_interval_prob(1, a1, a2, b2)),
        "x1max": m1.logpdf(b1) + _log(f.cond_interval_prob(1, b1, a2, b2)),
        "x2min": m2.logpdf(a2) + _log(f.cond_interval_prob(0, a2, a1, b1)),
        "x2max": m2.logpdf(b2) + _log(f.cond_interval_prob(0, b2, a1, b1)),
    }
    inside = f.rect_prob2(a1, a2, b1, b2)
    return corner, edge, inside


def _ell_table(corner, edge):
    """log ell for each configuration code, in RectConfig.ALL order."""
    return [
        corner["BL"] + corner["TR"],
        corner["TL"] + corner["BR"],
        corner["BL"] + edge["x1max"] + edge["x2max"],
        corner["TL"] + edge["x1max"] + edge["x2min"],
        corner["TR"] + edge["x1min"] + edge["x2min"],
        corner["BR"] + edge["x1min"] + edge["x2max"],
        edge["x1min"] + edge["x1max"] + edge["x2min"] + edge["x2max"],
    ]


def _full_by_config(s_min, s_max, n, family):
    """Stack of L_full log values for all 7 configurations (last axis)."""
    corner, edge, inside = _rect_pieces(s_min, s_max, family)
    ells = _ell_table(corner, edge)
    out = []
    for code, ell in zip(RectConfig.ALL, ells):
        p = RectConfig.P[code]
        with np.errstate(invalid="ignore"):
            const = _logfact(n) - _logfact(np.maximum(n - p, 0))
            val = const + _pow(n - p, inside) + ell
        out.append(np.where(n >= p, val, -np.inf))
    out = np.stack(np.broadcast_arrays(*out), axis=-1)
    ordered = np.all(s_min <= s_max, axis=-1)[..., None]
    return np.where(ordered, out, -np.inf)


def _ll_rect_full(sym: RectMinMaxSymbol, family, config=None):
    _require_bivariate(family)
    config = sym.config if config is None else np.broadcast_to(config, sym.config.shape)
    if np.any(config == RectConfig.UNKNOWN):
        raise SymbolError("L_full needs the construction configuration; use the marginalised likelihood")
    table = _full_by_config(sym.s_min, sym.s_max, sym.n, family)
    cfg = np.broadcast_to(config, table.shape[:-1])
    return np.take_along_axis(table, cfg[..., None], axis=-1)[..., 0]


def _config_codes(i1, i2, x2) -> np.ndarray:
    """Configuration code per sample from the first-margin extremes and second-margin values."""
    j1, j2 = x2.argmin(axis=1), x2.argmax(axis=1)
    code = np.full(x2.shape[0], RectConfig.P4)
    bl, tl, tr, br = i1 == j1, i1 == j2, i2 == j2, i2 == j1
    code[bl] = RectConfig.P3_BL
    code[tl] = RectConfig.P3_TL
    code[tr] = RectConfig.P3_TR
    code[br] = RectConfig.P3_BR
    code[bl & tr] = RectConfig.P2_BL_TR
    code[tl & br] = RectConfig.P2_TL_BR
    return code


def _draw_chunks(mc_samples: int, seed: int, n: int):
    """Standard normal pairs for ``mc_samples`` samples of size ``n``, in fixed-size chunks."""
    rows = max(1, min(mc_samples, 2_000_000 // max(n, 1)))
    for c, start in enumerate(range(0, mc_samples, rows)):
        size = min(rows, mc_samples - start)
        rng = np.random.default_rng(np.random.SeedSequence([seed, n, c]))
        yield rng.standard_normal((size, n)), rng.standard_normal((size, n))


def _config_counts(mc_samples: int, seed: int, n: int, rhos: np.ndarray) -> np.ndarray:
    counts = np.zeros((len(rhos), 7))
    for z1, z2 in _draw_chunks(mc_samples, seed, n):
        i1, i2 = z1.argmin(axis=1), z1.argmax(axis=1)
        for g, rho in enumerate(rhos):
            x2 = rho * z1 + math.sqrt(max(1.0 - rho * rho, 0.0)) * z2
            counts[g] += np.bincount(_config_codes(i1, i2, x2), minlength=7)
    return counts / mc_samples


@functools.lru_cache(maxsize=64)
def _grid_probs(mc_samples: int, seed: int, n: int, grid: int) -> np.ndarray:
    return _config_counts(mc_samples, seed, n, np.linspace(-1.0, 1.0, grid))


class ConfigProbabilities:
    """Monte Carlo estimates of the construction-configuration probabilities.

    Under a bivariate normal the configuration of a sample depends only on
    the ranks, hence only on ``rho`` and ``n``.  One fixed set of standard
    normal draws per ``n`` serves every ``rho`` (common random numbers), so
    results are deterministic given ``seed``.

    With ``grid`` set (the default), the probabilities are estimated once
    per ``n`` at ``grid`` equally spaced values of ``rho`` in [-1, 1] and
    linearly interpolated in between.  This makes the marginalised
    likelihood continuous in ``rho`` and cheap to evaluate; the
    interpolation error is second order in the spacing and far below the
    Monte Carlo error.  ``grid=None`` estimates afresh at every ``rho``.
    """

    def __init__(self, mc_samples: int = DEFAULT_MC_SAMPLES, seed=0, grid: int | None = DEFAULT_RHO_GRID):
        if int(mc_samples) < MIN_MC_SAMPLES:
            raise ValueError(f"mc_samples must be >= {MIN_MC_SAMPLES}")
        if grid is not None and int(grid) < 3:
            raise ValueError("grid must be None or >= 3")
        self.mc_samples = int(mc_samples)
        self.seed = _seed_int(seed)
        self.grid = None if grid is None else int(grid)
        self._cache: dict[tuple[int, float], np.ndarray] = {}

    def probs(self, rho: float, n: int) -> np.ndarray:
        """Length-7 probability vector in RectConfig.ALL order."""
        return self.table(np.asarray(float(rho)), np.asarray(int(n)))

    def direct(self, rho: float, n: int) -> np.ndarray:
        """Estimate at exactly ``rho`` from the same draws, without interpolation."""
        key = (int(n), float(rho))
        if key not in self._cache:
            if len(self._cache) > 50_000:
                self._cache.clear()
            self._cache[key] = _config_counts(self.mc_samples, self.seed, int(n), np.array([float(rho)]))[0]
        return self._cache[key]

    def table(self, rho, n) -> np.ndarray:
        """Probabilities broadcast over arrays of rho and n (trailing axis 7)."""
        rho, n = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(n))
        out = np.empty(rho.shape + (7,))
        for nv in np.unique(n):
            sel = n == nv
            r = rho[sel]
            if self.grid is None:
                uniq, inv = np.unique(r, return_inverse=True)
                vals = np.array([self.direct(v, int(nv)) for v in uniq])
                out[sel] = vals[inv.reshape(-1)]
                continue
            tab = _grid_probs(self.mc_samples, self.seed, int(nv), self.grid)
            # NaN rows come from inadmissible trial points and are masked by the caller
            pos = (np.clip(np.nan_to_num(r), -1.0, 1.0) + 1.0) * (self.grid - 1) / 2.0
            lo = np.minimum(np.floor(pos).astype(np.int64), self.grid - 2)
            w = (pos - lo)[:, None]
            out[sel] = (1.0 - w) * tab[lo] + w * tab[lo + 1]
        return out


def _seed_int(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(2**63))
    return int(seed)


def _ll_rect_empty(sym: RectMinMaxSymbol, family, config_probs: ConfigProbabilities):
    _require_bivariate(family)
    table = _full_by_config(sym.s_min, sym.s_max, sym.n, family)
    rho, n = np.broadcast_arrays(family.rho, sym.n)
    rho = np.broadcast_to(rho, table.shape[:-1])
    n = np.broadcast_to(n, table.shape[:-1])
    w = config_probs.table(rho, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(table + np.log(w), axis=-1)


# -- order-statistic rectangles ----------------------------------------------


def _first_second(s_l, s_u, l, u, axis_order, family: BivariateNormal):
    """Relabel so that the first-processed margin is component 1."""
    if axis_order[0] == 1:
        return s_l, s_u, l, u, family
    flip = (Ellipsis, slice(None, None, -1))
    return s_l[flip], s_u[flip], l[flip], u[flip], family.swapped()


def _seq_nest_kernel(s_l, s_u, l, u, n, axis_order, family):
    s_l, s_u, l, u, f = _first_second(s_l, s_u, l, u, axis_order, family)
    a1, a2 = s_l[..., 0], s_l[..., 1]
    b1, b2 = s_u[..., 0], s_u[..., 1]
    l1, l2, u1, u2 = l[..., 0], l[..., 1], u[..., 0], u[..., 1]
    m1, m2 = f.marginal(0), f.marginal(1)
    G1a, G1b = m1.cdf(a1), m1.cdf(b1)
    Gaa, Gba, Gab, Gbb = f.cdf2(a1, a2), f.cdf2(b1, a2), f.cdf2(a1, b2), f.cdf2(b1, b2)

    k_below, k_above = l1 - 1, n - u1
    k_low2 = l2 - 1
    k_rect = u2 - l2 - 1
    k_high2 = u1 - l1 - 1 - u2
    const = _logfact(n) - (
        _logfact(k_below) + _logfact(k_above) + _logfact(k_low2) + _logfact(k_rect) + _logfact(k_high2)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        below = np.where(k_below > 0, k_below * m1.logcdf(a1), 0.0)
        above = np.where(k_above > 0, k_above * m1.logsf(b1), 0.0)
    out = (
        const
        + below
        + above
        + m1.logpdf(a1)
        + m1.logpdf(b1)
        + m2.logpdf(a2)
        + _log(f.cond_interval_prob(0, a2, a1, b1))
        + m2.logpdf(b2)
        + _log(f.cond_interval_prob(0, b2, a1, b1))
        + _pow(k_low2, Gba - Gaa)
        + _pow(k_rect, Gbb - Gab - Gba + Gaa)
        + _pow(k_high2, G1b - Gbb - G1a + Gab)
    )
    ok = np.all(s_l <= s_u, axis=-1)
    return np.where(ok, out, -np.inf)


def _iter_seg_kernel(s_l, s_u, l, u, n, axis_order, family):
    s_l, s_u, l, u, f = _first_second(s_l, s_u, l, u, axis_order, family)
    a1, a2 = s_l[..., 0], s_l[..., 1]
    b1, b2 = s_u[..., 0], s_u[..., 1]
    l1, l2, u1, u2 = l[..., 0], l[..., 1], u[..., 0], u[..., 1]
    m1, m2 = f.marginal(0), f.marginal(1)
    G1a, G1b = m1.cdf(a1), m1.cdf(b1)
    G2b = m2.cdf(b2)
    Gaa, Gbb = f.cdf2(a1, a2), f.cdf2(b1, b2)

    k_ll = l2 - 1  # X1 < s_l1, X2 < s_l2
    k_lh = l1 - l2 - 1  # X1 < s_l1, X2 > s_l2
    k_mid = u1 - l1 - 1
    k_ul = u2 - 1  # X1 > s_u1, X2 < s_u2
    k_uh = n - u1 - u2  # X1 > s_u1, X2 > s_u2
    const = _logfact(n) - (
        _logfact(k_ll) + _logfact(k_lh) + _logfact(k_mid) + _logfact(k_ul) + _logfact(k_uh)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        cond_low = f.cond_cdf(0, a2, a1)
        cond_high = 1.0 - f.cond_cdf(0, b2, b1)
    out = (
        const
        + m1.logpdf(a1)
        + m1.logpdf(b1)
        + m2.logpdf(a2)
        + _log(cond_low)
        + m2.logpdf(b2)
        + _log(cond_high)
        + _pow(k_mid, G1b - G1a)
        + _pow(k_ll, Gaa)
        + _pow(k_lh, G1a - Gaa)
        + _pow(k_ul, G2b - Gbb)
        + _pow(k_uh, 1.0 - G1b - G2b + Gbb)
    )
    return np.where((a1 <= b1), out, -np.inf)


def _ll_seq_nest(sym: OrderRectSymbol, family):
    _require_bivariate(family)
    return _seq_nest_kernel(sym.s_l, sym.s_u, sym.l, sym.u, sym.n, sym.axis_order, family)


def _ll_iter_seg(sym: OrderRectSymbol, family):
    _require_bivariate(family)
    return _iter_seg_kernel(sym.s_l, sym.s_u, sym.l, sym.u, sym.n, sym.axis_order, family)


def _margin_families(family, d):
    if isinstance(family, BivariateNormal):
        return [family.marginal(0), family.marginal(1)][:d]
    if isinstance(family, Family):
        if d != 1:
            raise InvalidParameterError(f"{d} margins need {d} univariate families")
        return [family]
    families = list(family)
    if len(families) != d:
        raise InvalidParameterError(f"expected {d} per-margin families, got {len(families)}")
    for fam in families:
        _require_univariate(fam)
    return families


def _ll_marginal_orders(sym: OrderRectSymbol, family):
    fams = _margin_families(family, sym.d)
    total = 0.0
    for i, fam in enumerate(fams):
        total = total + _interval_kernel(
            sym.s_l[..., i], sym.s_u[..., i], sym.n, sym.l[..., i], sym.u[..., i], fam
        )
    return total


def _ll_order_rect(sym: OrderRectSymbol, family):
    if sym.construction == "marginal":
        return _ll_marginal_orders(sym, family)
    if sym.construction == "seq_nest":
        return _ll_seq_nest(sym, family)
    return _ll_iter_seg(sym, family)


# -- dispatch -------------------------------------------------------------------


def symbol_logliks(sym, family, rect_method: str = "full", config_probs: ConfigProbabilities | None = None):
    """Per-symbol log-likelihood array for a (batched) symbol and family."""
    if isinstance(sym, IntervalSymbol):
        return _ll_interval(sym, family)
    if isinstance(sym, RandomBinHistogramSymbol):
        return _ll_hist_random(sym, family)
    if isinstance(sym, FixedBinHistogramSymbol):
        return _ll_hist_fixed(sym, family)
    if isinstance(sym, OrderRectSymbol):
        return _ll_order_rect(sym, family)
    if isinstance(sym, RectMinMaxSymbol):
        if rect_method == "full":
            return _ll_rect_full(sym, family)
        if rect_method == "l2d":
            return _ll_rect_full(sym, family, config=RectConfig.P4)
        if rect_method == "empty":
            if config_probs is None:
                config_probs = ConfigProbabilities()
            return _ll_rect_empty(sym, family, config_probs)
        raise ValueError(f"rect_method must be one of {RECT_METHODS}")
    raise SymbolError(f"unsupported symbol type {type(sym).__name__}")


def loglik_interval(sym: IntervalSymbol, family: Family) -> LogLik:
    """Joint density of the (l, u) order statistics of n draws."""
    return _wrap(_ll_interval(sym, family))


def loglik_rect_full(sym: RectMinMaxSymbol, family: BivariateNormal) -> LogLik:
    """Min/max rectangle likelihood with known construction configuration."""
    return _wrap(_ll_rect_full(sym, family))


def loglik_rect_marginalized(
    sym: RectMinMaxSymbol, family: BivariateNormal, mc_samples: int = DEFAULT_MC_SAMPLES, rng=0
) -> LogLik:
    """L_full averaged over configurations, weighted by Monte Carlo configuration probabilities.

    ``rng`` is an integer seed or a Generator (one integer is drawn from it).
    """
    return _wrap(_ll_rect_empty(sym, family, ConfigProbabilities(mc_samples, rng)))


def loglik_rect_2d(sym: RectMinMaxSymbol, family: BivariateNormal) -> LogLik:
    """L_full with every rectangle treated as built by 2d = 4 distinct points."""
    return _wrap(_ll_rect_full(sym, family, config=RectConfig.P4))


def loglik_rect_seq_nest(sym: OrderRectSymbol, family: BivariateNormal) -> LogLik:
    if sym.construction != "seq_nest":
        raise SymbolError("symbol was not built by sequential nesting")
    return _wrap(_ll_seq_nest(sym, family))


def loglik_rect_iter_seg(sym: OrderRectSymbol, family: BivariateNormal) -> LogLik:
    if sym.construction != "iter_seg":
        raise SymbolError("symbol was not built by iterative segmentation")
    return _wrap(_ll_iter_seg(sym, family))


def loglik_rect_marginal_orders(sym: OrderRectSymbol, families) -> LogLik:
    """Product of per-margin interval likelihoods.

    ``families`` is a sequence of univariate families, one per margin (a
    bivariate normal is accepted and split into its marginals).
    """
    if sym.construction != "marginal":
        raise SymbolError("symbol was not built from marginal order statistics")
    return _wrap(_ll_marginal_orders(sym, families))


def loglik_hist_fixed(sym: FixedBinHistogramSymbol, family: Family) -> LogLik:
    """Multinomial likelihood with bin probabilities renormalised to the grid hull."""
    return _wrap(_ll_hist_fixed(sym, family))


def loglik_hist_random(sym: RandomBinHistogramSymbol, family: Family) -> LogLik:
    """Joint density of the selected order statistics."""
    return _wrap(_ll_hist_random(sym, family))


def classical_loglik(X, family: Family) -> LogLik:
    """Sum of log densities of i.i.d. rows."""
    values = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)
    if family.dim == 1:
        values = values.reshape(-1) if values.ndim > 1 and values.shape[-1] == 1 else values
        if not np.all(family.in_support(values)):
            raise DomainError(f"{family.name}: data outside support")
    terms = np.ravel(family.logpdf(values))
    return LogLik(math.fsum(terms.tolist()))


def dataset_loglik(
    symbols: Sequence | object,
    family: Family,
    rect_method: str = "full",
    mc_samples: int = DEFAULT_MC_SAMPLES,
    rng=0,
) -> LogLik:
    """Sum of per-symbol log-likelihoods (exact, order-independent summation)."""
    if isinstance(symbols, (list, tuple)):
        if not symbols:
            raise SymbolError("no symbols")
        kinds = {(type(s), getattr(s, "construction", None)) for s in symbols}
        if len(kinds) != 1:
            raise SymbolError("dataset mixes symbol types")
        batch = stack_symbols(list(symbols)) if len(symbols) > 1 else symbols[0]
    else:
        batch = symbols
    probs = ConfigProbabilities(mc_samples, rng) if rect_method == "empty" else None
    values = np.ravel(symbol_logliks(batch, family, rect_method, probs))
    if np.isnan(values).any():
        raise FloatingPointError("log-likelihood evaluated to NaN")
    if np.any(values == -np.inf):
        return LogLik(-np.inf)
    return LogLik(math.fsum(values.tolist()))
