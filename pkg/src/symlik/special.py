"""Special functions: standard bivariate normal CDF and Owen's T.

The bivariate normal integral follows Genz's vectorisable adaptation of the
Drezner & Wesolowsky (1989) scheme: Gauss-Legendre quadrature over the
arcsine of the correlation for |r| < 0.925 and an asymptotic expansion plus
quadrature near |r| = 1.  Absolute error is below 1e-14 in double precision.

Owen's T function is evaluated by Gauss-Legendre quadrature of its defining
integral, with the reflection identity used for |a| > 1 so the integration
range never exceeds [0, 1].
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

__all__ = ["bvn_cdf", "bvn_upper", "owens_t"]

_TWO_PI = 2.0 * np.pi
_BIG = 38.0  # ndtr(-38) underflows to ~3e-316; clip infinities here


def _gl_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on [0, 2] with weights summing to 2
    x, w = leggauss(n)
    return 1.0 + x, w


_GL6 = _gl_unit(6)
_GL12 = _gl_unit(12)
_GL20 = _gl_unit(20)


def _bvnu_low(h, k, r, nodes):
    x, w = nodes
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    asr = 0.5 * np.arcsin(r)
    sn = np.sin(asr[:, None] * x)
    terms = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn))
    return (terms @ w) * asr / _TWO_PI + ndtr(-h) * ndtr(-k)


def _bvnu_high(h, k, r):
    xs_nodes, w = _GL20
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    bvn = np.zeros_like(h)
    lt1 = np.abs(r) < 1.0

    if np.any(lt1):
        hh, kk, rr, hhk = h[lt1], k[lt1], r[lt1], hk[lt1]
        a_s = 1.0 - rr * rr
        a = np.sqrt(a_s)
        bs = (hh - kk) ** 2
        c = (4.0 - hhk) / 8.0
        d = (12.0 - hhk) / 80.0
        asr = -0.5 * (bs / a_s + hhk)
        part = np.where(
            asr > -100.0,
            a * np.exp(np.maximum(asr, -100.0))
            * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s),
            0.0,
        )
        b = np.sqrt(bs)
        sp = np.sqrt(_TWO_PI) * ndtr(-b / a)
        part = np.where(
            hhk > -100.0,
            part
            - np.exp(-0.5 * np.maximum(hhk, -100.0)) * sp * b
            * (1.0 - c * bs * (1.0 - d * bs) / 3.0),
            part,
        )
        a = a / 2.0
        xs = (a[:, None] * xs_nodes) ** 2
        asr2 = -0.5 * (bs[:, None] / xs + hhk[:, None])
        ok = asr2 > -100.0
        sp2 = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * hhk[:, None] * xs / (1.0 + rs) ** 2) / rs
        integrand = np.where(ok, np.exp(np.where(ok, asr2, -100.0)) * (sp2 - ep), 0.0)
        bvn[lt1] = (a * (integrand @ w) - part) / _TWO_PI

    pos = ~neg
    out = np.empty_like(h)
    out[pos] = bvn[pos] + ndtr(-np.maximum(h[pos], k[pos]))
    if np.any(neg):
        hn, kn, bn = h[neg], k[neg], bvn[neg]
        lower = np.where(hn < 0, ndtr(kn) - ndtr(hn), ndtr(-hn) - ndtr(-kn))
        out[neg] = np.where(hn >= kn, -bn, lower - bn)
    return out


def bvn_upper(h, k, r) -> np.ndarray:
    """P(X > h, Y > k) for a standard bivariate normal with correlation r."""
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(r, dtype=float)
    )
    shape = h.shape
    h = np.clip(h.ravel(), -_BIG, _BIG)
    k = np.clip(k.ravel(), -_BIG, _BIG)
    r = r.ravel()
    out = np.empty_like(h)
    ar = np.abs(r)
    groups = (
        (ar < 0.3, _GL6),
        ((ar >= 0.3) & (ar < 0.75), _GL12),
        ((ar >= 0.75) & (ar < 0.925), _GL20),
    )
    for mask, nodes in groups:
        if np.any(mask):
            out[mask] = _bvnu_low(h[mask], k[mask], r[mask], nodes)
    high = ar >= 0.925
    if np.any(high):
        out[high] = _bvnu_high(h[high], k[high], r[high])
    return np.clip(out, 0.0, 1.0).reshape(shape)


def bvn_cdf(x, y, r) -> np.ndarray:
    """Standard bivariate normal CDF P(X <= x, Y <= y) with correlation r.

    Infinite limits are accepted.  Arguments broadcast against each other.
    """
    x, y, r = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(r, dtype=float)
    )
    out = bvn_upper(-x, -y, r)
    if np.isinf(x).any() or np.isinf(y).any():
        out = np.where(x == np.inf, ndtr(y), out)
        out = np.where(y == np.inf, ndtr(x), out)
        out = np.where((x == -np.inf) | (y == -np.inf), 0.0, out)
    return out


_OT_NODES = leggauss(20)


def _owens_t_unit(h, a):
    # T(h, a) for 0 <= a <= 1 by quadrature of the defining integral
    x, w = _OT_NODES
    t = 0.5 * a[:, None] * (x + 1.0)
    f = np.exp(-0.5 * (h * h)[:, None] * (1.0 + t * t)) / (1.0 + t * t)
    return 0.5 * a * (f @ w) / _TWO_PI


def owens_t(h, a) -> np.ndarray:
    """Owen's T function T(h, a) = 1/(2 pi) int_0^a exp(-h^2 (1+x^2)/2)/(1+x^2) dx."""
    h, a = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(a, dtype=float))
    shape = h.shape
    h = np.abs(np.clip(h.ravel(), -_BIG, _BIG))
    a = a.ravel()
    sign = np.sign(a)
    a = np.abs(a)
    out = np.empty_like(h)
    small = a <= 1.0
    if np.any(small):
        out[small] = _owens_t_unit(h[small], a[small])
    big = ~small
    if np.any(big):
        hb, ab = h[big], a[big]
        ah = np.clip(ab * hb, 0.0, _BIG)
        ph, pah = ndtr(hb), ndtr(ah)
        refl = _owens_t_unit(ah, 1.0 / ab)
        out[big] = 0.5 * ph + 0.5 * pah - ph * pah - refl
    return (sign * out).reshape(shape)
