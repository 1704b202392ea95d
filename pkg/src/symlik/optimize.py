"""Nelder-Mead simplex maximisation, vectorised over independent problems.

Running many small simplex searches in lock step lets one likelihood call
evaluate a trial point for every problem at once.  Each problem follows
exactly the path it would follow on its own: the batch only changes how
evaluations are grouped, never which points are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["NelderMeadResult", "nelder_mead", "initial_steps"]

REFLECT, EXPAND, CONTRACT, SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class NelderMeadResult:
    """Best vertex per problem with its objective value and diagnostics."""

    x: np.ndarray
    fun: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    nfev: int


def initial_steps(z0: np.ndarray) -> np.ndarray:
    """Per-coordinate initial simplex steps max(0.1, 0.1 |z_j|)."""
    return np.maximum(0.1, 0.1 * np.abs(z0))


def _clean(f):
    f = np.asarray(f, dtype=float)
    return np.where(np.isnan(f), -np.inf, f)


def nelder_mead(
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
    z0,
    tol: float = 1e-9,
    max_iter: int = 5000,
    steps=None,
) -> NelderMeadResult:
    """Maximise ``K`` independent objectives with the Nelder-Mead simplex method.

    Parameters
    ----------
    fun : callable
        ``fun(Z, idx)`` returns the objective at the rows of ``Z`` (shape
        ``(B, p)``), where ``idx`` (shape ``(B,)``) says which problem each
        row belongs to.  ``-inf`` marks infeasible points; NaN is read as
        ``-inf``.
    z0 : array_like, shape (K, p) or (p,)
        Starting points.
    tol : float
        A problem has converged once the objective spread over its simplex
        falls below ``tol``.
    max_iter : int
        Iteration cap per problem; problems still running are flagged as not
        converged.
    steps : array_like, optional
        Initial simplex steps, default :func:`initial_steps`.

    Returns
    -------
    NelderMeadResult
    """
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim == 1
    z0 = np.atleast_2d(z0)
    K, p = z0.shape
    steps = initial_steps(z0) if steps is None else np.broadcast_to(np.asarray(steps, dtype=float), z0.shape)

    S = np.repeat(z0[:, None, :], p + 1, axis=1)
    for j in range(p):
        S[:, j + 1, j] += steps[:, j]
    idx_all = np.repeat(np.arange(K), p + 1)
    F = _clean(fun(S.reshape(-1, p), idx_all)).reshape(K, p + 1)
    nfev = K * (p + 1)

    iterations = np.zeros(K, dtype=np.int64)
    converged = np.zeros(K, dtype=bool)
    active = np.ones(K, dtype=bool)

    def order(rows):
        o = np.argsort(-F[rows], axis=1, kind="stable")
        S[rows] = np.take_along_axis(S[rows], o[:, :, None], axis=1)
        F[rows] = np.take_along_axis(F[rows], o, axis=1)

    while True:
        a = np.flatnonzero(active)
        if a.size == 0:
            break
        order(a)
        with np.errstate(invalid="ignore"):
            spread = F[a, 0] - F[a, -1]
        done = np.isfinite(spread) & (spread < tol)
        converged[a[done]] = True
        capped = iterations[a] >= max_iter
        active[a[done | capped]] = False
        a = a[~(done | capped)]
        if a.size == 0:
            break
        iterations[a] += 1

        Sa, Fa = S[a], F[a]
        c = Sa[:, :-1].mean(axis=1)
        xw = Sa[:, -1]
        xr = c + REFLECT * (c - xw)
        fr = _clean(fun(xr, a))
        nfev += a.size
        fb, fsw, fw = Fa[:, 0], Fa[:, -2], Fa[:, -1]

        expand = fr > fb
        accept = ~expand & (fr > fsw)
        outside = ~expand & ~accept & (fr > fw)
        inside = ~expand & ~accept & ~outside

        x2 = np.where(
            expand[:, None],
            c + EXPAND * (xr - c),
            np.where(outside[:, None], c + CONTRACT * (xr - c), c + CONTRACT * (xw - c)),
        )
        need = ~accept
        f2 = np.full(a.size, -np.inf)
        if need.any():
            f2[need] = _clean(fun(x2[need], a[need]))
            nfev += int(need.sum())

        new_x = xr.copy()
        new_f = fr.copy()
        take2 = (expand & (f2 > fr)) | (outside & (f2 >= fr)) | (inside & (f2 > fw))
        new_x[take2] = x2[take2]
        new_f[take2] = f2[take2]
        shrink = (outside & ~(f2 >= fr)) | (inside & ~(f2 > fw))
        keep = ~shrink
        rows = a[keep]
        S[rows, -1] = new_x[keep]
        F[rows, -1] = new_f[keep]

        if shrink.any():
            rows = a[shrink]
            best = S[rows, :1]
            S[rows, 1:] = best + SHRINK * (S[rows, 1:] - best)
            pts = S[rows, 1:].reshape(-1, p)
            F[rows, 1:] = _clean(fun(pts, np.repeat(rows, p))).reshape(rows.size, p)
            nfev += rows.size * p

    order(np.arange(K))
    x, f = S[:, 0].copy(), F[:, 0].copy()
    if single:
        x, f = x[0], f[0]
    return NelderMeadResult(x, f, iterations, converged, nfev)
