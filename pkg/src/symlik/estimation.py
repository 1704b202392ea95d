"""Maximum likelihood fitting over symbols and quantile-based meta estimators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .distributions import (
    BivariateNormal,
    Family,
    LogNormal1D,
    Normal1D,
    SkewNormal1D,
    Uniform1D,
    get_family,
)
from .errors import InvalidParameterError, SymbolError, ZeroLikelihoodError
from .likelihood import (
    DEFAULT_MC_SAMPLES,
    RECT_METHODS,
    ConfigProbabilities,
    _expand,
    symbol_logliks,
)
from .optimize import initial_steps, nelder_mead
from .symbols import (
    FixedBinHistogramSymbol,
    IntervalSymbol,
    OrderRectSymbol,
    RandomBinHistogramSymbol,
    RectMinMaxSymbol,
    stack_symbols,
)

__all__ = [
    "FitResult",
    "FitOptions",
    "MetaEstimates",
    "TRANSFORMS",
    "fit_mle",
    "fit_batch",
    "stderr_hessian",
    "default_start",
    "meta_mean_luo",
    "meta_sd_wan",
    "meta_sd_shi",
    "meta_symbolic",
]

TRANSFORMS: dict[str, tuple[str, ...]] = {
    "Normal1D": ("identity", "log"),
    "LogNormal1D": ("identity", "log"),
    "SkewNormal1D": ("identity", "log", "identity"),
    "Uniform1D": ("identity", "log(b - a)"),
    "BivariateNormal": ("identity", "identity", "log", "log", "atanh"),
}

# step used by the local-optimum check, in unconstrained coordinates
_CHECK_STEP = 1e-4


@dataclass
class FitOptions:
    """Optimiser and likelihood settings shared by every fit."""

    max_iter: int = 5000
    tol: float = 1e-9
    mc_samples: int = DEFAULT_MC_SAMPLES
    rect_method: str = "full"
    seed: int = 0
    multistart: bool = True
    restart: bool = True

    def __post_init__(self):
        if self.rect_method not in RECT_METHODS:
            raise ValueError(f"rect_method must be one of {RECT_METHODS}")
        if self.max_iter < 1 or not self.tol > 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")


@dataclass
class FitResult:
    """Outcome of a symbolic maximum likelihood fit."""

    family: str
    param_names: tuple[str, ...]
    theta_hat: np.ndarray
    loglik_at_max: float
    iterations: int
    converged: bool
    local_optimum_ok: bool = True
    n_starts: int = 1
    nfev: int = 0
    stderr: np.ndarray | None = None
    stderr_note: str = ""
    fixed: dict = field(default_factory=dict)
    transform_trace: dict = field(default_factory=dict)
    error: str = ""

    def as_dict(self) -> dict:
        out = {
            "family": self.family,
            "param_names": list(self.param_names),
            "theta_hat": [float(v) for v in self.theta_hat],
            "loglik_at_max": float(self.loglik_at_max),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "local_optimum_ok": bool(self.local_optimum_ok),
            "n_starts": int(self.n_starts),
            "nfev": int(self.nfev),
            "stderr": None if self.stderr is None else [float(v) for v in self.stderr],
            "stderr_note": self.stderr_note,
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "transform_trace": self.transform_trace,
        }
        if self.error:
            out["error"] = self.error
        return out


def _family_class(family) -> type[Family]:
    if isinstance(family, str):
        return get_family(family)
    if isinstance(family, Family):
        return type(family)
    if isinstance(family, type) and issubclass(family, Family):
        return family
    raise InvalidParameterError(f"cannot interpret {family!r} as a family")


def _as_batch(symbols):
    if isinstance(symbols, (list, tuple)):
        if not symbols:
            raise SymbolError("no symbols to fit")
        return stack_symbols(list(symbols))
    if not symbols.batch_shape:
        return stack_symbols([symbols])
    return symbols


class _Objective:
    """Log-likelihood of (optionally per-problem) symbol batches, in unconstrained or constrained coordinates."""

    def __init__(self, symbols, family_cls, free, fixed_values, options: FitOptions, per_problem: bool,
                 constrained: bool = False):
        self.symbols = symbols
        self.family_cls = family_cls
        self.free = free
        self.fixed_values = fixed_values  # (K, P) in the working coordinates
        self.per_problem = per_problem
        self.constrained = constrained
        self.rect_method = options.rect_method
        self.config_probs = (
            ConfigProbabilities(options.mc_samples, options.seed) if options.rect_method == "empty" else None
        )

    def full(self, Z, idx):
        out = self.fixed_values[idx].copy()
        out[:, self.free] = Z
        return out

    def __call__(self, Z, idx):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        idx = np.asarray(idx)
        full = self.full(Z, idx)
        if self.constrained:
            fam = self.family_cls.from_vector(full, check=False)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                fam = self.family_cls.from_unconstrained(full)
        with np.errstate(invalid="ignore"):
            ok = fam.admissible() & np.all(np.isfinite(full), axis=-1)
        sym = self.symbols.take(idx) if self.per_problem else self.symbols
        with np.errstate(all="ignore"):
            table = symbol_logliks(sym, _expand(fam, 1), self.rect_method, self.config_probs)
        table = np.where(np.isnan(table), -np.inf, table)
        table = table.reshape(table.shape[0], -1)
        sums = np.array([math.fsum(row) if np.all(np.isfinite(row)) else -np.inf for row in table.tolist()])
        return np.where(ok, sums, -np.inf)


def _free_mask(family_cls, fixed):
    names = family_cls.param_names
    unknown = set(fixed) - set(names)
    if unknown:
        raise InvalidParameterError(f"unknown fixed parameters {sorted(unknown)} for {family_cls.name}")
    return np.array([p not in fixed for p in names])


def _local_check(obj, z, f, tol):
    """True where no +/- step in any free coordinate beats f by more than 10 tol."""
    K, p = z.shape
    pts, owners = [], []
    for j in range(p):
        for sgn in (1.0, -1.0):
            zz = z.copy()
            zz[:, j] += sgn * _CHECK_STEP
            pts.append(zz)
            owners.append(np.arange(K))
    vals = obj(np.concatenate(pts), np.concatenate(owners)).reshape(2 * p, K)
    return ~np.any(vals > f[None, :] + 10.0 * tol, axis=0)


def _optimise(obj, z0, options: FitOptions, ids=None):
    """Nelder-Mead with a restart, local-optimum check and jittered multi-start.

    ``ids`` label the problems for seeding the jittered starts, so a
    problem's path does not depend on which batch it was solved in.
    """
    K, p = z0.shape
    ids = np.arange(K) if ids is None else np.asarray(ids)
    idx = np.arange(K)
    f0 = obj(z0, idx)
    bad = ~np.isfinite(f0)
    res = nelder_mead(obj, z0, options.tol, options.max_iter)
    z, f = res.x, res.fun
    iters, conv, nfev = res.iterations.copy(), res.converged.copy(), res.nfev
    if options.restart:
        # a fresh simplex at the optimum guards against premature collapse
        res2 = nelder_mead(obj, z, options.tol, options.max_iter)
        better = res2.fun >= f
        z = np.where(better[:, None], res2.x, z)
        f = np.where(better, res2.fun, f)
        iters += res2.iterations
        conv &= res2.converged
        nfev += res2.nfev
    ok = _local_check(obj, z, f, options.tol)
    n_starts = np.ones(K, dtype=np.int64)
    redo = np.flatnonzero(~ok & ~bad)
    if options.multistart and redo.size:
        starts, owners = [], []
        for k in redo:
            rng = np.random.default_rng(np.random.SeedSequence([options.seed, int(ids[k])]))
            step = initial_steps(z[k])
            for _ in range(3):
                starts.append(z[k] + rng.standard_normal(p) * step)
                owners.append(k)
        owners = np.array(owners)
        starts = np.array(starts)

        def sub(Z, j):
            return obj(Z, owners[j])

        res3 = nelder_mead(sub, starts, options.tol, options.max_iter)
        nfev += res3.nfev
        for r, k in enumerate(owners):
            n_starts[k] += 1
            iters[k] += res3.iterations[r]
            if res3.fun[r] > f[k]:
                z[k], f[k] = res3.x[r], res3.fun[r]
                conv[k] = res3.converged[r]
        ok[redo] = _recheck(obj, z, f, redo, options.tol)
    return z, f, iters, conv, ok, n_starts, nfev, bad


def _recheck(obj, z, f, rows, tol):
    sub_z, sub_f = z[rows], f[rows]

    def sub(Z, j):
        return obj(Z, rows[j])

    return _local_check(sub, sub_z, sub_f, tol)


def _prepare(symbols, family, theta0, fixed, per_problem):
    family_cls = _family_class(family)
    fixed = dict(fixed or {})
    if theta0 is None and isinstance(family, Family):
        theta0 = family.to_vector()
    if theta0 is None:
        theta0 = default_start(symbols, family_cls)
    theta0 = np.array(theta0, dtype=float)
    for name, value in fixed.items():
        theta0[..., family_cls.param_names.index(name)] = value
    fam0 = family_cls.from_vector(theta0, check=False)
    if not np.all(fam0.admissible()):
        raise InvalidParameterError(f"starting values are not admissible for {family_cls.name}: {theta0}")
    free = _free_mask(family_cls, fixed)
    return family_cls, fixed, theta0, free


def _results(family_cls, fixed, theta, f, iters, conv, ok, n_starts, nfev_each, bad):
    out = []
    for k in range(theta.shape[0]):
        error = "starting values give an observed symbol zero probability" if bad[k] else ""
        out.append(
            FitResult(
                family=family_cls.name,
                param_names=tuple(family_cls.param_names),
                theta_hat=theta[k],
                loglik_at_max=float(f[k]),
                iterations=int(iters[k]),
                converged=bool(conv[k]) and not bad[k] and np.isfinite(f[k]),
                local_optimum_ok=bool(ok[k]),
                n_starts=int(n_starts[k]),
                nfev=int(nfev_each),
                fixed=dict(fixed),
                transform_trace={
                    name: ("fixed" if name in fixed else tr)
                    for name, tr in zip(family_cls.param_names, TRANSFORMS[family_cls.name])
                },
                error=error,
            )
        )
    return out


def fit_mle(symbols, family, theta0=None, options: FitOptions | None = None, *, fixed: dict | None = None,
            compute_stderr: bool = False, **kwargs) -> FitResult:
    """Maximise the dataset symbolic log-likelihood with Nelder-Mead.

    Parameters
    ----------
    symbols : list of symbols or a batched symbol
        One symbol per class; all of one type.
    family : Family class, name or instance
        Model for the micro-data.  An instance doubles as the start when
        ``theta0`` is omitted.
    theta0 : array_like, optional
        Starting parameter vector; default from :func:`default_start`.
    options : FitOptions, optional
        Keyword arguments (``tol``, ``max_iter``, ``rect_method``,
        ``mc_samples``, ``seed``) are accepted as shorthand.
    fixed : dict, optional
        Parameters held at given values.

    Raises
    ------
    ZeroLikelihoodError
        If the start gives some observed symbol zero probability.
    """
    options = options or FitOptions(**kwargs)
    batch = _as_batch(symbols)
    family_cls, fixed, theta0, free = _prepare(batch, family, theta0, fixed, per_problem=False)
    theta0 = theta0.reshape(1, -1)
    z0 = family_cls.to_unconstrained(theta0)
    obj = _Objective(batch, family_cls, free, z0, options, per_problem=False)
    z, f, iters, conv, ok, n_starts, nfev, bad = _optimise(obj, z0[:, free], options)
    if bad[0]:
        raise ZeroLikelihoodError("starting values give an observed symbol zero probability")
    theta = family_cls.from_unconstrained(obj.full(z, np.zeros(1, dtype=int))).to_vector()
    result = _results(family_cls, fixed, theta, f, iters, conv, ok, n_starts, nfev, bad)[0]
    if compute_stderr:
        se, note = _stderr(result, batch, family_cls, options)
        result.stderr, result.stderr_note = se, note
    return result


def fit_batch(symbols, family, theta0=None, options: FitOptions | None = None, *, fixed: dict | None = None,
              ids=None, **kwargs) -> list[FitResult]:
    """Fit many independent datasets at once.

    ``symbols`` is a batched symbol with batch shape ``(R, m)``: ``R``
    datasets of ``m`` classes each.  Returns one FitResult per dataset; a
    dataset whose start has zero likelihood is reported with
    ``converged=False`` and an ``error`` message instead of raising.
    ``ids`` (default ``0..R-1``) seed each dataset's jittered restarts.
    """
    options = options or FitOptions(**kwargs)
    if len(symbols.batch_shape) != 2:
        raise SymbolError("fit_batch needs symbols with batch shape (R, m)")
    R = symbols.batch_shape[0]
    family_cls, fixed, theta0, free = _prepare(symbols, family, theta0, fixed, per_problem=True)
    theta0 = np.broadcast_to(theta0, (R, len(family_cls.param_names))).copy()
    z0 = family_cls.to_unconstrained(theta0)
    obj = _Objective(symbols, family_cls, free, z0, options, per_problem=True)
    z, f, iters, conv, ok, n_starts, nfev, bad = _optimise(obj, z0[:, free], options, ids)
    theta = family_cls.from_unconstrained(obj.full(z, np.arange(R))).to_vector()
    return _results(family_cls, fixed, theta, f, iters, conv, ok, n_starts, nfev // max(R, 1), bad)


# -- standard errors ------------------------------------------------------------


def _stderr(fit: FitResult, batch, family_cls, options: FitOptions):
    theta = np.asarray(fit.theta_hat, dtype=float)
    free = _free_mask(family_cls, fit.fixed)
    obj = _Objective(batch, family_cls, free, theta[None, :], options, per_problem=False, constrained=True)
    t = theta[free]
    p = t.size
    h = np.maximum(1e-4, 1e-4 * np.abs(t))
    pts = [t]
    for i in range(p):
        for si in (1, -1):
            x = t.copy()
            x[i] += si * h[i]
            pts.append(x)
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            x = t.copy()
            x[i] += si * h[i]
            x[j] += sj * h[j]
            pts.append(x)
    vals = obj(np.array(pts), np.zeros(len(pts), dtype=int))
    f0 = vals[0]
    H = np.empty((p, p))
    for i in range(p):
        fp, fm = vals[1 + 2 * i], vals[2 + 2 * i]
        H[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
    pos = 1 + 2 * p
    for i, j in pairs:
        fpp, fpm, fmp, fmm = vals[pos : pos + 4]
        pos += 4
        H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    if not np.all(np.isfinite(H)):
        return None, "Hessian has non-finite entries (optimum on the parameter boundary?)"
    try:
        L = np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        return None, "negative Hessian is not positive definite"
    cov = np.linalg.inv(L).T @ np.linalg.inv(L)
    se = np.full(theta.size, np.nan)
    se[free] = np.sqrt(np.diag(cov))
    return se, "central finite differences in constrained coordinates"


def stderr_hessian(fit: FitResult, symbols, family, options: FitOptions | None = None, **kwargs):
    """Standard errors from the inverse negative Hessian of the log-likelihood.

    Returns ``None`` (with a warning carrying the diagnostic) if the fit did
    not converge or the negative Hessian is not positive definite.  Fixed
    parameters get NaN.
    """
    options = options or FitOptions(**kwargs)
    if not fit.converged:
        warnings.warn("fit did not converge; standard errors not computed", RuntimeWarning, stacklevel=2)
        return None
    se, note = _stderr(fit, _as_batch(symbols), _family_class(family), options)
    if se is None:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return se


# -- starting values --------------------------------------------------------------


def _quantile_points(sym):
    """Per-margin (values, plotting positions) arrays with the class axis before the point axis."""
    n = np.asarray(sym.n, dtype=float)
    if isinstance(sym, IntervalSymbol):
        vals = np.stack([sym.s_l, sym.s_u], axis=-1)
        probs = np.stack([sym.l, sym.u], axis=-1) / (n[..., None] + 1.0)
        return [(vals, probs)]
    if isinstance(sym, RandomBinHistogramSymbol):
        return [(sym.s, sym.k / (n[..., None] + 1.0))]
    if isinstance(sym, RectMinMaxSymbol):
        lo = np.full(n.shape, 1.0) / (n + 1.0)
        hi = n / (n + 1.0)
        probs = np.stack([lo, hi], axis=-1)
        return [(np.stack([sym.s_min[..., i], sym.s_max[..., i]], axis=-1), probs) for i in range(2)]
    if isinstance(sym, OrderRectSymbol):
        out = []
        for i in range(sym.d):
            vals = np.stack([sym.s_l[..., i], sym.s_u[..., i]], axis=-1)
            probs = np.stack([sym.l[..., i], sym.u[..., i]], axis=-1) / (n[..., None] + 1.0)
            out.append((vals, probs))
        return out
    raise TypeError


def _loc_scale(vals, probs):
    """Least-squares fit of vals = mu + sigma * Phi^-1(probs), pooled over the last two axes."""
    q = ndtri(np.clip(probs, 1e-6, 1 - 1e-6))
    vals, q = np.broadcast_arrays(vals, q)
    x = vals.reshape(vals.shape[:-2] + (-1,))
    q = q.reshape(x.shape)
    qm, xm = q.mean(axis=-1), x.mean(axis=-1)
    vq = ((q - qm[..., None]) ** 2).mean(axis=-1)
    cov = ((q - qm[..., None]) * (x - xm[..., None])).mean(axis=-1)
    spread = x.std(axis=-1)
    sigma = np.where(vq > 1e-12, cov / np.where(vq > 1e-12, vq, 1.0), spread)
    sigma = np.where(sigma > 0, sigma, np.maximum(spread, 1.0))
    return xm - sigma * qm, sigma


def _midpoint_corr(mids):
    a, b = mids
    if a.shape[-1] < 3:
        return np.zeros(a.shape[:-1])
    a = a - a.mean(axis=-1, keepdims=True)
    b = b - b.mean(axis=-1, keepdims=True)
    den = np.sqrt((a * a).sum(axis=-1) * (b * b).sum(axis=-1))
    r = np.where(den > 0, (a * b).sum(axis=-1) / np.where(den > 0, den, 1.0), 0.0)
    return np.clip(np.nan_to_num(r), -0.8, 0.8)


def _hist_fixed_moments(sym: FixedBinHistogramSymbol):
    mids = [0.5 * (g[1:] + g[:-1]) for g in sym.grids]
    w = sym.counts.astype(float)
    axes = tuple(range(w.ndim - sym.d, w.ndim))
    tot = w.sum(axis=axes)
    # pool classes: sum over the class axis as well
    w = w.sum(axis=w.ndim - sym.d - 1)
    tot = tot.sum(axis=-1)
    if sym.d == 1:
        m = (w * mids[0]).sum(axis=-1) / tot
        v = (w * (mids[0] - m[..., None]) ** 2).sum(axis=-1) / tot
        return [m], [np.sqrt(np.maximum(v, 1e-12))], np.zeros_like(m)
    x, y = np.meshgrid(mids[0], mids[1], indexing="ij")
    m1 = (w * x).sum(axis=(-2, -1)) / tot
    m2 = (w * y).sum(axis=(-2, -1)) / tot
    dx = x - m1[..., None, None]
    dy = y - m2[..., None, None]
    v1 = (w * dx * dx).sum(axis=(-2, -1)) / tot
    v2 = (w * dy * dy).sum(axis=(-2, -1)) / tot
    c = (w * dx * dy).sum(axis=(-2, -1)) / tot
    s1, s2 = np.sqrt(np.maximum(v1, 1e-12)), np.sqrt(np.maximum(v2, 1e-12))
    return [m1, m2], [s1, s2], np.clip(c / (s1 * s2), -0.8, 0.8)


def default_start(symbols, family) -> np.ndarray:
    """Moment-style starting values from a (batched) symbol set.

    The class axis is the last batch axis; any leading axes (replicate
    datasets) are kept, so the result has shape ``batch_shape[:-1] + (P,)``.
    """
    family_cls = _family_class(family)
    sym = _as_batch(symbols)
    log_scale = family_cls is LogNormal1D
    if isinstance(sym, FixedBinHistogramSymbol):
        mus, sds, rho = _hist_fixed_moments(sym)
        if log_scale:
            sds = [np.sqrt(np.log1p((s / m) ** 2)) for m, s in zip(mus, sds)]
            mus = [np.log(np.maximum(m, 1e-12)) - 0.5 * s * s for m, s in zip(mus, sds)]
        all_vals = np.concatenate([g for g in sym.grids])
        lo, hi = all_vals.min(), all_vals.max()
    else:
        pts = _quantile_points(sym)
        mus, sds = [], []
        for vals, probs in pts:
            if log_scale:
                vals = np.log(np.maximum(vals, 1e-300))
            m, s = _loc_scale(vals, probs)
            mus.append(m)
            sds.append(s)
        rho = _midpoint_corr([v.mean(axis=-1) for v, _ in pts]) if len(pts) == 2 else np.zeros_like(mus[0])
        lo = np.min([v.min(axis=(-2, -1)) for v, _ in pts], axis=0)
        hi = np.max([v.max(axis=(-2, -1)) for v, _ in pts], axis=0)
    if family_cls in (Normal1D, LogNormal1D):
        return np.stack([mus[0], sds[0]], axis=-1)
    if family_cls is SkewNormal1D:
        return np.stack([mus[0], sds[0] ** 2, np.zeros_like(mus[0])], axis=-1)
    if family_cls is Uniform1D:
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        pad = 0.01 * np.maximum(hi - lo, 1e-6)
        return np.stack([lo - pad, hi + pad], axis=-1)
    if family_cls is BivariateNormal:
        if len(mus) != 2:
            raise InvalidParameterError("bivariate family needs bivariate symbols")
        return np.stack([mus[0], mus[1], sds[0], sds[1], np.broadcast_to(rho, np.shape(mus[0]))], axis=-1)
    raise InvalidParameterError(f"no start heuristic for {family_cls.name}")


# -- meta-analysis estimators -------------------------------------------------------


@dataclass(frozen=True)
class MetaEstimates:
    """Estimated sample mean and standard deviation from five quantiles."""

    method: str
    mean_hat: float | None
    sd_hat: float | None


def _check_q(q, n, strict=False):
    q = np.asarray(q, dtype=float)
    if q.shape != (5,):
        raise ValueError("need exactly five quantiles (q0, ..., q4)")
    if not np.all(np.isfinite(q)):
        raise ValueError("quantiles must be finite")
    bad = np.any(np.diff(q) <= 0) if strict else np.any(np.diff(q) < 0)
    if bad:
        raise ValueError("quantiles must be " + ("strictly increasing" if strict else "nondecreasing"))
    if int(n) < 5:
        raise ValueError("n must be at least 5")
    return q, int(n)


def meta_mean_luo(q, n) -> float:
    """Weighted average of the three quantile midpoints with sample-size-dependent weights."""
    q, n = _check_q(q, n)
    w1 = 2.2 / (2.2 + n**0.75)
    w2 = 0.7 - 0.72 / n**0.55
    return float(w1 * (q[0] + q[4]) / 2 + w2 * (q[1] + q[3]) / 2 + (1 - w1 - w2) * q[2])


def _degenerate(q):
    if q[4] == q[0]:
        warnings.warn("all quantiles equal; standard deviation estimate is 0", RuntimeWarning, stacklevel=3)
        return True
    return False


def meta_sd_wan(q, n) -> float:
    """Average of range- and IQR-based scale estimates with normal-order-statistic divisors."""
    q, n = _check_q(q, n)
    if _degenerate(q):
        return 0.0
    zeta = 2.0 * ndtri((n - 0.375) / (n + 0.25))
    eta = 2.0 * ndtri((0.75 * n - 0.125) / (n + 0.25))
    return float(0.5 * ((q[4] - q[0]) / zeta + (q[3] - q[1]) / eta))


def meta_sd_shi(q, n) -> float:
    """Sum of range and IQR terms with size-adjusted divisors."""
    q, n = _check_q(q, n)
    if _degenerate(q):
        return 0.0
    theta1 = (2.0 + 0.14 * n**0.6) * ndtri((n - 0.375) / (n + 0.25))
    theta2 = (2.0 + 2.0 / (0.07 * n**0.6)) * ndtri((0.75 * n - 0.125) / (n + 0.25))
    return float((q[4] - q[0]) / theta1 + (q[3] - q[1]) / theta2)


def meta_symbolic(q, n, base_family="Normal1D", options: FitOptions | None = None) -> MetaEstimates:
    """Mean and sd from the five-number summary read as a random-bin histogram.

    The quantiles are the order statistics k = (1, Q+1, 2Q+1, 3Q+1, n) of a
    sample of size n = 4Q + 1.  The fitted model's mean and sd are returned,
    with the sd scaled by sqrt(n / (n - 1)).  The default optimiser
    tolerance is tighter than for general fits because the result is read
    to many digits.
    """
    q, n = _check_q(q, n, strict=True)
    if (n - 1) % 4:
        raise ValueError("n must be of the form 4Q + 1")
    family_cls = _family_class(base_family)
    if family_cls not in (Normal1D, LogNormal1D):
        raise InvalidParameterError("base family must be Normal1D or LogNormal1D")
    if family_cls is LogNormal1D and q[0] <= 0:
        raise ValueError("lognormal base family needs positive quantiles")
    Q = (n - 1) // 4
    k = (1, Q + 1, 2 * Q + 1, 3 * Q + 1, n)
    sym = make_hist_random_from_values(q, k, n)
    fit = fit_mle([sym], family_cls, options=options or FitOptions(tol=1e-12))
    mu, sigma = fit.theta_hat
    if family_cls is Normal1D:
        mean, sd = mu, sigma
    else:
        mean = math.exp(mu + 0.5 * sigma * sigma)
        sd = mean * math.sqrt(math.expm1(sigma * sigma))
    name = "SymbolicNormal" if family_cls is Normal1D else "SymbolicLogNormal"
    return MetaEstimates(name, float(mean), float(sd * math.sqrt(n / (n - 1))))


def make_hist_random_from_values(s: Sequence[float], k: Sequence[int], n: int) -> RandomBinHistogramSymbol:
    """Random-bin histogram symbol from already-selected order statistics."""
    return RandomBinHistogramSymbol(np.asarray(s, dtype=float), np.asarray(k), int(n))
