"""Replicated simulation studies and the Monte Carlo density oracle.

Every replicate draws its data from its own stream,
``SeedSequence(master_seed, spawn_key=(r,))``, so a study gives the same
numbers however the replicates are grouped into batches or spread over
threads.  Aggregation always folds over replicates in index order.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .distributions import LogNormal1D, Normal1D, get_family
from .errors import SymlikError
from .estimation import (
    FitOptions,
    default_start,
    fit_batch,
    meta_mean_luo,
    meta_sd_shi,
    meta_sd_wan,
)
from .likelihood import DEFAULT_MC_SAMPLES
from .oracle import OracleReport, mc_density_oracle, resolve_iter_seg_convention
from .symbols import RandomBinHistogramSymbol, SymbolSpec, stack_symbols

__all__ = [
    "ExperimentConfig",
    "ExperimentSummary",
    "RmseConfig",
    "RmseCurve",
    "MetaBiasConfig",
    "MetaBiasTable",
    "run_experiment",
    "run_rmse_study",
    "run_meta_bias_study",
    "replicate_rng",
    "write_csv",
    "mc_density_oracle",
    "resolve_iter_seg_convention",
    "OracleReport",
    "SUMMARY_COLUMNS",
    "REPLICATE_COLUMNS",
    "RMSE_COLUMNS",
    "META_BIAS_COLUMNS",
]


def replicate_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the replicate labelled ``key``; independent of every other label."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key)))


def _chunks(total: int, size: int) -> list[np.ndarray]:
    size = max(1, int(size))
    return [np.arange(a, min(a + size, total)) for a in range(0, total, size)]


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- replicated symbolic fits -------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One cell of a replicate study.

    Attributes
    ----------
    family : str
        Family name used both to simulate and to fit.
    theta0 : tuple of float
        True parameter vector.
    m, n_c, T : int
        Classes per dataset, rows per class and number of replicate datasets.
    symbol : SymbolSpec
        How each class is summarised.
    rect_method : str
        Rectangle likelihood for min/max symbols: ``full``, ``empty`` or ``l2d``.
    start : str
        ``data`` for moment-style starts from each dataset, ``truth`` to start at ``theta0``.
    chunk : int
        Replicates fitted together in one vectorised batch.
    """

    family: str
    theta0: tuple[float, ...]
    m: int
    n_c: int
    T: int
    symbol: SymbolSpec
    rect_method: str = "full"
    mc_samples: int = DEFAULT_MC_SAMPLES
    master_seed: int = 0
    start: str = "data"
    fixed: dict = field(default_factory=dict)
    tol: float = 1e-9
    max_iter: int = 5000
    chunk: int = 25
    threads: int = 1
    name: str = ""

    def __post_init__(self):
        fam = get_family(self.family)
        self.theta0 = tuple(float(v) for v in self.theta0)
        if len(self.theta0) != len(fam.param_names):
            raise ValueError(f"{self.family} needs {len(fam.param_names)} parameters, got {len(self.theta0)}")
        if not np.all(fam.from_vector(np.array(self.theta0), check=False).admissible()):
            raise ValueError(f"theta0 {self.theta0} is not admissible for {self.family}")
        if self.T < 1 or self.m < 1 or self.n_c < 1:
            raise ValueError("T, m and n_c must all be >= 1")
        if self.start not in ("data", "truth"):
            raise ValueError("start must be 'data' or 'truth'")
        dim = 2 if self.family == "BivariateNormal" else 1
        if self.symbol.kind in ("rect_minmax", "rect_order") and dim != 2:
            raise ValueError(f"{self.symbol.kind} symbols need a bivariate family")
        if self.symbol.kind in ("interval", "hist_random") and dim != 1:
            raise ValueError(f"{self.symbol.kind} symbols need a univariate family")
        self.options()  # validates rect_method, tol and max_iter

    def options(self) -> FitOptions:
        return FitOptions(
            max_iter=self.max_iter, tol=self.tol, mc_samples=self.mc_samples,
            rect_method=self.rect_method, seed=self.master_seed,
        )

    def family_true(self):
        return get_family(self.family).from_vector(np.array(self.theta0))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["symbol"] = {k: v for k, v in asdict(self.symbol).items() if v is not None}
        return out


@dataclass
class ExperimentSummary:
    """Mean and sd of the estimates over converged replicates."""

    name: str
    param_names: tuple[str, ...]
    theta0: tuple[float, ...]
    T: int
    estimates: np.ndarray
    converged: np.ndarray
    loglik: np.ndarray
    errors: list[str]
    wall_time: float

    @property
    def n_converged(self) -> int:
        return int(self.converged.sum())

    @property
    def n_failed(self) -> int:
        return self.T - self.n_converged

    @property
    def mean(self) -> np.ndarray:
        good = self.estimates[self.converged]
        return good.mean(axis=0) if len(good) else np.full(len(self.param_names), np.nan)

    @property
    def sd(self) -> np.ndarray | None:
        """Sample sd (ddof 1); ``None`` with fewer than two converged replicates."""
        good = self.estimates[self.converged]
        return good.std(axis=0, ddof=1) if len(good) >= 2 else None

    def stat(self, param: str) -> tuple[float, float | None]:
        j = self.param_names.index(param)
        sd = self.sd
        return float(self.mean[j]), (None if sd is None else float(sd[j]))

    def rows(self) -> list[dict]:
        sd = self.sd
        out = []
        for j, p in enumerate(self.param_names):
            s = None if sd is None else float(sd[j])
            out.append({
                "cell": self.name,
                "parameter": p,
                "true_value": self.theta0[j],
                "mean": float(self.mean[j]),
                "sd": s,
                "se": None if s is None else s / math.sqrt(self.n_converged),
                "n_converged": self.n_converged,
                "n_failed": self.n_failed,
                "T": self.T,
                "wall_time_s": round(self.wall_time, 3),
            })
        return out

    def replicate_rows(self) -> list[dict]:
        out = []
        for r in range(self.T):
            row = {"cell": self.name, "replicate": r, "converged": bool(self.converged[r]),
                   "loglik": float(self.loglik[r]), "error": self.errors[r]}
            row.update({p: float(v) for p, v in zip(self.param_names, self.estimates[r])})
            out.append(row)
        return out


SUMMARY_COLUMNS = ("cell", "parameter", "true_value", "mean", "sd", "se", "n_converged", "n_failed", "T",
                   "wall_time_s")
REPLICATE_COLUMNS = ("cell", "replicate", "converged", "loglik", "error")


def _draw_symbols(cfg: ExperimentConfig, reps: np.ndarray):
    """Simulate the given replicates and summarise them as one (R', m) batch.

    Returns the batch (or None), the positions in ``reps`` it covers and an
    error message per replicate.
    """
    fam = cfg.family_true()
    syms, keep, errs = [], [], [""] * reps.size
    for i, r in enumerate(reps):
        X = fam.sample((cfg.m, cfg.n_c), replicate_rng(cfg.master_seed, r))
        try:
            syms.append(cfg.symbol.build_batch(X))
            keep.append(i)
        except SymlikError as exc:
            errs[i] = f"symbol construction failed: {exc}"
    return (stack_symbols(syms) if syms else None), keep, errs


def _fit_chunk(cfg: ExperimentConfig, reps: np.ndarray):
    P = len(get_family(cfg.family).param_names)
    est = np.full((reps.size, P), np.nan)
    conv = np.zeros(reps.size, dtype=bool)
    ll = np.full(reps.size, np.nan)
    batch, keep, errs = _draw_symbols(cfg, reps)
    if keep:
        theta0 = np.array(cfg.theta0) if cfg.start == "truth" else default_start(batch, cfg.family)
        fits = fit_batch(batch, cfg.family, theta0, cfg.options(), fixed=cfg.fixed, ids=reps[keep])
        for i, fit in zip(keep, fits):
            est[i] = fit.theta_hat
            ll[i] = fit.loglik_at_max
            conv[i] = fit.converged
            if fit.error:
                errs[i] = fit.error
            elif not fit.converged:
                errs[i] = "optimiser did not converge"
    return est, conv, ll, errs


def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """Simulate ``T`` datasets, fit each, and summarise the estimates.

    Replicates are fitted in vectorised chunks of ``cfg.chunk`` and chunks
    may run on ``cfg.threads`` worker threads; neither changes the result.
    Replicates whose symbols cannot be built or whose fit fails are counted
    as failures and left out of the summary.
    """
    t0 = time.perf_counter()
    parts = _map(lambda reps: _fit_chunk(cfg, reps), _chunks(cfg.T, cfg.chunk), cfg.threads)
    est = np.concatenate([p[0] for p in parts])
    conv = np.concatenate([p[1] for p in parts])
    ll = np.concatenate([p[2] for p in parts])
    errs = [e for p in parts for e in p[3]]
    return ExperimentSummary(
        name=cfg.name,
        param_names=tuple(get_family(cfg.family).param_names),
        theta0=cfg.theta0,
        T=cfg.T,
        estimates=est,
        converged=conv,
        loglik=ll,
        errors=errs,
        wall_time=time.perf_counter() - t0,
    )


# -- symbol design: relative mean squared error -----------------------------------------


@dataclass
class RmseConfig:
    """Relative MSE of interval / 2-bin histogram estimators against the sample mean and sd.

    ``n`` must be ``4Q + 1``.  ``i_values`` defaults to ``1..2Q``; symbol
    ``i`` uses orders ``(i, n+1-i)`` (interval) or ``(i, 2Q+1, n+1-i)``
    (histogram).
    """

    n: int = 81
    mu0: float = 50.0
    sigma0: float = 17.0
    T: int = 2000
    kinds: tuple[str, ...] = ("interval", "hist")
    i_values: tuple[int, ...] | None = None
    master_seed: int = 0
    tol: float = 1e-9
    max_iter: int = 5000
    threads: int = 1
    name: str = ""

    def __post_init__(self):
        if self.n < 5 or (self.n - 1) % 4:
            raise ValueError(f"n must be 4Q + 1 with Q >= 1, got {self.n}")
        if self.T < 2:
            raise ValueError("T must be >= 2")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        bad = set(self.kinds) - {"interval", "hist"}
        if bad:
            raise ValueError(f"unknown symbol kinds {sorted(bad)}")
        Q = self.Q
        if self.i_values is None:
            self.i_values = tuple(range(1, 2 * Q + 1))
        self.i_values = tuple(int(i) for i in self.i_values)
        if any(i < 1 or i > 2 * Q for i in self.i_values):
            raise ValueError(f"i must lie in 1..{2 * Q}")

    @property
    def Q(self) -> int:
        return (self.n - 1) // 4

    def spec(self, kind: str, i: int) -> SymbolSpec:
        n, Q = self.n, self.Q
        if kind == "interval":
            return SymbolSpec("interval", l=i, u=n + 1 - i)
        return SymbolSpec("hist_random", k=(i, 2 * Q + 1, n + 1 - i))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RmseCurve:
    """RMSE rows per (kind, i) plus the classical-against-itself sanity row."""

    config: RmseConfig
    rows: list[dict]
    sanity: dict
    wall_time: float

    def table(self) -> list[dict]:
        return [self.sanity] + self.rows

    def get(self, kind: str, i: int) -> dict:
        for row in self.rows:
            if row["kind"] == kind and row["i"] == i:
                return row
        raise KeyError((kind, i))


RMSE_COLUMNS = ("kind", "i", "q", "rmse_mu", "rmse_sigma", "n_converged", "T")


def run_rmse_study(cfg: RmseConfig) -> RmseCurve:
    """Relative MSE of the symbolic mle as the bounding order statistics move inward.

    All symbol kinds and indices share the same ``T`` datasets, so the
    curves differ only through the symbol design.  The scale estimate is
    rescaled to ``sqrt(n / (n - 1)) * sigma_hat`` before comparison with
    the sample sd.
    """
    t0 = time.perf_counter()
    n = cfg.n
    data = np.stack([replicate_rng(cfg.master_seed, t).normal(cfg.mu0, cfg.sigma0, n) for t in range(cfg.T)])
    xbar = data.mean(axis=1)
    s = data.std(axis=1, ddof=1)
    den_mu = math.fsum((xbar - cfg.mu0) ** 2)
    den_sigma = math.fsum((s - cfg.sigma0) ** 2)
    sanity = {"kind": "classical", "i": 0, "q": float("nan"),
              "rmse_mu": math.fsum((xbar - cfg.mu0) ** 2) / den_mu,
              "rmse_sigma": math.fsum((s - cfg.sigma0) ** 2) / den_sigma,
              "n_converged": cfg.T, "T": cfg.T}
    if sanity["rmse_mu"] != 1.0 or sanity["rmse_sigma"] != 1.0:
        raise AssertionError("classical RMSE against itself must be exactly 1")
    opts = FitOptions(max_iter=cfg.max_iter, tol=cfg.tol, seed=cfg.master_seed)
    scale = math.sqrt(n / (n - 1))
    tasks = [(kind, i) for kind in cfg.kinds for i in cfg.i_values]

    def one(task):
        kind, i = task
        batch = cfg.spec(kind, i).build_batch(data[:, None, :])
        fits = fit_batch(batch, Normal1D, default_start(batch, Normal1D), opts)
        mu = np.array([f.theta_hat[0] for f in fits])
        sig = np.array([f.theta_hat[1] for f in fits]) * scale
        ok = np.array([f.converged for f in fits])
        return {
            "kind": kind, "i": i, "q": (n + 1 - i) / n,
            "rmse_mu": math.fsum((mu[ok] - cfg.mu0) ** 2) / math.fsum((xbar[ok] - cfg.mu0) ** 2),
            "rmse_sigma": math.fsum((sig[ok] - cfg.sigma0) ** 2) / math.fsum((s[ok] - cfg.sigma0) ** 2),
            "n_converged": int(ok.sum()), "T": cfg.T,
        }

    rows = _map(one, tasks, cfg.threads)
    return RmseCurve(cfg, rows, sanity, time.perf_counter() - t0)


# -- meta-analysis estimators: bias against the true sample statistics ---------------------


POPULATIONS = {
    "normal": ("Normal1D", (50.0, 17.0)),
    "lognormal": ("LogNormal1D", (4.0, 0.3)),
}

META_METHODS = ("luo", "wan", "shi", "symbolic_normal", "symbolic_lognormal")


@dataclass
class MetaBiasConfig:
    """Bias of five-number-summary estimators of the sample mean and sd.

    Samples of size ``n = 4Q + 1`` for each ``Q`` in ``q_values`` are drawn
    from the named population; the quantiles are order statistics
    ``(1, Q+1, 2Q+1, 3Q+1, n)``.
    """

    population: str = "normal"
    q_values: tuple[int, ...] = tuple(range(1, 51))
    T: int = 10_000
    methods: tuple[str, ...] = META_METHODS
    master_seed: int = 0
    tol: float = 1e-12
    threads: int = 1
    name: str = ""

    def __post_init__(self):
        if self.population not in POPULATIONS:
            raise ValueError(f"population must be one of {sorted(POPULATIONS)}")
        self.q_values = tuple(int(q) for q in self.q_values)
        if any(q < 1 for q in self.q_values):
            raise ValueError("Q must be >= 1")
        if self.T < 2:
            raise ValueError("T must be >= 2")
        bad = set(self.methods) - set(META_METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}; choose from {META_METHODS}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetaBiasTable:
    config: MetaBiasConfig
    rows: list[dict]
    wall_time: float

    def get(self, n: int, method: str, statistic: str) -> dict:
        for row in self.rows:
            if row["n"] == n and row["method"] == method and row["statistic"] == statistic:
                return row
        raise KeyError((n, method, statistic))


META_BIAS_COLUMNS = ("population", "n", "method", "statistic", "mean_error", "se", "lower95", "upper95", "count")


def _symbolic_moments(q: np.ndarray, n: int, family_cls, tol: float):
    """Batched symbolic mean/sd for rows of five quantiles."""
    Q = (n - 1) // 4
    k = np.array([1, Q + 1, 2 * Q + 1, 3 * Q + 1, n])
    T = q.shape[0]
    batch = RandomBinHistogramSymbol(q[:, None, :], np.broadcast_to(k, (T, 1, 5)), np.full((T, 1), n))
    fits = fit_batch(batch, family_cls, default_start(batch, family_cls), FitOptions(tol=tol))
    theta = np.array([f.theta_hat for f in fits])
    ok = np.array([f.converged for f in fits])
    mu, sigma = theta[:, 0], theta[:, 1]
    if family_cls is Normal1D:
        mean, sd = mu, sigma
    else:
        # failed rows (e.g. nonpositive data) may overflow; they are masked by ``ok``
        with np.errstate(over="ignore", invalid="ignore"):
            mean = np.exp(mu + 0.5 * sigma * sigma)
            sd = mean * np.sqrt(np.expm1(sigma * sigma))
    return mean, sd * math.sqrt(n / (n - 1)), ok


def run_meta_bias_study(cfg: MetaBiasConfig) -> MetaBiasTable:
    """Mean error of each estimator against the true sample mean and sd, with 95% bands.

    Each row reports the average of ``estimate - true sample statistic``
    over replicates and the band ``mean +/- 1.96 * sd / sqrt(count)``.
    """
    t0 = time.perf_counter()
    fam_name, theta = POPULATIONS[cfg.population]
    pop = get_family(fam_name).from_vector(np.array(theta))

    def one(Q):
        n = 4 * Q + 1
        data = np.stack([
            pop.sample(n, replicate_rng(cfg.master_seed, n, t)) for t in range(cfg.T)
        ])
        xbar = data.mean(axis=1)
        s = data.std(axis=1, ddof=1)
        k = np.array([1, Q + 1, 2 * Q + 1, 3 * Q + 1, n]) - 1
        q = np.sort(data, axis=1)[:, k]
        errors = {}
        for method in cfg.methods:
            if method == "luo":
                errors[("luo", "mean")] = (np.array([meta_mean_luo(r, n) for r in q]) - xbar, None)
            elif method == "wan":
                errors[("wan", "sd")] = (np.array([meta_sd_wan(r, n) for r in q]) - s, None)
            elif method == "shi":
                errors[("shi", "sd")] = (np.array([meta_sd_shi(r, n) for r in q]) - s, None)
            else:
                fam = Normal1D if method == "symbolic_normal" else LogNormal1D
                mean, sd, ok = _symbolic_moments(q, n, fam, cfg.tol)
                errors[(method, "mean")] = (mean - xbar, ok)
                errors[(method, "sd")] = (sd - s, ok)
        rows = []
        for (method, stat), (err, ok) in errors.items():
            e = err if ok is None else err[ok]
            m = float(np.mean(e))
            se = float(np.std(e, ddof=1) / math.sqrt(e.size)) if e.size > 1 else float("nan")
            rows.append({"population": cfg.population, "n": n, "method": method, "statistic": stat,
                         "mean_error": m, "se": se, "lower95": m - 1.96 * se, "upper95": m + 1.96 * se,
                         "count": int(e.size)})
        return rows

    rows = [r for part in _map(one, list(cfg.q_values), cfg.threads) for r in part]
    return MetaBiasTable(cfg, rows, time.perf_counter() - t0)


# -- output ----------------------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    """Write rows with a fixed header; extra keys are appended in first-seen order."""
    cols = list(columns)
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in cols})
