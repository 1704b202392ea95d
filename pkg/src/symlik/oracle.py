"""Monte Carlo density oracle for the closed-form symbolic likelihoods.

The oracle simulates many symbols from a family and compares the closed-form
density against what the simulations say:

* continuous symbol components are compared through a Gaussian kernel density
  estimate at probe points.  The closed form is turned into the *expected*
  kernel estimate by Gauss-Hermite smoothing, so kernel bias cancels and the
  comparison is an exact z-test of a sample mean;
* discrete parts (rectangle configurations) are handled by restricting the
  kernel sum to simulations with the same configuration, which estimates the
  configuration sub-density;
* fixed-bin histograms are compared count-vector by count-vector against the
  exact multinomial probabilities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from . import likelihood as lk
from .distributions import BivariateNormal, Family
from .symbols import (
    FixedBinHistogramSymbol,
    IntervalSymbol,
    OrderRectSymbol,
    RandomBinHistogramSymbol,
    RectConfig,
    RectMinMaxSymbol,
    SymbolSpec,
)

__all__ = [
    "OracleReport",
    "mc_density_oracle",
    "resolve_iter_seg_convention",
    "off_by_one_lower",
    "oracle_suite",
    "run_oracle_suite",
    "MIN_SIMS",
]

MIN_SIMS = 100_000
THRESHOLD = 4.0


@dataclass
class OracleReport:
    """Outcome of one oracle run; ``z`` holds the standardized discrepancies."""

    kind: str
    n_sims: int
    z: np.ndarray
    threshold: float = THRESHOLD
    details: dict = field(default_factory=dict)

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z))) if self.z.size else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.z.size) and self.max_abs_z < self.threshold

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_sims": self.n_sims,
            "max_abs_z": self.max_abs_z,
            "threshold": self.threshold,
            "passed": self.passed,
            "n_probes": int(self.z.size),
            **self.details,
        }


# -- symbol components and their closed-form log density ----------------------


def _components(sym) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(sym, IntervalSymbol):
        return np.stack([sym.s_l, sym.s_u], axis=-1), None
    if isinstance(sym, RandomBinHistogramSymbol):
        return sym.s, None
    if isinstance(sym, OrderRectSymbol):
        return np.concatenate([sym.s_l, sym.s_u], axis=-1), None
    if isinstance(sym, RectMinMaxSymbol):
        return np.concatenate([sym.s_min, sym.s_max], axis=-1), sym.config
    raise TypeError(f"no continuous components for {type(sym).__name__}")


def _log_density_fn(template, family: Family) -> Callable[[np.ndarray, int | None], np.ndarray]:
    """Closed-form log density as a function of the component vector."""
    if isinstance(template, IntervalSymbol):
        n, l, u = int(template.n), int(template.l), int(template.u)
        return lambda c, label=None: lk._interval_kernel(c[..., 0], c[..., 1], n, l, u, family)
    if isinstance(template, RandomBinHistogramSymbol):
        n, k = int(template.n), template.k
        return lambda c, label=None: lk._hist_random_kernel(c, k, n, family)
    if isinstance(template, OrderRectSymbol):
        n, l, u, order = int(template.n), template.l, template.u, template.axis_order
        d = template.d
        kernel = {
            "seq_nest": lk._seq_nest_kernel,
            "iter_seg": lk._iter_seg_kernel,
        }.get(template.construction)
        if kernel is None:
            fams = lk._margin_families(family, d)

            def marginal(c, label=None):
                return sum(
                    lk._interval_kernel(c[..., i], c[..., d + i], n, l[i], u[i], fams[i]) for i in range(d)
                )

            return marginal
        return lambda c, label=None: kernel(c[..., :2], c[..., 2:], l, u, n, order, family)
    if isinstance(template, RectMinMaxSymbol):
        n = int(template.n)

        def rect(c, label):
            table = lk._full_by_config(c[..., :2], c[..., 2:], n, family)
            return table[..., label]

        return rect
    raise TypeError(f"unsupported symbol {type(template).__name__}")


def off_by_one_lower(template, family: Family) -> Callable[[np.ndarray], np.ndarray]:
    """Negative-control perturbation: raise the lower-tail exponent by one.

    Returns a function adding ``log G(c_0)`` (first-component marginal CDF) to
    the log density, i.e. the likelihood with ``l - 1`` replaced by ``l``.
    """
    marg = family.marginal(0) if isinstance(family, BivariateNormal) else family

    def extra(c):
        with np.errstate(divide="ignore"):
            return marg.logcdf(c[..., 0])

    return extra


# -- simulation ---------------------------------------------------------------------


def _simulate(spec: SymbolSpec, family: Family, n: int, n_sims: int, rng, chunk: int):
    parts = []
    done = 0
    while done < n_sims:
        size = min(chunk, n_sims - done)
        X = family.sample((size, n), rng)
        parts.append(spec.build_batch(X))
        done += size
    return parts


def _silverman(C: np.ndarray) -> np.ndarray:
    N, k = C.shape
    sd = C.std(axis=0, ddof=1)
    iqr = np.subtract(*np.percentile(C, [75, 25], axis=0)) / 1.349
    scale = np.minimum(sd, np.where(iqr > 0, iqr, sd))
    return scale * (4.0 / ((k + 2.0) * N)) ** (1.0 / (k + 4.0))


def _kernel_stats(C: np.ndarray, probes: np.ndarray, h: np.ndarray, mask=None, block: int = 100_000):
    """Mean and sd of Gaussian kernel values K_h(probe - C_i) over all i."""
    N, k = C.shape
    norm = np.prod(h) * (2.0 * np.pi) ** (k / 2.0)
    s1 = np.zeros(len(probes))
    s2 = np.zeros(len(probes))
    for start in range(0, N, block):
        Cb = C[start : start + block]
        z = (probes[:, None, :] - Cb[None, :, :]) / h
        kv = np.exp(-0.5 * np.sum(z * z, axis=-1)) / norm
        if mask is not None:
            kv = kv * mask[start : start + block]
        s1 += kv.sum(axis=1)
        s2 += (kv * kv).sum(axis=1)
    mean = s1 / N
    var = np.maximum(s2 / N - mean * mean, 0.0) * N / (N - 1)
    return mean, np.sqrt(var)


def _gh_grid(k: int, nodes: int):
    x, w = hermegauss(nodes)
    w = w / np.sqrt(2.0 * np.pi)
    grid = np.array(list(itertools.product(x, repeat=k)))
    weight = np.prod(np.array(list(itertools.product(w, repeat=k))), axis=1)
    return grid, weight


def _expected_kde(logf, probe: np.ndarray, h: np.ndarray, label, grid, weight) -> float | None:
    """Gauss-Hermite value of E[K_h(probe - C)] = E_Z f(probe + h Z).

    Returns None when the smoothing window reaches a point of zero density:
    the closed form is discontinuous there and the quadrature is unreliable.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logv = logf(probe + grid * h, label)
    if not np.all(np.isfinite(logv)):
        return None
    return float(np.sum(weight * np.exp(logv)))


def _pick_probes(sub, logf, h, label, grid, weight, count, rng):
    """Random simulated points whose smoothing window avoids support edges."""
    probes, expected = [], []
    for idx in rng.permutation(len(sub))[: 200 * count]:
        e = _expected_kde(logf, sub[idx], h, label, grid, weight)
        if e is not None:
            probes.append(sub[idx])
            expected.append(e)
            if len(probes) == count:
                break
    return np.array(probes).reshape(-1, sub.shape[1]), np.array(expected)


def _probe_shares(counts: dict, total: int, min_size: int = 1000, floor: int = 2) -> dict:
    """Split ``total`` probes over configurations roughly by frequency, at least ``floor`` each."""
    big = {g: c for g, c in counts.items() if c >= min_size}
    if not big:
        return {}
    mass = sum(big.values())
    raw = {g: max(floor, total * c / mass) for g, c in big.items()}
    share = {g: int(math.floor(v)) for g, v in raw.items()}
    # hand out what is left (or take back the excess) by largest remainder
    order = sorted(big, key=lambda g: raw[g] - share[g], reverse=True)
    j = 0
    while sum(share.values()) < total:
        share[order[j % len(order)]] += 1
        j += 1
    order = sorted(big, key=lambda g: share[g], reverse=True)
    j = 0
    while sum(share.values()) > total and any(v > floor for v in share.values()):
        g = order[j % len(order)]
        if share[g] > floor:
            share[g] -= 1
        j += 1
    return share


def mc_density_oracle(
    spec: SymbolSpec,
    family: Family,
    n: int,
    n_sims: int = 1_000_000,
    rng: np.random.Generator | int = 0,
    n_probes: int = 20,
    gh_nodes: int | None = None,
    perturb: Callable | None = None,
    chunk: int = 50_000,
) -> OracleReport:
    """Compare the closed-form likelihood of ``spec`` symbols with simulation.

    Parameters
    ----------
    spec : SymbolSpec
        Symbol recipe; every simulated class has ``n`` rows.
    family : Family
        Single parameter vector used both to simulate and to evaluate.
    n_sims : int
        Number of simulated symbols (at least 1e5).
    perturb : callable, optional
        ``perturb(components) -> extra log density`` added to the closed form.
        Used for negative controls.

    Returns
    -------
    OracleReport
        ``passed`` is true when every standardized discrepancy is below 4.
    """
    if n_sims < MIN_SIMS:
        raise ValueError(f"n_sims must be >= {MIN_SIMS}")
    rng = np.random.default_rng(rng)
    parts = _simulate(spec, family, n, n_sims, rng, chunk)
    if isinstance(parts[0], FixedBinHistogramSymbol):
        return _histogram_oracle(parts, family, n_sims, n_probes, perturb)

    comps, labels = zip(*(_components(p) for p in parts))
    C = np.concatenate(comps, axis=0)
    labels = None if labels[0] is None else np.concatenate(labels)
    template = parts[0].take(0)
    logf = _log_density_fn(template, family)
    if perturb is not None:
        base = logf
        logf = lambda c, label=None: base(c, label) + perturb(c)  # noqa: E731
    k = C.shape[1]
    grid, weight = _gh_grid(k, gh_nodes or (7 if k <= 4 else 5))

    groups = [None] if labels is None else [int(v) for v in np.unique(labels)]
    counts = {} if labels is None else {int(v): int(np.sum(labels == v)) for v in groups}
    # share probes across configurations in proportion to their frequency
    z_all = []
    per_group = {}
    shares = _probe_shares(counts, n_probes)
    for g in groups:
        mask = None if g is None else (labels == g)
        sub = C if mask is None else C[mask]
        share = n_probes if g is None else shares.get(g, 0)
        if share == 0:
            continue
        h = _silverman(sub)
        probes, expected = _pick_probes(sub, logf, h, g, grid, weight, share, rng)
        if len(probes) == 0:
            continue
        mean, sd = _kernel_stats(C, probes, h, None if mask is None else mask.astype(float))
        z = (mean - expected) / (sd / np.sqrt(len(C)))
        z_all.append(z)
        per_group["all" if g is None else str(g)] = float(np.max(np.abs(z)))
    z = np.concatenate(z_all) if z_all else np.array([])
    details = {"max_abs_z_by_group": per_group}
    if counts:
        details["config_counts"] = {str(k_): v for k_, v in counts.items()}
    return OracleReport(type(template).__name__, n_sims, z, details=details)


def _histogram_oracle(parts, family, n_sims, n_probes, perturb) -> OracleReport:
    counts = np.concatenate([p.counts.reshape(len(p.counts), -1) for p in parts])
    template = parts[0].take(0)
    uniq, freq = np.unique(counts, axis=0, return_counts=True)
    order = np.argsort(-freq)[:n_probes]
    probes = uniq[order]
    sym = FixedBinHistogramSymbol(template.grids, probes.reshape((len(probes),) + template.counts.shape), template.n)
    logp = lk._ll_hist_fixed(sym, family)
    if perturb is not None:
        logp = logp + perturb(probes)
    p = np.exp(logp)
    phat = freq[order] / n_sims
    z = (phat - p) / np.sqrt(p * (1.0 - p) / n_sims)
    return OracleReport("FixedBinHistogramSymbol", n_sims, z, details={"distinct_count_vectors": int(len(uniq))})


def resolve_iter_seg_convention(
    family: BivariateNormal,
    n: int = 20,
    l=(6, 2),
    u=(15, 2),
    n_sims: int = 1_000_000,
    rng=0,
) -> dict:
    """Run the oracle with the upper second-margin index counted from the bottom and from the top.

    The closed form is fixed; only the symbol construction changes.  Returns
    the two reports and the name of the passing convention (``None`` unless
    exactly one passes).
    """
    ss = np.random.SeedSequence(rng if isinstance(rng, int) else 0)
    seeds = ss.spawn(2)
    reports = {}
    for name, from_top, seed in (("bottom", False, seeds[0]), ("top", True, seeds[1])):
        spec = SymbolSpec("rect_order", l=tuple(l), u=tuple(u), construction="iter_seg", upper_from_top=from_top)
        reports[name] = mc_density_oracle(spec, family, n, n_sims, np.random.default_rng(seed))
    passing = [k for k, r in reports.items() if r.passed]
    return {
        "reports": reports,
        "passing": passing,
        "convention": passing[0] if len(passing) == 1 else None,
    }


# -- standard suite -------------------------------------------------------------------


def oracle_suite() -> dict[str, tuple[SymbolSpec, Family, int]]:
    """Named oracle cases: (symbol spec, family at the truth, rows per class)."""
    from .distributions import Normal1D, Uniform1D

    bvn = BivariateNormal(2.0, 5.0, 0.5, 0.5, 0.7)
    return {
        "interval": (SymbolSpec("interval", l=2, u=9), Normal1D(0.0, 1.0), 10),
        "interval_uniform": (SymbolSpec("interval", l=1, u=3), Uniform1D(0.0, 1.0), 3),
        "hist_fixed": (SymbolSpec("hist_fixed", grids=((-8.0, -1.0, 0.0, 1.0, 8.0),)), Normal1D(0.0, 1.0), 6),
        "hist_random": (SymbolSpec("hist_random", k=(1, 3, 5, 7, 9)), Normal1D(1.0, 2.0), 9),
        "rect_minmax": (SymbolSpec("rect_minmax"), BivariateNormal(0.0, 0.0, 1.0, 1.0, 0.8), 5),
        "seq_nest_x": (SymbolSpec("rect_order", l=(6, 5), u=(55, 35), construction="seq_nest"), bvn, 60),
        "seq_nest_y": (
            SymbolSpec("rect_order", l=(5, 6), u=(35, 55), construction="seq_nest", axis_order=(2, 1)), bvn, 60
        ),
        "iter_seg_x": (SymbolSpec("rect_order", l=(6, 3), u=(55, 3), construction="iter_seg"), bvn, 60),
    }


def run_oracle_suite(names=None, n_sims: int = 1_000_000, seed: int = 0, perturb: str | None = None
                     ) -> dict[str, OracleReport]:
    """Run the named suite cases; each case gets its own stream from ``seed``.

    ``perturb="off_by_one"`` injects the lower-exponent error into every
    case (a negative control that should fail).
    """
    suite = oracle_suite()
    names = list(suite) if names is None else list(names)
    unknown = set(names) - set(suite)
    if unknown:
        raise ValueError(f"unknown oracle cases {sorted(unknown)}; choose from {sorted(suite)}")
    if perturb not in (None, "off_by_one"):
        raise ValueError("perturb must be None or 'off_by_one'")
    out = {}
    for j, name in enumerate(suite):
        if name not in names:
            continue
        spec, family, n = suite[name]
        extra = off_by_one_lower(None, family) if perturb else None
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(j,)))
        out[name] = mc_density_oracle(spec, family, n, n_sims, rng, perturb=extra)
    return out
