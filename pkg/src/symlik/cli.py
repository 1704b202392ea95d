"""Command-line interface: ``symlik aggregate|fit|simulate|meta|oracle-check``.

Exit codes
----------
0  success
1  usage or configuration error
2  data error (unreadable input, schema mismatch, symbol constraint violated)
3  numerical failure (non-convergence, zero likelihood at the start, oracle discrepancy)
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import subprocess
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import (
    REFERENCE_COLUMNS,
    ConfigError,
    bundled_path,
    compare_reference,
    experiment_cells,
    load_study,
    load_symbol_spec,
    meta_bias_cells,
    rmse_cells,
)
from .distributions import BivariateNormal, get_family
from .errors import InvalidParameterError, SymbolError, SymlikError, ZeroLikelihoodError
from .estimation import FitOptions, fit_mle, meta_mean_luo, meta_sd_shi, meta_sd_wan, meta_symbolic
from .oracle import MIN_SIMS, oracle_suite, resolve_iter_seg_convention, run_oracle_suite
from .simulation import (
    META_BIAS_COLUMNS,
    REPLICATE_COLUMNS,
    RMSE_COLUMNS,
    SUMMARY_COLUMNS,
    run_experiment,
    run_meta_bias_study,
    run_rmse_study,
    write_csv,
)
from .symbols import stack_symbols, symbol_from_dict, symbol_to_dict

__all__ = ["main", "dumps", "RunManifest", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_NUMERIC"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# -- JSON with 17 significant digits -----------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = f"{x:.17g}"
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def dumps(obj, indent: int | None = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits.

    Parsing the output and writing it again reproduces it exactly.
    Non-finite floats use the ``NaN``/``Infinity`` tokens that Python's
    json module reads back.
    """
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[" + sep.join(pad + dumps(v, indent, _level + 1) for v in obj) + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- run manifest ---------------------------------------------------------------------


def _git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Record of one CLI run, written atomically once all outputs exist."""

    command: str
    config: dict
    master_seed: int | None
    versions: dict = field(default_factory=lambda: {
        "symlik": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
        "python": platform.python_version(),
    })
    git_describe: str = field(default_factory=_git_describe)
    started: str = field(default_factory=_now)
    finished: str = ""
    wall_time_s: float = 0.0
    outputs: list[str] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def write(self, path: Path) -> None:
        missing = [p for p in self.outputs if not Path(p).exists()]
        if missing:
            raise RuntimeError(f"manifest names missing outputs: {missing}")
        self.finished = _now()
        self.wall_time_s = round(time.perf_counter() - self._t0, 3)
        body = {k: v for k, v in asdict(self).items() if not k.startswith("_")}
        _atomic_write(path, dumps(body) + "\n")


# -- argument parsing -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    if "input" in names:
        p.add_argument("--input", "-i", required=True, help="input file")
    if "output" in names:
        p.add_argument("--output", "-o", help="output file or directory")
    if "config" in names:
        p.add_argument("--config", "-c", required=True, help="config file (or bundled config name)")
    if "seed" in names:
        p.add_argument("--seed", type=int, help="master seed for all randomness")
    if "threads" in names:
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    if "scale" in names:
        p.add_argument("--scale", type=float, default=1.0, help="multiply replicate counts T by this factor")
    if "expensive" in names:
        p.add_argument("--expensive", action="store_true", help="allow cells marked expensive")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="symlik", description="Likelihood inference from symbolic data summaries.")
    parser.add_argument("--version", action="version", version=f"symlik {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("aggregate", help="summarise a CSV of micro-data into symbols (JSON)")
    _common(p, "input", "output", "config")

    p = sub.add_parser("fit", help="maximum likelihood fit of a family to symbols")
    _common(p, "input", "output", "seed")
    p.add_argument("--family", required=True, help="Normal1D, LogNormal1D, SkewNormal1D, Uniform1D, BivariateNormal")
    p.add_argument("--theta0", help="starting values, space or comma separated")
    p.add_argument("--fixed", action="append", default=[], metavar="NAME=VALUE", help="hold a parameter fixed")
    p.add_argument("--rect-method", default="full", choices=("full", "empty", "l2d"))
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--no-stderr", action="store_true", help="skip Hessian standard errors")

    p = sub.add_parser("simulate", help="run a replicate study from a config file")
    _common(p, "config", "output", "seed", "threads", "scale", "expensive")

    p = sub.add_parser("meta", help="estimate sample mean and sd from five quantiles")
    p.add_argument("--q", nargs=5, type=float, required=True, metavar=("Q0", "Q1", "Q2", "Q3", "Q4"))
    p.add_argument("--n", type=int, required=True, help="sample size (4Q + 1 for the symbolic methods)")
    p.add_argument("--methods", nargs="+", default=["luo", "wan", "shi", "symbolic_normal"],
                   choices=("luo", "wan", "shi", "symbolic_normal", "symbolic_lognormal"))
    _common(p, "output")

    p = sub.add_parser("oracle-check", help="Monte Carlo check of the closed-form likelihoods")
    _common(p, "output", "seed")
    p.add_argument("--cases", nargs="+", choices=sorted(oracle_suite()), help="subset of cases (default all)")
    p.add_argument("--n-sims", type=int, default=1_000_000)
    p.add_argument("--skip-convention", action="store_true", help="do not rerun the index-convention check")
    p.add_argument("--inject", choices=("off_by_one",), help="test hook: corrupt the likelihood on purpose")
    return parser


# -- commands ------------------------------------------------------------------------------


def _read_csv(path: Path):
    """Rows as floats grouped by the optional ``class`` column, in order of first appearance."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        cls_col = header.index("class") if "class" in header else None
        cols = [h for j, h in enumerate(header) if j != cls_col]
        if not cols:
            raise DataError(f"{path}: no data columns")
        groups: dict[str, list[list[float]]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}, line {line_no}: expected {len(header)} fields, got {len(row)}")
            label = row[cls_col].strip() if cls_col is not None else "1"
            vals = []
            for j, cell in enumerate(row):
                if j == cls_col:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}, line {line_no}, column {header[j]!r}: {cell!r} is not a number") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}, line {line_no}, column {header[j]!r}: value is not finite")
                vals.append(v)
            groups.setdefault(label, []).append(vals)
    return cols, groups


def _dimension(spec) -> int:
    if spec.kind in ("interval", "hist_random"):
        return 1
    if spec.kind == "hist_fixed":
        return len(spec.grids)
    return 2


def cmd_aggregate(args) -> int:
    spec, columns = load_symbol_spec(_config_path(args.config))
    names, groups = _read_csv(Path(args.input))
    if columns:
        missing = [c for c in columns if c not in names]
        if missing:
            raise DataError(f"columns {missing} not in the CSV header {names}")
        pick = [names.index(c) for c in columns]
    else:
        pick = list(range(len(names)))
    if len(pick) != _dimension(spec):
        raise DataError(f"{spec.kind} needs {_dimension(spec)} data column(s), the input has {len(pick)} "
                        "(select with 'columns' in the [symbol] section)")
    out, skipped = [], []
    for label, rows in groups.items():
        X = np.asarray(rows, dtype=float)[:, pick]
        try:
            sym = spec.build(X)
        except SymbolError as exc:
            skipped.append(label)
            print(f"class {label}: {exc}", file=sys.stderr)
            continue
        out.append({"class": label, **symbol_to_dict(sym)})
    text = dumps(out) + "\n"
    if args.output:
        _atomic_write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    print(f"{len(out)} symbol(s) written, {len(skipped)} class(es) skipped", file=sys.stderr)
    return EXIT_DATA if skipped else EXIT_OK


def _load_symbols(path: Path):
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(obj, dict) and "symbols" in obj:
        obj = obj["symbols"]
    if isinstance(obj, dict):
        obj = [obj]
    if not isinstance(obj, list) or not obj:
        raise DataError(f"{path}: expected a non-empty list of symbol objects")
    try:
        syms = [symbol_from_dict(o) for o in obj]
        return stack_symbols(syms)
    except SymbolError as exc:
        raise DataError(f"{path}: {exc}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot parse numbers from {text!r}") from None


def cmd_fit(args) -> int:
    try:
        family = get_family(args.family)
    except Exception:
        raise UsageError(f"unknown family {args.family!r}") from None
    fixed = {}
    for item in args.fixed:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fixed expects NAME=VALUE, got {item!r}")
        fixed[name.strip()] = _floats(value)[0]
    theta0 = _floats(args.theta0) if args.theta0 else None
    symbols = _load_symbols(Path(args.input))
    is_rect = symbols.__class__.__name__ in ("RectMinMaxSymbol", "OrderRectSymbol")
    if is_rect != (family is BivariateNormal):
        raise DataError(f"{family.name} cannot be fitted to {symbols.__class__.__name__} data")
    try:
        options = FitOptions(max_iter=args.max_iter, tol=args.tol, mc_samples=args.mc_samples,
                             rect_method=args.rect_method, seed=args.seed or 0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        fit = fit_mle(symbols, family, theta0, options, fixed=fixed, compute_stderr=not args.no_stderr)
    except ZeroLikelihoodError as exc:
        raise NumericalFailure(f"{exc}; choose starting values under which every symbol is possible") from None
    except InvalidParameterError as exc:
        raise UsageError(str(exc)) from None
    body = fit.as_dict()
    print(f"family     {fit.family}")
    for j, name in enumerate(fit.param_names):
        se = "" if fit.stderr is None or not np.isfinite(fit.stderr[j]) else f"  (se {fit.stderr[j]:.6g})"
        tag = "  fixed" if name in fit.fixed else ""
        print(f"{name:<10} {fit.theta_hat[j]:.10g}{se}{tag}")
    print(f"loglik     {fit.loglik_at_max:.12g}")
    print(f"converged  {fit.converged}  iterations {fit.iterations}  starts {fit.n_starts}")
    if fit.stderr_note and fit.stderr is None and not args.no_stderr:
        print(f"stderr     unavailable: {fit.stderr_note}")
    text = dumps(body) + "\n"
    if args.output:
        _atomic_write(Path(args.output), text)
    if not fit.converged:
        raise NumericalFailure("optimiser did not converge")
    return EXIT_OK


def _config_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    try:
        return bundled_path(name)
    except ConfigError:
        raise ConfigError(f"config {name!r} is neither a file nor a bundled config") from None


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise UsageError("simulate requires --seed (all randomness flows from it)")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    path = _config_path(args.config)
    study = load_study(path)
    outdir = Path(args.output or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command="simulate",
        config={"file": str(path), "study": study.raw, "scale": args.scale, "threads": args.threads,
                "expensive": args.expensive},
        master_seed=args.seed,
    )
    stem = study.name
    if study.kind == "experiment":
        cells = experiment_cells(study, args.seed, args.scale, args.threads, args.expensive)
        summary_rows, rep_rows, ref_rows = [], [], []
        for cfg, refs in cells:
            s = run_experiment(cfg)
            summary_rows += s.rows()
            rep_rows += s.replicate_rows()
            checks = compare_reference(s, refs)
            ref_rows += checks
            means = "  ".join(f"{p}={m:.4f}" for p, m in zip(s.param_names, s.mean))
            print(f"{cfg.name}: T={cfg.T} failed={s.n_failed} {means} ({s.wall_time:.1f}s)")
            for c in checks:
                print(f"  {'PASS' if c['passed'] else 'FAIL'} {c['statistic']}({c['parameter']}) = "
                      f"{c['value']:.4f}, reference {c['reference']} in [{c['lower']:.4f}, {c['upper']:.4f}]")
        outputs = {f"{stem}_summary.csv": (summary_rows, SUMMARY_COLUMNS),
                   f"{stem}_replicates.csv": (rep_rows, REPLICATE_COLUMNS)}
        if ref_rows:
            outputs[f"{stem}_reference.csv"] = (ref_rows, REFERENCE_COLUMNS)
        manifest.results = {"cells": len(cells), "reference_checks_passed": all(r["passed"] for r in ref_rows)}
    elif study.kind == "rmse":
        rows = []
        for cfg in rmse_cells(study, args.seed, args.scale, args.threads):
            curve = run_rmse_study(cfg)
            rows += [{"cell": cfg.name, "n": cfg.n, **r} for r in curve.table()]
            print(f"{cfg.name}: n={cfg.n} T={cfg.T} {len(curve.rows)} symbol designs ({curve.wall_time:.1f}s)")
        outputs = {f"{stem}_rmse.csv": (rows, ("cell", "n") + RMSE_COLUMNS)}
    else:
        rows = []
        for cfg in meta_bias_cells(study, args.seed, args.scale, args.threads):
            table = run_meta_bias_study(cfg)
            rows += table.rows
            print(f"{cfg.name}: {cfg.population} T={cfg.T} {len(cfg.q_values)} sample sizes ({table.wall_time:.1f}s)")
        outputs = {f"{stem}_meta_bias.csv": (rows, META_BIAS_COLUMNS)}
    for name, (rows, cols) in outputs.items():
        write_csv(outdir / name, rows, cols)
        manifest.outputs.append(str(outdir / name))
    manifest.write(outdir / f"{stem}_manifest.json")
    print(f"wrote {', '.join(outputs)} and {stem}_manifest.json to {outdir}")
    return EXIT_OK


def cmd_meta(args) -> int:
    q, n = np.array(args.q), args.n
    rows = []
    try:
        for method in args.methods:
            if method == "luo":
                rows.append(("Luo", meta_mean_luo(q, n), None))
            elif method == "wan":
                rows.append(("Wan", None, meta_sd_wan(q, n)))
            elif method == "shi":
                rows.append(("Shi", None, meta_sd_shi(q, n)))
            else:
                base = "Normal1D" if method == "symbolic_normal" else "LogNormal1D"
                est = meta_symbolic(q, n, base)
                rows.append((est.method, est.mean_hat, est.sd_hat))
    except (ValueError, SymlikError) as exc:
        raise DataError(str(exc)) from None
    print(f"{'method':<18} {'mean':>14} {'sd':>14}")
    for name, mean, sd in rows:
        fm = "" if mean is None else f"{mean:.8g}"
        fs = "" if sd is None else f"{sd:.8g}"
        print(f"{name:<18} {fm:>14} {fs:>14}")
    if args.output:
        _atomic_write(Path(args.output), dumps({"q": q.tolist(), "n": n, "estimates": [
            {"method": a, "mean_hat": b, "sd_hat": c} for a, b, c in rows]}) + "\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.n_sims < MIN_SIMS:
        raise UsageError(f"--n-sims must be at least {MIN_SIMS}")
    seed = 0 if args.seed is None else args.seed
    manifest = RunManifest(
        command="oracle-check",
        config={"cases": args.cases or sorted(oracle_suite()), "n_sims": args.n_sims, "inject": args.inject},
        master_seed=seed,
    )
    reports = run_oracle_suite(args.cases, args.n_sims, seed, args.inject)
    ok = True
    rows = []
    for name, rep in reports.items():
        ok &= rep.passed
        print(f"{'PASS' if rep.passed else 'FAIL'} {name:<18} max|z| = {rep.max_abs_z:.3f} "
              f"(threshold {rep.threshold}, {rep.z.size} probes)")
        rows.append({"case": name, "passed": rep.passed, "max_abs_z": rep.max_abs_z, "probes": int(rep.z.size),
                     "n_sims": rep.n_sims})
    manifest.results["cases"] = {r["case"]: r for r in rows}
    if not args.skip_convention:
        res = resolve_iter_seg_convention(BivariateNormal(2.0, 5.0, 0.5, 0.5, 0.7), n_sims=args.n_sims,
                                          rng=seed)
        zs = {k: v.max_abs_z for k, v in res["reports"].items()}
        print(f"iterative segmentation upper index: passing {res['passing']}, "
              f"max|z| {', '.join(f'{k}={v:.2f}' for k, v in zs.items())} -> convention {res['convention']}")
        manifest.results["iter_seg_convention"] = {"convention": res["convention"], "passing": res["passing"],
                                                   "max_abs_z": zs}
        ok &= res["convention"] is not None
    if args.output:
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        write_csv(outdir / "oracle.csv", rows, ("case", "passed", "max_abs_z", "probes", "n_sims"))
        manifest.outputs.append(str(outdir / "oracle.csv"))
        manifest.write(outdir / "oracle_manifest.json")
    if not ok:
        raise NumericalFailure("oracle discrepancy beyond threshold")
    return EXIT_OK


COMMANDS = {
    "aggregate": cmd_aggregate,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "meta": cmd_meta,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None) -> int:
    """Entry point; returns the exit code instead of calling ``sys.exit``."""
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("symlik: choose a command: " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SymlikError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    _entry()
