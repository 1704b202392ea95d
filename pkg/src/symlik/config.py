"""Study configuration files.

A study file is INI-style text: a ``[study]`` section naming the study
kind, an optional ``[defaults]`` section, and any number of
``[cell NAME]`` sections whose keys override the defaults.  Within a cell,
a comma-separated value is a grid and the cell expands to the Cartesian
product of its grids.  Space-separated values are vectors (orders, grids,
parameter vectors).  Lines starting with ``#`` or ``;`` are comments.

The master seed is never read from a file; it comes from the caller.
"""

from __future__ import annotations

import configparser
import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from scipy.stats import chi2

from .distributions import get_family
from .simulation import ExperimentConfig, MetaBiasConfig, RmseConfig
from .symbols import SymbolSpec

__all__ = [
    "ConfigError",
    "Cell",
    "StudyFile",
    "load_study",
    "bundled_configs",
    "bundled_path",
    "experiment_cells",
    "rmse_cells",
    "meta_bias_cells",
    "load_symbol_spec",
    "references",
    "compare_reference",
    "chi2_sd_band",
    "STUDY_KINDS",
    "REFERENCE_COLUMNS",
]

STUDY_KINDS = ("experiment", "rmse", "meta_bias")

# keys whose commas are not grid separators
_NO_GRID = {"description"}


class ConfigError(ValueError):
    """Invalid or inconsistent study configuration."""


@dataclass
class Cell:
    name: str
    values: dict[str, str]
    expensive: bool = False


@dataclass
class StudyFile:
    kind: str
    name: str
    description: str
    cells: list[Cell]
    source: str = ""
    raw: dict = field(default_factory=dict)


def _read(source) -> tuple[configparser.ConfigParser, str]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    text, label = None, str(source)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "[" not in source):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
    else:
        text, label = str(source), "<string>"
    try:
        parser.read_string(text, source=label)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return parser, label


def _expand(name: str, values: dict[str, str]) -> list[tuple[str, dict[str, str]]]:
    grid_keys = [k for k, v in values.items() if k not in _NO_GRID and "," in v]
    if not grid_keys:
        return [(name, dict(values))]
    options = [[p.strip() for p in values[k].split(",") if p.strip()] for k in grid_keys]
    out = []
    for combo in itertools.product(*options):
        v = dict(values)
        v.update(zip(grid_keys, combo))
        suffix = "_".join(f"{k}{c}" for k, c in zip(grid_keys, combo))
        out.append((f"{name}_{suffix}" if name else suffix, v))
    return out


def load_study(source) -> StudyFile:
    """Parse a study file (path or text) into expanded cells."""
    parser, label = _read(source)
    if "study" not in parser:
        raise ConfigError(f"{label}: missing [study] section")
    study = dict(parser["study"])
    kind = study.get("kind", "")
    if kind not in STUDY_KINDS:
        raise ConfigError(f"{label}: [study] kind must be one of {STUDY_KINDS}, got {kind!r}")
    defaults = dict(parser["defaults"]) if "defaults" in parser else {}
    threshold = study.get("expensive_n_c")
    sections = [s for s in parser.sections() if s.startswith("cell")]
    unknown = [s for s in parser.sections() if s not in ("study", "defaults") and not s.startswith("cell")]
    if unknown:
        raise ConfigError(f"{label}: unknown sections {unknown}")
    raw_cells = [(s[4:].strip(), {**defaults, **dict(parser[s])}) for s in sections] or [("", defaults)]
    cells = []
    for name, values in raw_cells:
        for cname, v in _expand(name, values):
            expensive = _bool(v.get("expensive", "false"))
            if threshold is not None and "n_c" in v:
                expensive = expensive or int(v["n_c"]) >= int(threshold)
            cells.append(Cell(cname or study.get("name", "cell"), v, expensive))
    names = [c.name for c in cells]
    if len(set(names)) != len(names):
        raise ConfigError(f"{label}: duplicate cell names")
    return StudyFile(kind, study.get("name", Path(label).stem), study.get("description", ""), cells, label,
                     {"study": study, "defaults": defaults, **{s: dict(parser[s]) for s in sections}})


def bundled_configs() -> list[str]:
    """Names of the study files shipped with the package."""
    root = resources.files("symlik") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def bundled_path(name: str) -> Path:
    """Path of a bundled study file, by name with or without ``.ini``."""
    stem = name[:-4] if name.endswith(".ini") else name
    path = Path(str(resources.files("symlik") / "configs" / f"{stem}.ini"))
    if not path.exists():
        raise ConfigError(f"no bundled config {name!r}; available: {', '.join(bundled_configs())}")
    return path


# -- typed values ----------------------------------------------------------------------


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _num(cell: Cell, key: str, kind=float, default=None):
    if key not in cell.values:
        if default is None:
            raise ConfigError(f"cell {cell.name}: missing key {key!r}")
        return default
    text = cell.values[key].strip()
    try:
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ConfigError(f"cell {cell.name}: {key} = {text!r} is not a valid {kind.__name__}") from None


def _vec(cell: Cell, key: str, kind=float, default=None):
    if key not in cell.values:
        return default
    text = cell.values[key].strip()
    out = []
    for part in text.split():
        if kind is int and "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
            continue
        try:
            out.append(kind(part))
        except ValueError:
            raise ConfigError(f"cell {cell.name}: {key} = {text!r} has a bad entry {part!r}") from None
    return tuple(out)


def _scaled_T(T: int, scale: float, minimum: int) -> int:
    if not scale > 0:
        raise ConfigError("scale must be positive")
    return max(minimum, int(round(T * scale)))


def _theta(cell: Cell, family: str) -> tuple[float, ...]:
    names = get_family(family).param_names
    vec = _vec(cell, "theta0")
    if vec is not None:
        if len(vec) != len(names):
            raise ConfigError(f"cell {cell.name}: theta0 needs {len(names)} values {names}")
        return vec
    return tuple(_num(cell, p) for p in names)


def _symbol(cell: Cell) -> SymbolSpec:
    kind = cell.values.get("symbol", "").strip()
    l, u, k = _vec(cell, "l", int), _vec(cell, "u", int), _vec(cell, "k", int)
    grids = tuple(g for g in (_vec(cell, f"grid{j}") for j in (1, 2)) if g is not None) or None
    kw = {}
    if "construction" in cell.values:
        kw["construction"] = cell.values["construction"].strip()
    if "axis_order" in cell.values:
        kw["axis_order"] = _vec(cell, "axis_order", int)
    if kind == "interval" and l is not None and u is not None:
        l, u = l[0], u[0]
    try:
        return SymbolSpec(kind, l=l, u=u, k=k, grids=grids, **kw)
    except Exception as exc:
        raise ConfigError(f"cell {cell.name}: {exc}") from None


def load_symbol_spec(source) -> tuple[SymbolSpec, tuple[str, ...] | None]:
    """Read a ``[symbol]`` section: the spec plus optional data ``columns``.

    Keys are those of experiment cells: ``kind``, ``l``, ``u``, ``k``,
    ``grid1``, ``grid2``, ``construction``, ``axis_order``.
    """
    parser, label = _read(source)
    if "symbol" not in parser:
        raise ConfigError(f"{label}: missing [symbol] section")
    values = dict(parser["symbol"])
    if "kind" not in values:
        raise ConfigError(f"{label}: [symbol] needs a kind")
    values["symbol"] = values.pop("kind")
    cell = Cell("symbol", values)
    columns = tuple(values["columns"].split()) if "columns" in values else None
    return _symbol(cell), columns


def references(cell: Cell) -> dict[str, dict[str, float]]:
    """Published comparison values: ``ref_mean_<param>`` and ``ref_sd_<param>`` keys."""
    out: dict[str, dict[str, float]] = {}
    for key in cell.values:
        for stat in ("mean", "sd"):
            prefix = f"ref_{stat}_"
            if key.startswith(prefix):
                out.setdefault(key[len(prefix):], {})[stat] = _num(cell, key)
    return out


def experiment_cells(study: StudyFile, seed: int, scale: float = 1.0, threads: int = 1,
                     expensive: bool = False) -> list[tuple[ExperimentConfig, dict]]:
    """Typed configs (with reference values) for every runnable experiment cell.

    Raises ConfigError if a cell is marked expensive and ``expensive`` is False.
    """
    if study.kind != "experiment":
        raise ConfigError(f"study kind is {study.kind!r}, not 'experiment'")
    gated = [c.name for c in study.cells if c.expensive]
    if gated and not expensive:
        raise ConfigError(f"cells {gated} are marked expensive; pass --expensive to run them")
    out = []
    for cell in study.cells:
        family = cell.values.get("family", "").strip()
        try:
            get_family(family)
        except Exception:
            raise ConfigError(f"cell {cell.name}: unknown family {family!r}") from None
        fixed = {k[6:]: _num(cell, k) for k in cell.values if k.startswith("fixed_")}
        try:
            cfg = ExperimentConfig(
                family=family,
                theta0=_theta(cell, family),
                m=_num(cell, "m", int),
                n_c=_num(cell, "n_c", int),
                T=_scaled_T(_num(cell, "T", int), scale, 1),
                symbol=_symbol(cell),
                rect_method=cell.values.get("rect_method", "full").strip(),
                mc_samples=_num(cell, "mc_samples", int, 100_000),
                master_seed=int(seed),
                start=cell.values.get("start", "data").strip(),
                fixed=fixed,
                tol=_num(cell, "tol", float, 1e-9),
                max_iter=_num(cell, "max_iter", int, 5000),
                chunk=_num(cell, "chunk", int, 25),
                threads=int(threads),
                name=cell.name,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"cell {cell.name}: {exc}") from None
        out.append((cfg, references(cell)))
    return out


def rmse_cells(study: StudyFile, seed: int, scale: float = 1.0, threads: int = 1) -> list[RmseConfig]:
    if study.kind != "rmse":
        raise ConfigError(f"study kind is {study.kind!r}, not 'rmse'")
    out = []
    for cell in study.cells:
        try:
            out.append(RmseConfig(
                n=_num(cell, "n", int),
                mu0=_num(cell, "mu0", float, 50.0),
                sigma0=_num(cell, "sigma0", float, 17.0),
                T=_scaled_T(_num(cell, "T", int, 2000), scale, 2),
                kinds=_vec(cell, "kinds", str, ("interval", "hist")),
                i_values=_vec(cell, "i_values", int),
                master_seed=int(seed),
                tol=_num(cell, "tol", float, 1e-9),
                threads=int(threads),
                name=cell.name,
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"cell {cell.name}: {exc}") from None
    return out


def meta_bias_cells(study: StudyFile, seed: int, scale: float = 1.0, threads: int = 1) -> list[MetaBiasConfig]:
    if study.kind != "meta_bias":
        raise ConfigError(f"study kind is {study.kind!r}, not 'meta_bias'")
    out = []
    for cell in study.cells:
        try:
            kw = {}
            methods = _vec(cell, "methods", str)
            if methods is not None:
                kw["methods"] = methods
            out.append(MetaBiasConfig(
                population=cell.values.get("population", "normal").strip(),
                q_values=_vec(cell, "q_values", int, tuple(range(1, 51))),
                T=_scaled_T(_num(cell, "T", int, 10_000), scale, 2),
                master_seed=int(seed),
                tol=_num(cell, "tol", float, 1e-12),
                threads=int(threads),
                name=cell.name,
                **kw,
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"cell {cell.name}: {exc}") from None
    return out


def chi2_sd_band(sd: float, T: int, level: float = 0.99) -> tuple[float, float]:
    """Interval for a sample sd from ``T`` normal replicates around a true ``sd``."""
    a = (1.0 - level) / 2.0
    df = T - 1
    return sd * math.sqrt(chi2.ppf(a, df) / df), sd * math.sqrt(chi2.ppf(1.0 - a, df) / df)


def compare_reference(summary, refs: dict, level: float = 0.99) -> list[dict]:
    """Check a summary against reference means and sds.

    A reference mean passes within 3 standard errors; the standard error
    uses the reference sd when given, the replicate sd otherwise.  A
    reference sd passes inside the chi-square band for the converged count.
    Reduced ``T`` (``--scale``) widens both tolerances automatically.
    """
    rows = []
    n = summary.n_converged
    for param, ref in refs.items():
        if param not in summary.param_names:
            raise ConfigError(f"reference for unknown parameter {param!r}")
        mean, sd = summary.stat(param)
        if "mean" in ref:
            spread = ref.get("sd", sd)
            half = 3.0 * spread / math.sqrt(n) if spread is not None and n > 0 else float("nan")
            rows.append({"cell": summary.name, "parameter": param, "statistic": "mean", "reference": ref["mean"],
                         "value": mean, "lower": ref["mean"] - half, "upper": ref["mean"] + half,
                         "passed": bool(abs(mean - ref["mean"]) <= half)})
        if "sd" in ref and sd is not None and n >= 2:
            lo, hi = chi2_sd_band(ref["sd"], n, level)
            rows.append({"cell": summary.name, "parameter": param, "statistic": "sd", "reference": ref["sd"],
                         "value": sd, "lower": lo, "upper": hi, "passed": bool(lo <= sd <= hi)})
    return rows


REFERENCE_COLUMNS = ("cell", "parameter", "statistic", "reference", "value", "lower", "upper", "passed")
