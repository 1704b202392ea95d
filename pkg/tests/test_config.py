import pytest

from symlik.config import (
    ConfigError,
    bundled_configs,
    bundled_path,
    chi2_sd_band,
    experiment_cells,
    load_study,
    load_symbol_spec,
    meta_bias_cells,
    rmse_cells,
)

GRID_STUDY = """
[study]
kind = experiment
name = demo
expensive_n_c = 100

[defaults]
family = Normal1D
mu = 0
sigma = 1
m = 3
T = 40
symbol = interval
l = 1
u = -1

[cell a]
n_c = 5, 10, 100
rect_method = full
"""


def test_grid_expansion_and_gating():
    study = load_study(GRID_STUDY)
    assert [c.name for c in study.cells] == ["a_n_c5", "a_n_c10", "a_n_c100"]
    assert [c.expensive for c in study.cells] == [False, False, True]
    with pytest.raises(ConfigError, match="expensive"):
        experiment_cells(study, seed=1)
    cells = experiment_cells(study, seed=1, expensive=True)
    assert [cfg.n_c for cfg, _ in cells] == [5, 10, 100]
    assert all(cfg.master_seed == 1 for cfg, _ in cells)


def test_scale_reduces_T():
    study = load_study(GRID_STUDY.replace("n_c = 5, 10, 100", "n_c = 5"))
    (cfg, _), = experiment_cells(study, seed=0, scale=0.1)
    assert cfg.T == 4


def test_bundled_configs_load():
    names = bundled_configs()
    assert {"table1", "table2", "figure3_n81", "figure2_normal", "table1_rho09_m50_nc5"} <= set(names)
    table1 = load_study(bundled_path("table1"))
    assert len(table1.cells) == 140
    (cfg, refs), = experiment_cells(load_study(bundled_path("table1_rho09_m50_nc5")), seed=0)
    assert cfg.theta0[-1] == 0.9 and cfg.m == 50 and cfg.T == 100
    assert refs == {"rho": {"mean": 0.902, "sd": 0.017}}
    (rmse,) = rmse_cells(load_study(bundled_path("figure3_n81")), seed=0, scale=0.1)
    assert rmse.n == 81 and rmse.T == 200
    meta = meta_bias_cells(load_study(bundled_path("figure2_normal")), seed=0)
    assert meta[0].population == "normal"
    cells = experiment_cells(load_study(bundled_path("table2")), seed=0, scale=0.01)
    assert len(cells) == 24


@pytest.mark.parametrize("text, match", [
    ("[defaults]\nm = 1\n", "study"),
    ("[study]\nkind = nonsense\n", "kind"),
    ("[study]\nkind = experiment\n[weird]\nx = 1\n", "unknown sections"),
    ("[study]\nkind = experiment\n[defaults]\nfamily = Cauchy\n", "family"),
])
def test_bad_study_files(text, match):
    with pytest.raises(ConfigError, match=match):
        experiment_cells(load_study(text), seed=0)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_study("/nonexistent/study.ini")


def test_symbol_spec_section():
    spec, cols = load_symbol_spec("[symbol]\nkind = hist_fixed\ngrid1 = 0 1 2 5\ncolumns = value\n")
    assert spec.kind == "hist_fixed" and spec.grids == ((0.0, 1.0, 2.0, 5.0),)
    assert cols == ("value",)
    spec, cols = load_symbol_spec("[symbol]\nkind = rect_order\nconstruction = iter_seg\nl = 6 3\nu = 55 3\n")
    assert spec.construction == "iter_seg" and spec.l == (6, 3) and cols is None


def test_chi2_band_contains_sd():
    lo, hi = chi2_sd_band(0.017, 100)
    assert lo < 0.017 < hi
    assert chi2_sd_band(0.017, 1000)[1] - chi2_sd_band(0.017, 1000)[0] < hi - lo
