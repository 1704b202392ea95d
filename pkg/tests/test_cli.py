import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from symlik.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, dumps, main


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def _spec(path, text):
    path.write_text("[symbol]\n" + text)
    return str(path)


def test_dumps_round_trip_is_exact():
    vals = np.random.default_rng(0).normal(size=200) * 10.0 ** np.random.default_rng(1).integers(-300, 300, 200)
    back = json.loads(dumps({"x": vals.tolist(), "y": [0.1, 1 / 3, 2.0 ** -1074, None]}))
    assert np.array_equal(np.array(back["x"]), vals)
    assert back["y"][:3] == [0.1, 1 / 3, 2.0 ** -1074] and back["y"][3] is None


def test_version_via_module():
    out = subprocess.run([sys.executable, "-m", "symlik", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "symlik" in out.stdout


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["fit"]) == EXIT_USAGE
    assert main(["simulate", "--config", "table1_rho09_m50_nc5"]) == EXIT_USAGE
    assert "seed" in capsys.readouterr().err
    assert main(["simulate", "--config", "no_such_config", "--seed", "1"]) == EXIT_USAGE


def test_aggregate_single_interval(tmp_path):
    data = _write_csv(tmp_path / "x.csv", ["value"], [[3.0], [1.5], [2.0], [9.0], [4.0]])
    spec = _spec(tmp_path / "s.ini", "kind = interval\nl = 1\nu = 5\n")
    out = tmp_path / "sym.json"
    assert main(["aggregate", "-i", data, "-c", spec, "-o", str(out)]) == EXIT_OK
    syms = json.loads(out.read_text())
    assert len(syms) == 1
    assert syms[0]["type"] == "interval" and (syms[0]["s_l"], syms[0]["s_u"], syms[0]["n"]) == (1.5, 9.0, 5)


def test_aggregate_tie_names_class(tmp_path, capsys):
    rows = [["a", 0.0, 0.0], ["a", 1.0, 2.0], ["a", 2.0, 1.0],
            ["b", 0.0, 0.0], ["b", 0.0, 1.0], ["b", 1.0, 2.0]]
    data = _write_csv(tmp_path / "x.csv", ["class", "x", "y"], rows)
    spec = _spec(tmp_path / "s.ini", "kind = rect_minmax\n")
    out = tmp_path / "sym.json"
    assert main(["aggregate", "-i", data, "-c", spec, "-o", str(out)]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "class b" in err and "class a" not in err
    assert [s["class"] for s in json.loads(out.read_text())] == ["a"]


def test_aggregate_reports_bad_cell(tmp_path, capsys):
    data = _write_csv(tmp_path / "x.csv", ["value"], [[1.0], ["oops"], [2.0]])
    spec = _spec(tmp_path / "s.ini", "kind = interval\nl = 1\nu = 2\n")
    assert main(["aggregate", "-i", data, "-c", spec]) == EXIT_DATA
    err = capsys.readouterr().err
    assert "line 3" in err and "value" in err


def test_histogram_pipeline(tmp_path, capsys):
    rng = np.random.default_rng(2)
    rows = [[c, v] for c in range(1, 36) for v in rng.normal(1.0, 2.0, 20)]
    data = _write_csv(tmp_path / "x.csv", ["class", "value"], rows)
    spec = _spec(tmp_path / "s.ini", "kind = hist_fixed\ngrid1 = -50 -1 1 3 5 50\n")
    sym = tmp_path / "sym.json"
    assert main(["aggregate", "-i", data, "-c", spec, "-o", str(sym)]) == EXIT_OK
    parsed = json.loads(sym.read_text())
    assert len(parsed) == 35 and all(len(s["counts"]) == 5 for s in parsed)
    fit = tmp_path / "fit.json"
    assert main(["fit", "-i", str(sym), "--family", "Normal1D", "-o", str(fit)]) == EXIT_OK
    theta = json.loads(fit.read_text())["theta_hat"]
    assert abs(theta[0] - 1.0) < 0.3 and abs(theta[1] - 2.0) < 0.3


def test_fit_classical_reduction(tmp_path):
    x = np.random.default_rng(3).normal(5.0, 2.0, 30)
    data = _write_csv(tmp_path / "x.csv", ["value"], [[v] for v in x])
    spec = _spec(tmp_path / "s.ini", "kind = hist_random\nk = " + " ".join(str(i) for i in range(1, 31)) + "\n")
    sym = tmp_path / "sym.json"
    assert main(["aggregate", "-i", data, "-c", spec, "-o", str(sym)]) == EXIT_OK
    out = tmp_path / "fit.json"
    assert main(["fit", "-i", str(sym), "--family", "Normal1D", "--tol", "1e-12", "-o", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())
    np.testing.assert_allclose(res["theta_hat"], [x.mean(), x.std(ddof=0)], rtol=1e-6)
    assert len(res["stderr"]) == 2


def test_fit_zero_probability_start(tmp_path, capsys):
    sym = tmp_path / "sym.json"
    sym.write_text(json.dumps([{"type": "interval", "n": 5, "s_l": 0.2, "s_u": 1.5, "l": 1, "u": 5}]))
    code = main(["fit", "-i", str(sym), "--family", "Uniform1D", "--theta0", "0 1"])
    assert code == EXIT_NUMERIC
    assert "starting values" in capsys.readouterr().err


def test_iterative_segmentation_pipeline(tmp_path):
    rng = np.random.default_rng(4)
    cov = 0.25 * np.array([[1.0, 0.7], [0.7, 1.0]])
    rows = [[c, *rng.multivariate_normal([2.0, 5.0], cov)] for c in range(1, 21) for _ in range(60)]
    data = _write_csv(tmp_path / "x.csv", ["class", "x", "y"], rows)
    spec = _spec(tmp_path / "s.ini", "kind = rect_order\nconstruction = iter_seg\nl = 6 3\nu = 55 3\ncolumns = x y\n")
    sym = tmp_path / "sym.json"
    assert main(["aggregate", "-i", data, "-c", spec, "-o", str(sym)]) == EXIT_OK
    out = tmp_path / "fit.json"
    assert main(["fit", "-i", str(sym), "--family", "BivariateNormal", "-o", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())
    assert res["converged"] and abs(res["theta_hat"][4] - 0.7) < 0.2


def test_simulate_cell_with_scale(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["simulate", "-c", "table1_rho09_m50_nc5", "--seed", "0", "--scale", "0.1", "-o", str(out)])
    assert code == EXIT_OK
    with open(out / "table1_rho09_m50_nc5_summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["T"] for r in rows} == {"10"}
    manifest = json.loads((out / "table1_rho09_m50_nc5_manifest.json").read_text())
    assert manifest["master_seed"] == 0 and len(manifest["outputs"]) == 3
    assert (out / "table1_rho09_m50_nc5_reference.csv").exists()


def test_simulate_rmse_curve(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "-c", "figure3_n21", "--seed", "0", "--scale", "0.01", "-o", str(out)]) == EXIT_OK
    with open(out / "figure3_n21_rmse.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["kind"] == "classical" and float(rows[0]["rmse_mu"]) == 1.0
    assert len(rows) == 1 + 2 * 10


def test_simulate_expensive_gate(tmp_path, capsys):
    assert main(["simulate", "-c", "table1", "--seed", "0", "-o", str(tmp_path)]) == EXIT_USAGE
    assert "--expensive" in capsys.readouterr().err


def test_meta_command(capsys):
    assert main(["meta", "--q", "1", "2", "3", "4", "5", "--n", "9", "--methods", "luo"]) == EXIT_OK
    row = capsys.readouterr().out.strip().splitlines()[-1].split()
    assert row[0] == "Luo" and float(row[1]) == 3.0
    x = np.sort(np.random.default_rng(5).normal(50, 17, 5))
    args = ["meta", "--q", *(repr(float(v)) for v in x), "--n", "5", "--methods", "luo", "wan", "shi", "symbolic_normal"]
    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5
    sym = lines[-1].split()
    assert sym[0] == "SymbolicNormal"
    assert float(sym[1]) == pytest.approx(x.mean(), rel=1e-6)
    assert float(sym[2]) == pytest.approx(x.std(ddof=1), rel=1e-6)
    assert main(["meta", "--q", "1", "3", "2", "4", "5", "--n", "9"]) == EXIT_DATA


def test_oracle_check_and_negative_control(tmp_path, capsys):
    args = ["oracle-check", "--cases", "interval_uniform", "hist_random", "--n-sims", "100000", "--skip-convention"]
    assert main(args + ["-o", str(tmp_path)]) == EXIT_OK
    manifest = json.loads((tmp_path / "oracle_manifest.json").read_text())
    assert set(manifest["results"]["cases"]) == {"interval_uniform", "hist_random"}
    assert main(args + ["--inject", "off_by_one"]) == EXIT_NUMERIC
    assert "FAIL" in capsys.readouterr().out
    assert main(["oracle-check", "--n-sims", "10"]) == EXIT_USAGE
