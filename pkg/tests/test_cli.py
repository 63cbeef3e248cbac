import csv

import numpy as np
import pytest

from spreadpide.cli import run
from spreadpide.config import RunConfig, load_config
from spreadpide.pricer import Contract


def test_selftest_passes(capsys):
    assert run(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "merton coercivity" in out


def _table(out):
    lines = out.splitlines()
    i = lines.index("K,T,price,iterations_per_step,seconds")
    return np.array([l.split(",") for l in lines[i + 1:]], float)


def test_price_table_with_zero_steps_equals_payoff(capsys):
    assert run(["price", "--levels", "4", "--steps", "0"]) == 0
    tab = _table(capsys.readouterr().out)
    c = Contract()
    assert tab.shape == (20, 5)
    assert sorted(set(tab[:, 1])) == pytest.approx([1 / 12, 0.25, 0.5, 1.0])
    payoff = np.maximum(c.s0[1] - c.c * c.s0[0] - tab[:, 0], 0.0)
    # spot sits on a node, where the interpolant reproduces the payoff
    np.testing.assert_allclose(tab[:, 2], payoff, atol=1e-10)


def test_price_table_monotone(tmp_path, capsys):
    out = tmp_path / "table.csv"
    assert run(["price", "--levels", "4", "--strikes", "0.9,1.1", "--maturities", "1/4, 1",
                "--out", str(out)]) == 0
    tab = _table(capsys.readouterr().out)
    by = {(k, t): p for k, t, p, *_ in tab}
    assert by[(0.9, 0.25)] > by[(1.1, 0.25)] and by[(0.9, 1.0)] > by[(1.1, 1.0)]
    assert by[(1.1, 1.0)] > by[(1.1, 0.25)]
    text = out.read_text()
    assert "[merton]" in text and "K,T,price,iterations_per_step" in text


def test_price_surface_csv(tmp_path, capsys):
    out = tmp_path / "surface.csv"
    assert run(["price", "--model", "gamma-tc", "--levels", "3", "--steps", "2", "--strikes", "1",
                "--maturities", "0.5", "--surface", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ")
    rows = list(csv.reader(line for line in lines if not line.startswith("#")))
    assert rows[0] == ["x1", "x2", "tau", "price"]
    data = np.array(rows[1:], float)
    assert set(np.unique(data[:, 2])) == {0.0, 0.25, 0.5}
    assert np.all(np.abs(data[:, :2]) <= 1.1 + 1e-12)


def test_config_round_trip(tmp_path):
    cfg = RunConfig()
    path = tmp_path / "run.ini"
    path.write_text(cfg.to_ini())
    back = load_config(str(path))
    assert back.merton == cfg.merton and back.gamma_tc == cfg.gamma_tc
    assert back.contract == cfg.contract and back.scheme == cfg.scheme and back.mc == cfg.mc


def test_config_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[contract]\nK = 1.2\ns0 = 90, 2.1\n[scheme]\nN = 5\nM = 12  ; fixed step count\nradius_factor = 37.69911184307752\n")
    cfg = load_config(str(path))
    assert cfg.contract.K == 1.2 and cfg.contract.s0 == (90.0, 2.1)
    assert cfg.scheme.N == 5 and cfg.scheme.steps == 12 and cfg.scheme.quad.copies == 12


def test_bad_config_exits_with_error(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[scheme]\nwibble = 3\n")
    assert run(["selftest", "--config", str(path)]) == 2
    assert "wibble" in capsys.readouterr().err
    assert run(["selftest", "--config", str(tmp_path / "missing.ini")]) == 2


def test_converge_small(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    assert run(["converge", "--levels", "3..4", "--ref", "5", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "N,rel_L2_error,mean_iterations,seconds"
    assert "fitted rate" in out.read_text()


def test_simulate_writes_paths(tmp_path, capsys):
    out = tmp_path / "paths.csv"
    assert run(["simulate", "--paths", "2000", "--steps", "3", "--save-paths", "5",
                "--seed", "1", "--out", str(out)]) == 0
    assert "stderr=" in capsys.readouterr().out
    rows = [r for r in csv.reader(l for l in out.read_text().splitlines() if not l.startswith("#"))]
    assert rows[0] == ["path", "t", "S1", "S2"] and len(rows) == 1 + 5 * 4


def test_calibrate_bundled_series(tmp_path, capsys):
    out = tmp_path / "fit.ini"
    assert run(["calibrate", "--model", "gamma-tc", "--out", str(out)]) == 0
    assert "dropped=1" in capsys.readouterr().out
    assert out.read_text().startswith("[gamma-tc]")
