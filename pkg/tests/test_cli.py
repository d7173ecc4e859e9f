import csv
import datetime as dt
import json

import numpy as np
import pytest

from rebalancing.cli import main

CONFIG = """
[grid]
horizon = 2
dt = 0.1

[model]
drift = 0.125
volatility = 0.5

[experiment]
n_assets = 2
mcs_runs = 8
master_seed = 5
universe_size = 6

[fee]
alpha = 0.01

[sweep]
m_values = 1, 5, 10, 21
D_values = 0, 0.5, 1
alpha_values = 0, 0.01, 0.03
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(CONFIG)
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def outputs(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir()) if p.name != "manifest.json"}


def test_simulate_writes_series_and_manifest(tmp_path, config):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    series = sorted(p.name for p in out.glob("growth_*.csv"))
    assert len(series) == 5
    table = rows(out / series[0])
    assert table[0] == ["t", "growth", "run_count"]
    assert len(table) == 1 + 20
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 5
    assert set(series) <= set(manifest["outputs"])
    assert (out / "config_snapshot.ini").exists()


def test_simulate_seed_override_is_reproducible(tmp_path, config):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--config", str(config), "--out", str(out), "--seed", "42"]) == 0
    assert outputs(a) == outputs(b)
    assert json.loads((a / "manifest.json").read_text())["master_seed"] == 42


def test_workers_do_not_change_outputs(tmp_path, config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(config), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(config), "--out", str(b), "--workers", "2"]) == 0
    assert outputs(a) == outputs(b)


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.ini"
    assert main(["simulate", "--config", str(missing), "--out", str(tmp_path / "o")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_arguments_exit_2(tmp_path, config):
    assert main(["simulate", "--config", str(config)]) == 2
    assert main(["frobnicate"]) == 2


def test_sweep_period_grid(tmp_path, config):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(config), "--out", str(out), "--axis", "m=1,5,10,21"]) == 0
    table = rows(out / "sweep.csv")
    assert table[0] == ["m", "alpha", "final_growth", "std_err", "runs"]
    assert len(table) - 1 == 12


def test_sweep_heatmap(tmp_path, config):
    out = tmp_path / "heat"
    argv = ["sweep", "--config", str(config), "--out", str(out), "--axis", "m=1,2,5,10,20", "--axis", "D=0,0.25,0.5,1", "--alpha", "0.01"]
    assert main(argv) == 0
    assert len(rows(out / "sweep.csv")) - 1 == 20
    grid = rows(out / "heatmap_grid.csv")
    assert len(grid) == 6 and len(grid[0]) == 5


@pytest.mark.parametrize(
    "extra",
    [
        ["--axis", "D=0,1.5"],
        ["--axis", "q=1,2"],
        ["--axis", "m=0"],
        ["--axis", "m=1", "--axis", "D=0.5", "--alpha", "0,0.01"],
        ["--axis", "m=x"],
    ],
)
def test_sweep_rejects_bad_axes(tmp_path, config, extra):
    assert main(["sweep", "--config", str(config), "--out", str(tmp_path / "o"), *extra]) == 2


def write_universe(folder, count, days=60):
    folder.mkdir()
    start = dt.date(2020, 1, 1)
    dates = [start + dt.timedelta(days=i) for i in range(days)]
    for i in range(count):
        rng = np.random.default_rng(i)
        closes = 20 * np.exp(np.cumsum(rng.normal(0, 0.02, days)))
        lines = ["Date,Open,High,Low,Close,Volume"]
        lines += [f"{d.isoformat()},1,1,1,{float(c)!r},10" for d, c in zip(dates, closes)]
        (folder / f"tk{i:02d}.csv").write_text("\n".join(lines) + "\n")
    return folder


def test_backtest(tmp_path, config):
    data = write_universe(tmp_path / "data", 20)
    out = tmp_path / "bt"
    assert main(["backtest", "--config", str(config), "--out", str(out), "--data", str(data)]) == 0
    assert len(list(out.glob("growth_*.csv"))) == 5
    market = rows(out / "market.csv")
    assert len(market[0]) == 21 and len(market) == 61
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["inputs"]) == 20


def test_backtest_too_many_assets(tmp_path):
    data = write_universe(tmp_path / "data", 20)
    cfg = tmp_path / "big.ini"
    cfg.write_text(CONFIG.replace("n_assets = 2", "n_assets = 21"))
    assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "o"), "--data", str(data)]) == 2


def test_backtest_empty_directory(tmp_path, config):
    (tmp_path / "empty").mkdir()
    assert main(["backtest", "--config", str(config), "--out", str(tmp_path / "o"), "--data", str(tmp_path / "empty")]) == 2


def test_backtest_bad_file_exit_2(tmp_path, config):
    data = write_universe(tmp_path / "data", 3)
    (data / "bad.csv").write_text("Date,Close\n2020-01-01,-1\n")
    assert main(["backtest", "--config", str(config), "--out", str(tmp_path / "o"), "--data", str(data)]) == 2


def test_subset_sim(tmp_path, config):
    out = tmp_path / "sub"
    assert main(["subset-sim", "--config", str(config), "--out", str(out)]) == 0
    assert len(list(out.glob("growth_*.csv"))) == 5


def test_subset_sim_universe_too_small(tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text(CONFIG.replace("universe_size = 6", "universe_size = 1"))
    assert main(["subset-sim", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_runtime_failure_exit_3(tmp_path, capsys):
    # One fixed-point iteration cannot meet a 1e-15 tolerance at a 50% fee
    # (with two equal weights the estimate cancels out, hence three assets).
    cfg = tmp_path / "broke.ini"
    text = CONFIG.replace("n_assets = 2", "n_assets = 3").replace("alpha = 0.01", "alpha = 0.5\nresolution = fixedpoint\ntolerance = 1e-15\nmax_iterations = 1")
    cfg.write_text(text)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate"],
        ["sweep", "--axis", "m=1,5", "--axis", "D=0,1", "--alpha", "0.01"],
        ["subset-sim"],
    ],
)
def test_rerun_reproduces_outputs(tmp_path, config, argv):
    first, second = tmp_path / "first", tmp_path / "second"
    assert main([argv[0], "--config", str(config), "--out", str(first), *argv[1:]]) == 0
    assert main(["rerun", "--manifest", str(first / "manifest.json"), "--out", str(second)]) == 0
    assert outputs(first) == outputs(second)


def test_rerun_bad_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    assert main(["rerun", "--manifest", str(bad), "--out", str(tmp_path / "o")]) == 2
