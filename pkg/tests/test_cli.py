"""``gw-electric`` command line: subcommands, overrides and exit codes."""

import json
import subprocess
import sys

import pytest

from gw_electric.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


LAWS_DET_UNIFORM = {"seed": 1, "offspring": {"deterministic": 2}, "resistance": {"family": "uniform", "a": 0.5, "b": 1.5}}
TREE_CFG = {
    "seed": 4,
    "offspring": {"support": [1, 2], "probs": [0.5, 0.5]},
    "resistance": {"family": "point-mass", "value": 1.0},
    "tree": {"depths": [2, 5], "trees": 10},
    "pool": {"size": 1000, "replicates": 4, "n_max": 20, "fit": [5, 20], "c0_cutoff": 10, "lambda": 2.0},
}


def test_constants_table_and_json(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", LAWS_DET_UNIFORM)
    assert main(["constants", "--config", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    assert "c1" in out and "deterministic_check" in out
    assert main(["constants", "--config", cfg, "--json", "--out", str(tmp_path / "o")]) == EXIT_OK
    table = json.loads(capsys.readouterr().out)
    assert table["c1"] == pytest.approx(1.0) and table["c2"] == pytest.approx(1.0)
    assert table["c3"] == pytest.approx(0.0, abs=1e-15) and table["c4"] == pytest.approx(-1 / 12)
    assert len(list((tmp_path / "o").glob("constants-*.json"))) == 1


def test_constants_one_two(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {**TREE_CFG})
    assert main(["constants", "--config", cfg, "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["c1"] == pytest.approx(4 / 3)


def test_malformed_pmf_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {**LAWS_DET_UNIFORM, "offspring": {"support": [1, 2], "probs": [0.5, 0.6]}})
    assert main(["constants", "--config", cfg]) == EXIT_CONFIG
    assert "InvalidPmf" in capsys.readouterr().err


def test_bad_json_reports_position(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", '{"seed": 1,\n  "offspring": }')
    assert main(["simulate-tree", "--config", cfg]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_unknown_flag_and_inapplicable_override(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", TREE_CFG)
    with pytest.raises(SystemExit) as exc:
        main(["simulate-tree", "--config", cfg, "--colour", "red"])
    assert exc.value.code == EXIT_CONFIG
    assert main(["pool", "--config", cfg, "--depths", "1:3"]) == EXIT_CONFIG
    assert "--depths does not apply" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["simulate-tree", "--config", cfg, "--seed", "-3"])
    assert exc.value.code == EXIT_CONFIG


def test_budget_exit_code(tmp_path):
    cfg = write(tmp_path, "c.json", {**TREE_CFG, "pool": {"size": 10**6, "replicates": 4, "n_max": 100, "budget": 1e6}})
    assert main(["pool", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_BUDGET
    big = {**TREE_CFG, "tree": {"depths": [60], "trees": 1}}
    assert main(["simulate-tree", "--config", write(tmp_path, "d.json", big), "--out", str(tmp_path)]) == EXIT_BUDGET


@pytest.mark.parametrize("command", ["simulate-tree", "pool", "fit-expansion", "lambda"])
def test_run_subcommands_write_results(tmp_path, capsys, command):
    cfg = write(tmp_path, "c.json", TREE_CFG)
    out = tmp_path / "out"
    assert main([command, "--config", cfg, "--out", str(out), "--seed", "7"]) == EXIT_OK
    (run,) = list(out.iterdir())
    rec = json.loads((run / "result.json").read_text())
    assert rec["provenance"]["seed"] == 7
    assert (run / "result.csv").read_text().startswith("run_id,mode,n,observable,statistic,value\n")
    # rerunning the same command is idempotent
    assert main([command, "--config", cfg, "--out", str(out), "--seed", "7"]) == EXIT_OK
    assert len(list(out.iterdir())) == 1


def test_overrides_change_the_run(tmp_path):
    cfg = write(tmp_path, "c.json", TREE_CFG)
    out = tmp_path / "out"
    assert main(["simulate-tree", "--config", cfg, "--out", str(out), "--depths", "1:3", "--trees", "5"]) == EXIT_OK
    (run,) = list(out.iterdir())
    conf = json.loads((run / "config.json").read_text())
    assert conf["tree"] == {"depths": [1, 2, 3], "trees": 5}


def test_fit_expansion_needs_fit_range(tmp_path):
    pool = {k: v for k, v in TREE_CFG["pool"].items() if k != "fit"}
    cfg = write(tmp_path, "c.json", {**TREE_CFG, "pool": pool})
    assert main(["fit-expansion", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_oracle_check_network(tmp_path, capsys):
    net = write(tmp_path, "net.txt", "# source: 0\n0 1 2\n0 2 2\n")
    assert main(["oracle-check", "--network", net, "--trials", "20000", "--seed", "3"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["laplacian_resistance"] == pytest.approx(1.0)
    assert out["series_parallel_resistance"] == pytest.approx(1.0)
    assert out["walk_conductance"] == pytest.approx(1.0)
    cyc = write(tmp_path, "cyc.txt", "0 1 1\n1 2 1\n2 0 1\n# sinks: 2\n")
    assert main(["oracle-check", "--network", cyc, "--trials", "20000"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["series_parallel_resistance"] is None
    assert out["laplacian_resistance"] == pytest.approx(2 / 3)
    bad = write(tmp_path, "bad.txt", "0 1\n")
    assert main(["oracle-check", "--network", bad]) == EXIT_CONFIG


def test_report_missing_run(tmp_path, capsys):
    assert main(["report", "nope", "--runs-dir", str(tmp_path), "--out", str(tmp_path / "r")]) == EXIT_FAIL
    assert "MissingRun" in capsys.readouterr().err


def test_console_script_runs():
    res = subprocess.run(
        [sys.executable, "-m", "gw_electric.cli", "--help"], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0 and "simulate-tree" in res.stdout


@pytest.mark.parametrize("command", ["pool", "lambda"])
def test_pool_only_config_uses_subcommand_mode(tmp_path, command):
    # the subcommand's mode must be applied before validation, so no tree section is needed
    cfg = write(tmp_path, "c.json", {k: v for k, v in TREE_CFG.items() if k != "tree"})
    assert main([command, "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
