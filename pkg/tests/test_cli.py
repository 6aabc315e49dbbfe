import json
import subprocess
import sys

import numpy as np
import pytest

from carpnet.cli import main
from conftest import ROOT

TOY = ROOT / "data" / "toy"


def toy_args(*extra, out):
    return [
        "--risks", str(TOY / "risks.csv"),
        "--pairs", str(TOY / "pairs.csv"),
        "--scale", "5",
        *extra,
        "--out", str(out),
    ]


def read(path):
    return path.read_bytes()


def run_cli(argv):
    return main([str(a) for a in argv])


# --- happy paths ----------------------------------------------------------

def test_fit_writes_parameters_and_manifest(tmp_path):
    code = run_cli(["fit", *toy_args("--history", TOY / "history.csv", out=tmp_path / "f")])
    assert code == 0
    payload = json.loads((tmp_path / "f" / "fit.json").read_text())
    assert set(payload) >= {"alpha", "beta", "gamma", "loglik", "converged"}
    assert payload["converged"] is True
    manifest = json.loads((tmp_path / "f" / "manifest.json").read_text())
    assert manifest["command"] == "fit"
    assert manifest["tool"] == "carpnet"
    assert sorted(manifest["outputs"]) == ["fit.json"]
    assert set(manifest["inputs"]) == {"risks", "pairs", "history"}
    for role in manifest["inputs"].values():
        assert len(role["sha256"]) == 64


def test_steady_state_artifacts(tmp_path):
    code = run_cli(["steady-state", *toy_args("--params", "0.4,0.3,1.2", out=tmp_path / "s")])
    assert code == 0
    rows = (tmp_path / "s" / "steady_state.csv").read_text().splitlines()
    assert rows[0] == "risk_id,p_hat"
    assert len(rows) == 7  # header + six risks
    conv = json.loads((tmp_path / "s" / "convergence.json").read_text())
    assert conv["converged"] is True and conv["residual"] <= 1e-12


def test_simulate_reruns_are_byte_identical(tmp_path):
    args = ["simulate", *toy_args("--params", "0.4,0.3,1.2", "--seed", "11",
                                  "--runs", "60", "--horizon", "200", out=tmp_path / "a")]
    assert run_cli(args) == 0
    args2 = [a.replace(str(tmp_path / "a"), str(tmp_path / "b")) for a in map(str, args)]
    assert run_cli(args2) == 0
    for name in ("trajectory.csv", "statistics.csv", "manifest.json"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_simulate_jobs_do_not_change_output(tmp_path):
    base = ["simulate", *toy_args("--params", "0.4,0.3,1.2", "--seed", "11",
                                  "--runs", "60", "--horizon", "200", out=tmp_path / "a")]
    assert run_cli(base) == 0
    multi = ["simulate", *toy_args("--params", "0.4,0.3,1.2", "--seed", "11",
                                   "--runs", "60", "--horizon", "200", "--jobs", "3",
                                   out=tmp_path / "b")]
    assert run_cli(multi) == 0
    for name in ("trajectory.csv", "statistics.csv", "manifest.json"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_stats_is_deterministic(tmp_path):
    assert run_cli(["stats", *toy_args(out=tmp_path / "a")]) == 0
    assert run_cli(["stats", *toy_args(out=tmp_path / "b")]) == 0
    assert read(tmp_path / "a" / "network_stats.json") == read(tmp_path / "b" / "network_stats.json")
    payload = json.loads((tmp_path / "a" / "network_stats.json").read_text())
    assert payload["node_count"] == 6 and payload["edge_count"] == 7


def test_influence_excludes_self_influence(tmp_path):
    assert run_cli(["influence", *toy_args("--params", "0.4,0.3,1.2", out=tmp_path / "i")]) == 0
    rows = (tmp_path / "i" / "influence.csv").read_text().splitlines()
    assert rows[0] == "source_id,target_id,influence"
    assert len(rows) == 1 + 6 * 5
    assert all(r.split(",")[0] != r.split(",")[1] for r in rows[1:])
    cat = (tmp_path / "i" / "category_influence.csv").read_text().splitlines()
    assert cat[0] == "source_cat,target_cat,raw,normalized,log_scaled"


def test_pipeline_chains_fit_steady_influence(tmp_path):
    code = run_cli(["pipeline", *toy_args("--history", TOY / "history.csv", out=tmp_path / "p")])
    assert code == 0
    names = {p.name for p in (tmp_path / "p").iterdir()}
    assert {"fit.json", "steady_state.csv", "influence.csv", "manifest.json"} <= names


@pytest.mark.parametrize("experiment", ["recovery", "forward", "network-effect", "sensitivity"])
def test_validate_experiments_run(tmp_path, experiment):
    code = run_cli([
        "validate", "--experiment", experiment,
        *toy_args("--history", TOY / "history.csv", "--params", "0.4,0.3,1.2",
                  "--seed", "5", "--replicates", "6", "--runs", "20", out=tmp_path / "v"),
    ])
    assert code == 0
    names = {p.name for p in (tmp_path / "v").iterdir()}
    stem = experiment.replace("-", "_")
    assert any(n.startswith(stem) and n.endswith(".json") for n in names)
    assert "manifest.json" in names


def test_validate_recovery_rerun_identical(tmp_path):
    argv = ["validate", "--experiment", "recovery",
            *toy_args("--history", TOY / "history.csv", "--params", "0.4,0.3,1.2",
                      "--seed", "5", "--replicates", "6", out=tmp_path / "a")]
    assert run_cli(argv) == 0
    argv2 = [str(a).replace(str(tmp_path / "a"), str(tmp_path / "b")) for a in argv]
    assert run_cli(argv2) == 0
    assert read(tmp_path / "a" / "recovery_replicates.csv") == read(tmp_path / "b" / "recovery_replicates.csv")


# --- config files ---------------------------------------------------------

def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# toy defaults\n"
        f"risks = {TOY / 'risks.csv'}\n"
        f"pairs = {TOY / 'pairs.csv'}\n"
        "params = 0.4,0.3,1.2\n"
        "scale = 5\n"
        "runs = 60\n"
        "horizon = 200\n"
    )
    assert run_cli(["simulate", "--config", cfg, "--seed", "11", "--out", tmp_path / "a"]) == 0
    direct = ["simulate", *toy_args("--params", "0.4,0.3,1.2", "--seed", "11",
                                    "--runs", "60", "--horizon", "200", out=tmp_path / "b")]
    assert run_cli(direct) == 0
    assert read(tmp_path / "a" / "trajectory.csv") == read(tmp_path / "b" / "trajectory.csv")


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"risks = {TOY / 'risks.csv'}\n"
        f"pairs = {TOY / 'pairs.csv'}\n"
        "params = 0.4,0.3,1.2\n"
        "scale = 5\n"
        "runs = 60\n"
    )
    assert run_cli(["simulate", "--config", cfg, "--seed", "11", "--runs", "10",
                    "--horizon", "50", "--out", tmp_path / "a"]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["runs"] == 10


def test_unknown_config_key_is_a_usage_error(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("wibble = 3\n")
    code = run_cli(["simulate", "--config", cfg, "--seed", "1", "--out", tmp_path / "x"])
    assert code == 1
    assert "wibble" in capsys.readouterr().err


def test_config_value_must_respect_choices(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment = bogus\n")
    code = run_cli(["validate", "--config", cfg, "--seed", "1", "--out", tmp_path / "x"])
    assert code == 1
    assert "bogus" in capsys.readouterr().err


# --- failure modes --------------------------------------------------------

def test_stochastic_commands_demand_a_seed(tmp_path, capsys):
    code = run_cli(["simulate", *toy_args("--params", "0.4,0.3,1.2", out=tmp_path / "x")])
    assert code == 1
    assert "--seed" in capsys.readouterr().err


def test_missing_input_file_is_a_data_error(tmp_path):
    code = run_cli([
        "fit", "--risks", tmp_path / "ghost.csv", "--pairs", TOY / "pairs.csv",
        "--history", TOY / "history.csv", "--out", tmp_path / "x",
    ])
    assert code == 2


def test_out_of_scale_likelihood_is_a_data_error(tmp_path):
    code = run_cli([
        "simulate", "--risks", TOY / "risks.csv", "--pairs", TOY / "pairs.csv",
        "--scale", "1.5", "--params", "0.4,0.3,1.2", "--seed", "1",
        "--out", tmp_path / "x",
    ])
    assert code == 2


def test_non_convergence_is_a_numerical_error(tmp_path):
    code = run_cli(["steady-state", *toy_args("--params", "0.4,0.3,1.2",
                                              "--max-iter", "2", out=tmp_path / "x")])
    assert code == 3


def test_params_and_params_file_conflict(tmp_path):
    fitfile = tmp_path / "p.json"
    fitfile.write_text('{"alpha": 0.4, "beta": 0.3, "gamma": 1.2}')
    code = run_cli(["steady-state", *toy_args("--params", "0.4,0.3,1.2",
                                              "--params-file", fitfile, out=tmp_path / "x")])
    assert code == 1


def test_malformed_params_string(tmp_path):
    code = run_cli(["simulate", *toy_args("--params", "1,2", "--seed", "1", out=tmp_path / "x")])
    assert code == 1


# --- manifest round-trip --------------------------------------------------

def rebuild_argv(manifest, out):
    """Reconstruct the equivalent command line from a manifest."""
    argv = [manifest["command"]]
    for key, value in manifest["config"].items():
        if value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if key == "params" and isinstance(value, list):
            argv += [flag, ",".join(repr(v) for v in value)]
        elif isinstance(value, list):
            argv += [flag, ",".join(str(v) for v in value)]
        else:
            argv += [flag, str(value)]
    argv += ["--out", str(out)]
    return argv


def test_manifest_round_trip_reproduces_artifacts(tmp_path):
    first = tmp_path / "a"
    assert run_cli(["simulate", *toy_args("--params", "0.4,0.3,1.2", "--seed", "11",
                                          "--runs", "40", "--horizon", "120", out=first)]) == 0
    manifest = json.loads((first / "manifest.json").read_text())
    second = tmp_path / "b"
    assert run_cli(rebuild_argv(manifest, second)) == 0
    first_files = sorted(p.name for p in first.iterdir())
    assert first_files == sorted(p.name for p in second.iterdir())
    for name in first_files:
        assert read(first / name) == read(second / name), name


def test_console_script_is_wired(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-c", "from carpnet.cli import entrypoint; entrypoint()", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
