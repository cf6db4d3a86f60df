import csv
import json

import pytest
import yaml

from qconv.cli import main
from qconv.experiments import ConfigError, config_from_dict, load_config, run
from qconv.states import load_state


def write_cfg(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def run_cli(tmp_path, experiment, doc, out="out", extra=()):
    cfg = write_cfg(tmp_path, doc)
    code = main([experiment, "--config", cfg, "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_clt_run_outputs(tmp_path):
    code, out = run_cli(tmp_path, "clt", {"d": 7, "trials": 3, "N": 4})
    assert code == 0
    res = json.loads((out / "results.json").read_text())
    assert res["schema_version"] == 1 and res["passed"]
    for a in res["assertions"].values():
        assert a["citation"] and a["min_margin"] >= -a["tol"]
    with open(out / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert list(rows[0])[:7] == ["trial", "N", "entropy", "relative_entropy", "bound", "trace_distance", "pinsker_bound"]
    assert all(float(r["log_relative_entropy"]) <= float(r["log_bound"]) for r in rows)
    assert "wall_clock_s" in json.loads((out / "timing.json").read_text())


def test_clt_qubit_and_stabilizer_fixtures(tmp_path):
    code, out = run_cli(tmp_path, "clt", {"d": 2, "fixture": "t_state", "N": 7})
    assert code == 0
    res = json.loads((out / "results.json").read_text())
    assert res["aggregates"]["trials"] == 1
    code, out = run_cli(tmp_path, "clt", {"d": 7, "fixture": "stabilizer", "trials": 3, "N": 3}, out="stab")
    assert code == 0
    res = json.loads((out / "results.json").read_text())
    assert res["aggregates"]["max_final_relative_entropy"] < 1e-12


def test_determinism(tmp_path):
    doc = {"d": 7, "trials": 4, "N": 4, "seed": 11}
    run_cli(tmp_path, "clt", doc, out="a")
    run_cli(tmp_path, "clt", doc, out="b")
    assert (tmp_path / "a/results.json").read_bytes() == (tmp_path / "b/results.json").read_bytes()
    assert (tmp_path / "a/trace.csv").read_bytes() == (tmp_path / "b/trace.csv").read_bytes()
    run_cli(tmp_path, "clt", doc, out="c", extra=("--seed", "12"))
    assert (tmp_path / "a/results.json").read_bytes() != (tmp_path / "c/results.json").read_bytes()


@pytest.mark.parametrize("experiment,doc", [
    ("doubling", {"d": 7, "trials": 3}),
    ("doubling", {"d": 7, "fixture": "stabilizer"}),
    ("doubling", {"d": 2, "fixture": "t_state"}),
    ("qist", {"d": 7, "rank": "pure", "trials": 5}),
    ("qist", {"d": 7, "trials": 2}),
    ("ruzsa", {"d": 7, "trials": 3}),
    ("ruzsa", {"d": 2, "trials": 3}),
    ("cssa-scan", {"d": 23, "trials": 2, "samples": {"stabilizer": 20, "diagonal": 5}}),
    ("triangle-scan", {"d": 7, "trials": 2, "samples": {"stabilizer": 20, "flat": 3}}),
    ("magic-measure", {"d": 2, "fixture": "t_state"}),
])
def test_subcommands_pass(tmp_path, experiment, doc):
    code, out = run_cli(tmp_path, experiment, doc)
    res = json.loads((out / "results.json").read_text())
    assert code == 0, res["failures"]
    assert res["experiment"] == experiment


def test_qist_scope_rule(tmp_path):
    _, out = run_cli(tmp_path, "qist", {"d": 7, "trials": 2})
    res = json.loads((out / "results.json").read_text())
    assert "qist" not in res["assertions"] and "bound" not in res["trials"][0]


def test_assertion_failure_exit_code_and_dumps(tmp_path):
    # the MSPS route disagrees with the direct route at d=7 (scaling by s = 2)
    code, out = run_cli(tmp_path, "magic-measure", {"d": 7, "trials": 2, "samples": {"channels": 1}})
    assert code == 2
    res = json.loads((out / "results.json").read_text())
    assert not res["assertions"]["mrz_routes"]["holds"]
    assert res["assertions"]["mrz_msps"]["holds"] and res["assertions"]["mrz_monotone"]["holds"]
    dumps = res["failure_dumps"]
    assert dumps and load_state(out / dumps[0]).shape.d == 7


@pytest.mark.parametrize("experiment,doc", [
    ("clt", {"d": 4}),
    ("clt", {"d": 7, "bogus": 1}),
    ("clt", {"d": 2, "N": 4}),
    ("clt", {"d": 5}),
    ("cssa-scan", {"d": 7}),
    ("triangle-scan", {"d": 13, "params": [2, 6]}),
    ("clt", {"d": 7, "params": [1, 1]}),
    ("clt", {"d": 7, "tolerances": {"nope": 1}}),
    ("clt", {"d": 7, "config_version": 9}),
    ("magic-measure", {"d": 7, "n": 2}),
])
def test_config_errors_exit_3(tmp_path, experiment, doc):
    code, _ = run_cli(tmp_path, experiment, doc)
    assert code == 3


def test_config_loading(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, {"experiment": "ruzsa"}), "clt")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"), "clt")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "list.yaml"), "clt")
    cfg = load_config(None, "clt", {"seed": 5})
    assert cfg.seed == 5 and cfg.d == 7


def test_params_command(tmp_path, capsys):
    assert main(["params", "--d", "7", "--out", str(tmp_path / "p")]) == 0
    res = json.loads((tmp_path / "p/results.json").read_text())
    assert res["params"]["values"] == {"s": 2, "t": 2}
    assert res["balanced"]["feasible"] and not res["triple"]["feasible"]
    res = run(config_from_dict({"d": 23}, "params"))
    assert res["triple"]["values"] == {"s": 9, "t": 9, "l": 4, "m": 13}
    for d in (2, 3, 5):
        res = run(config_from_dict({"d": d}, "params"))
        assert not res["params"]["feasible"] and res["params"]["searched"] == (d - 1) ** 2


def test_workers_do_not_change_results(tmp_path):
    doc = {"d": 7, "trials": 3, "N": 3}
    run_cli(tmp_path, "clt", doc, out="w1")
    run_cli(tmp_path, "clt", doc, out="w2", extra=("--workers", "2"))
    a = json.loads((tmp_path / "w1/results.json").read_text())
    b = json.loads((tmp_path / "w2/results.json").read_text())
    a["config"].pop("workers"), b["config"].pop("workers")
    assert a == b
    assert (tmp_path / "w1/trace.csv").read_bytes() == (tmp_path / "w2/trace.csv").read_bytes()
