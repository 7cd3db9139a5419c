import csv
import io
import json

import jsonschema
import pytest

from dfsnet import cli
from dfsnet import network as nw

CP3 = {"n_nodes": 3, "protocol": {"op": "cpz", "participants": [0, 1, 2]}}
TOFFOLI = {"n_nodes": 3, "protocol": {"op": "toffoli", "participants": [0, 1, 2]}}


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def call_json(*argv):
    code, out, err = call(*argv)
    assert code == 0, err
    result = json.loads(out)
    jsonschema.validate(result, cli.RESULT_SCHEMA)
    return result


def test_simulate_cp3_exact(tmp_path):
    r = call_json("simulate", "--config", write(tmp_path, CP3))
    assert r["mode"] == "exact"
    assert r["probabilities"]["Dv"] == pytest.approx(0.5, abs=1e-12)
    assert r["fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_simulate_toffoli_readout(tmp_path):
    r = call_json("simulate", "--config", write(tmp_path, {**TOFFOLI, "input": {"basis": "110"}}))
    assert r["readout"]["2"]["1"] == pytest.approx(1.0, abs=1e-12)
    assert r["fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_simulate_sampled_needs_seed(tmp_path):
    path = write(tmp_path, CP3)
    code, out, err = call("simulate", "--config", path, "--sampled")
    assert code == 2 and out == "" and "seed" in err
    r = call_json("simulate", "--config", path, "--sampled", "--seed", "7")
    assert r["herald"]["success"]
    assert r["fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_sampled_runs_are_reproducible(tmp_path):
    path = write(tmp_path, {**TOFFOLI, "noise": {"loss_per_element": 0.01}})
    a = call("simulate", "--config", path, "--sampled", "--seed", "3")
    b = call("simulate", "--config", path, "--sampled", "--seed", "3")
    assert a == b


def test_noisy_exact_runs_monte_carlo(tmp_path):
    data = {**CP3, "noise": {"dephasing_sigma": 0.5}, "trials": 50, "seed": 1}
    r = call_json("simulate", "--config", write(tmp_path, data))
    assert r["monte_carlo"]["fidelity_mean"] == pytest.approx(1.0, abs=1e-12)
    unseeded = {k: v for k, v in data.items() if k != "seed"}
    code, _, err = call("simulate", "--config", write(tmp_path, unseeded))
    assert code == 2 and "seed" in err


def test_malformed_json_reports_location(tmp_path):
    code, out, err = call("simulate", "--config", write(tmp_path, '{"n_nodes": 3,\n  "protocol": }'))
    assert code == 2 and out == ""
    assert "line 2" in err and "column" in err


def test_schema_violation_names_path(tmp_path):
    code, _, err = call("simulate", "--config", write(tmp_path, {**CP3, "noise": {"loss_per_element": 2}}))
    assert code == 2 and "/noise/loss_per_element" in err
    code, _, err = call("simulate", "--config", write(tmp_path, {"n_nodes": 3, "protocol": {"op": "cpz", "participants": [4]}}))
    assert code == 2
    code, _, err = call("simulate", "--config", write(tmp_path, {**TOFFOLI, "protocol": {"op": "toffoli", "participants": [0, 1]}}))
    assert code == 2


def test_missing_config_file(tmp_path):
    code, _, err = call("simulate", "--config", str(tmp_path / "absent.json"))
    assert code == 2 and "absent.json" in err


def test_bad_invocation():
    assert call("simulate")[0] == 2
    assert call("frobnicate")[0] == 2


def test_physics_error_exit(tmp_path):
    # nonzero scattering error with the lossless combiner makes two paths meet
    data = {**CP3, "mode": "sampled", "seed": 1, "noise": {"scattering_phase_error": 0.3}}
    code, out, err = call("simulate", "--config", write(tmp_path, data))
    assert code == 3 and out == "" and "CollisionError" in err


def test_entry_outside_participants(tmp_path):
    data = {"n_nodes": 3, "protocol": {"op": "cpz", "participants": [0, 2], "entry": 1}}
    code, _, err = call("validate", "--config", write(tmp_path, data))
    assert code == 2 and "entry" in err


def test_truth_table_toffoli(tmp_path):
    r = call_json("truth-table", "--config", write(tmp_path, TOFFOLI), "--format", "json")
    mapping = {row["input"]: row["output"] for row in r["rows"]}
    assert mapping == {f"{m:03b}": f"{m:03b}" for m in range(6)} | {"110": "111", "111": "110"}
    assert all(row["p_dv"] == pytest.approx(0.5) for row in r["rows"])


def test_truth_table_cpz_signs_csv(tmp_path):
    code, out, _ = call("truth-table", "--config", write(tmp_path, CP3))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["sign"]) for r in rows] == [1] * 7 + [-1]
    skip = {"n_nodes": 3, "protocol": {"op": "cpz", "participants": [0, 2]}}
    code, out, _ = call("truth-table", "--config", write(tmp_path, skip))
    assert [int(r["sign"]) for r in csv.DictReader(io.StringIO(out))] == [1, 1, 1, -1]


def test_sweep_dephasing_dfs_is_flat(tmp_path):
    path = write(tmp_path, {**CP3, "seed": 2, "trials": 50})
    code, out, _ = call("sweep", "--config", path, "--param", "dephasing_sigma", "--values", "0,0.5,1.0")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == list(cli.nz.SWEEP_COLUMNS)
    assert all(float(r["fidelity_mean"]) == pytest.approx(1.0, abs=1e-12) for r in rows)


def test_sweep_loss_success_column(tmp_path):
    path = write(tmp_path, {**CP3, "seed": 2, "trials": 5, "sweep": {"parameter": "loss_per_element", "values": [0, 0.01]}})
    r = call_json("sweep", "--config", path, "--format", "json")
    p0, p1 = (row["success_prob"] for row in r["rows"])
    assert p0 == pytest.approx(0.5)
    g = nw.build_ring_network(3)
    (t,) = nw.arrival_ticks(g, nw.compile_schedule(g, [0, 1, 2]), "Dv")
    assert p1 == pytest.approx(0.5 * 0.99**t, rel=1e-9)
    assert r["rows"][1]["fidelity_mean"] == pytest.approx(1.0, abs=1e-12)


def test_sweep_errors(tmp_path):
    path = write(tmp_path, {**CP3, "seed": 1})
    assert call("sweep", "--config", path)[0] == 2
    assert call("sweep", "--config", path, "--param", "colour", "--values", "1")[0] == 2
    assert call("sweep", "--config", path, "--param", "dark_rate", "--values", "a,b")[0] == 2


def test_timing_defaults():
    r = call_json("timing")
    d = r["durations"]
    assert d["CPF"] == pytest.approx(3.98e-6, rel=1e-3)
    assert d["Hadamard"] == pytest.approx(7.96e-6, rel=1e-3)
    assert [round(d[f"CP{n}"] * 1e6, 1) for n in (3, 4, 5)] == [11.9, 15.9, 19.9]
    assert r["warnings"] == []


def test_timing_scaling_and_warning():
    r = call_json("timing", "--kappa-T", "10")
    assert r["durations"]["CPF"] == pytest.approx(3.98e-7, rel=1e-3)
    assert r["warnings"] == []
    code, out, err = call("timing", "--kappa-T", "1", "--format", "csv")
    assert code == 0 and "kappa*T" in err
    assert out.splitlines()[0] == "quantity,seconds"
    assert call("timing", "--kappa-T", "-1")[0] == 2


def test_validate(tmp_path):
    r = call_json("validate", "--config", write(tmp_path, CP3))
    assert r["valid"] and r["equal_arrival"] == []


def test_oracle_check():
    r = call_json("oracle-check", "--n-nodes", "2")
    assert r["ok"] and r["cases"] == 5
    assert r["max_deviation"] < 1e-10
    assert call("oracle-check", "--n-nodes", "9")[0] == 2


def test_oracle_check_single_scenario(tmp_path):
    r = call_json("oracle-check", "--config", write(tmp_path, CP3), "--show-maps")
    assert r["cases"] == 1 and len(r["maps"]) == 1


def test_out_path(tmp_path):
    target = tmp_path / "result.json"
    code, out, _ = call("simulate", "--config", write(tmp_path, CP3), "--out", str(target))
    assert code == 0 and out == ""
    jsonschema.validate(json.loads(target.read_text()), cli.RESULT_SCHEMA)


def test_version():
    assert call("--version")[0] == 0
