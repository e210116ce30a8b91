import csv
import io
import json
import subprocess
import sys

import pytest

from invpress import cli
from invpress.errors import InputError

from conftest import data_path, load_doc


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_pendulum(capsys):
    code, out, _ = run(["analyze", data_path("pendulum.json")], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["schema_version"] == 1
    assert [e["re"] for e in doc["eigenvalues"]] == pytest.approx([-1.0, 1.0], abs=1e-14)
    assert doc["kalman_rank"] == 2 and doc["hyperbolic"]


def test_analyze_zero_A_and_scalar(capsys):
    _, out, _ = run(["analyze", data_path("zero_A.json")], capsys)
    assert json.loads(out)["hyperbolic"] is False
    _, out, _ = run(["analyze", data_path("scalar.json"), "--format", "text"], capsys)
    assert "eigenvalues    1" in out


def test_controlset(capsys):
    _, out, _ = run(["controlset", data_path("scalar.json")], capsys)
    doc = json.loads(out)
    assert doc["exact"] and doc["region"]["box"]["lo"] == [-1.0] and doc["region"]["box"]["hi"] == [1.0]
    _, out, _ = run(["controlset", data_path("pendulum_diag.json")], capsys)
    assert json.loads(out)["region"]["box"]["hi"] == [0.5, 0.5]
    code, _, err = run(["controlset", data_path("zero_A.json")], capsys)
    assert code == 3 and "non_hyperbolic" in err


def test_pressure(capsys):
    for name in ("scalar.json", "pendulum.json"):
        _, out, _ = run(["pressure", data_path(name)], capsys)
        assert json.loads(out)["value"] == 1.0
    _, out, _ = run(["pressure", data_path("pendulum.json"), "--entropy"], capsys)
    assert json.loads(out)["value"] == 1.0
    code, _, err = run(["pressure", data_path("boundary_argmin.json")], capsys)
    assert code == 3 and "argmin_on_boundary" in err


def test_input_errors(capsys, tmp_path):
    assert run(["analyze", data_path("unknown_key.json")], capsys)[0] == 2
    assert run(["analyze", str(tmp_path / "missing.json")], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["analyze", str(bad)], capsys)[0] == 2
    doc = load_doc("scalar.json")
    doc["K"] = {"box": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]}}
    with pytest.raises(InputError):
        cli.parse_system_file(doc)
    assert run(["estimate", data_path("pendulum_diag.json"), "--mode", "oracle-exact"], capsys)[0] == 2
    assert run(["estimate", data_path("scalar.json"), "--tau-grid", "1,-2"], capsys)[0] == 2


def test_estimate_csv_schema(capsys):
    code, out, _ = run(["estimate", data_path("scalar.json"), "--mode", "oracle-exact"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert ",".join(rows[0]) == "tau,value,kind,dt,alphabet_size,grid_points,contained"
    assert len(rows) == 5 and all(r[2] == "oracle_exact" for r in rows[1:])


def test_estimate_greedy_dominates_exact(capsys):
    _, ex, _ = run(["estimate", data_path("scalar.json"), "--mode", "oracle-exact"], capsys)
    _, gr, _ = run(["estimate", data_path("scalar.json"), "--mode", "oracle-greedy"], capsys)
    ex_vals = [float(r["value"]) for r in csv.DictReader(io.StringIO(ex))]
    gr_vals = [float(r["value"]) for r in csv.DictReader(io.StringIO(gr))]
    assert all(g >= e for g, e in zip(gr_vals, ex_vals))


def test_estimate_span_series(capsys, tmp_path):
    out_file = tmp_path / "span.csv"
    code, out, _ = run(["estimate", data_path("scalar.json"), "--mode", "span", "--tau-grid", "2,5,10,20", "--out", str(out_file)], capsys)
    assert code == 0 and out == ""
    rows = list(csv.DictReader(out_file.open()))
    vals = [float(r["value"]) for r in rows]
    assert [float(r["tau"]) for r in rows] == [2.0, 5.0, 10.0, 20.0]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert 1.0 <= vals[-1] <= 1.35
    assert all(r["contained"] == "true" for r in rows)


def test_estimate_is_deterministic(capsys):
    a = run(["estimate", data_path("pendulum.json"), "--mode", "span", "--tau-grid", "2,4"], capsys)[1]
    b = run(["estimate", data_path("pendulum.json"), "--mode", "span", "--tau-grid", "2,4"], capsys)[1]
    assert a == b


def test_verify_exit_codes(capsys, tmp_path):
    out = tmp_path / "r1.json"
    assert cli.main(["verify", "--seed", "3", "--cases", "3", "--no-meta", "--out", str(out)]) == 0
    out2 = tmp_path / "r2.json"
    cli.main(["verify", "--seed", "3", "--cases", "3", "--no-meta", "--out", str(out2)])
    assert out.read_bytes() == out2.read_bytes()
    assert json.loads(out.read_text())["schema_version"] == 1
    code = cli.main(["verify", "--seed", "3", "--cases", "2", "--inject-fault", "oracle_bracket"])
    assert code == 1


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "invpress.cli", "pressure", data_path("scalar.json")], capture_output=True, text=True
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == 1.0
