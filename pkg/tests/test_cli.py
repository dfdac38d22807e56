import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cotred.cli import main, parse_range


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def values(text):
    return {k.strip(): v.strip() for k, v in (line.split("=", 1) for line in text.splitlines() if "=" in line)}


def test_equilibrium_three_body():
    code, text = run("equilibrium", "--system", "three-body", "--masses", "1,1,1", "--d0", "6", "--b", "6.5")
    assert code == 0
    v = values(text)
    assert v["r"] == "19.83021799" and v["p_phi"] == "9.915108993" and v["elliptic"] == "true"


def test_equilibrium_pendulum(tmp_path):
    out = tmp_path / "eq.json"
    code, text = run("equilibrium", "--system", "pendulum", "--r", "1", "--output", str(out))
    assert code == 0 and values(text)["r1"] == "0.4425598655"
    rec = json.loads(out.read_text())
    assert rec["point"]["p_phi"] == pytest.approx(0.4704091824, abs=1e-9)


def test_usage_errors(capsys):
    assert run("equilibrium", "--b", "-1")[0] == 2
    assert run("normalform", "--system", "pendulum", "--order", "3")[0] == 2
    assert run("normalform", "--system", "pendulum", "--tol-res", "0")[0] == 2
    assert run("sweep", "--system", "three-body")[0] == 2
    assert run("sweep", "--b", "5:9:0")[0] == 2
    assert run("integrate", "--system", "pendulum", "--dt", "0")[0] == 2
    assert run("integrate", "--system", "pendulum", "--reconstruct", "--T", "1")[0] == 2
    assert run("equilibrium", "--system", "three-body", "--masses", "1,1")[0] == 2
    with pytest.raises(SystemExit) as info:
        run("equilibrium", "--system", "four-body")
    assert info.value.code == 2
    assert "error" in capsys.readouterr().err


def test_numerical_failure(capsys):
    assert run("equilibrium", "--b", "5")[0] == 1
    assert "no relative equilibrium" in capsys.readouterr().err
    assert run("normalform", "--b", "6.5", "--resonances", "error")[0] == 1
    err = capsys.readouterr().err
    assert "m = (-1, -2, 1, 0)" in err or "m = (1, 2, -1, 0)" in err


def test_normalform_tables(tmp_path, capsys):
    out = tmp_path / "nf.json"
    code, text = run("normalform", "--b", "6.5", "--output", str(out))
    assert code == 0
    assert "E0 = 2.118153127" in text
    assert "I1 I4 : -7.722189416" in text
    assert "resonant terms kept for m = (1, 2, -1, 0)" in capsys.readouterr().err
    rec = json.loads(out.read_text())
    assert rec["order"] == 4 and len(rec["M"]) == 64 and rec["resonance_margin"] < 1e-12
    code, text = run("normalform", "--system", "pendulum", "--order", "2")
    lines = [x for x in text.splitlines() if ":" in x]
    assert code == 0 and len(lines) == 3 and all("^" not in x and x.count("I") == 1 for x in lines)


def test_sweeps(tmp_path):
    code, text = run("sweep", "--system", "three-body", "--b", "5:7:0.5")
    rows = text.strip().splitlines()
    assert code == 0 and rows[0] == "param,r,energy,omega_1,omega_2,omega_3,omega_4,converged"
    assert len(rows) == 6 and rows[1].endswith(",0") and rows[-1].endswith(",1")
    code, text = run("sweep", "--system", "pendulum", "--r", "3:1:0.5")
    assert code == 0 and text == "param,r,energy,omega_1,omega_2,omega_3,converged\n"
    out = tmp_path / "s.csv"
    assert run("sweep", "--system", "pendulum", "--r", "0.5:1:0.25", "--jobs", "2", "--output", str(out))[0] == 0
    assert len(out.read_text().splitlines()) == 4


def test_parse_range():
    assert parse_range("5:9:0.05")[-1] == 9.0 and len(parse_range("5:9:0.05")) == 81
    assert parse_range("1.5") == [1.5]
    assert parse_range("2:1:1") == []


def test_integrate_equilibrium_rows_constant(tmp_path):
    out = tmp_path / "t.csv"
    code, _ = run("integrate", "--system", "pendulum", "--r", "1", "--dt", "0.01", "--T", "1", "--output", str(out))
    assert code == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (101, 8)
    assert np.max(np.abs(data[:, 1:] - data[0, 1:])) < 1e-12


def test_integrate_reconstruct_columns(capsys):
    code, text = run("integrate", "--b", "6.5", "--dt", "0.01", "--T", "0.5", "--mode", "2", "--amplitude", "0.01",
                     "--reconstruct")
    assert code == 0
    header = text.splitlines()[0].split(",")
    assert header[:9] == ["t", "r1", "r2", "phi", "p_r1", "p_r2", "p_phi", "u", "v"]
    assert header[9] == "energy" and header[10:] == [f"g{i}{j}" for i in range(3) for j in range(3)]
    assert "energy drift" in capsys.readouterr().err
    assert run("integrate", "--b", "6.5", "--mode", "9", "--T", "0.1")[0] == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": "pendulum", "r": 2.0}))
    a = values(run("equilibrium", "--config", str(cfg))[1])
    assert a["r"] == "2"
    b = values(run("equilibrium", "--config", str(cfg), "--r", "1")[1])
    assert b["r1"] == "0.4425598655"
    cfg.write_text(json.dumps({"system": "pendulum", "colour": 1}))
    assert run("equilibrium", "--config", str(cfg))[0] == 2
    assert run("equilibrium", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_deterministic_output(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        run("normalform", "--system", "pendulum", "--output", str(p))
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cotred", "equilibrium", "--b", "-1"], capture_output=True,
                          text=True)
    assert proc.returncode == 2
