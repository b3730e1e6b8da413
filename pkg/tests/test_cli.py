import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from loopspec import cli, probe
from loopspec.curve import circle, family_F, write_curve
from loopspec.errors import ValidationError

SMALL = {
    "e0": ["--family", "1,0.5"],
    "identity": ["--alpha", "1", "--beta", "0.5"],
    "eta": ["--alpha", "1", "--beta", "0.6"],
    "asymptotics": ["--betas", "0.5,0.1"],
    "collapsed": ["--alpha", "1", "--beta", "0.5", "--basis", "100"],
    "lemma4": ["--order", "2", "--mus", "1e-2,1e-3"],
    "gegenbauer": ["--g", "2", "--nmax", "1"],
    "probe": ["--seeds", "0-1", "--max-evals", "5", "--workers", "1"],
    "theorem1": ["--alpha", "1", "--beta", "0.7", "--mus", "0.01,0.02"],
}


def run(argv, capsys):
    code = cli.run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_e0_of_circle(capsys):
    code, out, _ = run(["e0", "--family", "1,1"], capsys)
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "e0,grid_size,kappa_max"
    assert row.split(",")[0] == "1.00000000000"


def test_e0_from_curve_file(tmp_path, capsys):
    p = tmp_path / "f.json"
    write_curve(family_F(1, 0.3), p, modes=60)
    code, out, _ = run(["e0", "--curve", str(p), "--format", "json"], capsys)
    assert code == 0 and json.loads(out)["e0"] == pytest.approx(1.0, abs=1e-7)


def test_identity_report(capsys):
    code, out, _ = run(["identity", "--alpha", "1", "--beta", "0.5", "--format", "json"], capsys)
    d = json.loads(out)
    assert code == 0 and d["relative_gap"] < 1e-8
    assert d["closed_form"]["I1"] == pytest.approx(d["I1"], rel=1e-6)


def test_gegenbauer_table(capsys):
    code, out, _ = run(["gegenbauer", "--g", "2", "--nmax", "3"], capsys)
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    assert code == 0 and [float(r[2]) for r in rows] == [4, 9, 16, 25]
    assert all(float(r[4]) < 1e-3 for r in rows)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_json_output_matches_published_schema(name, capsys):
    code, out, _ = run([name, *SMALL[name], "--format", "json"], capsys)
    assert code == 0
    jsonschema.Draft202012Validator.check_schema(cli.schema(name))
    jsonschema.validate(json.loads(out), cli.schema(name))


@pytest.mark.parametrize("name", ["e0", "probe", "theorem1"])
def test_repeated_runs_are_byte_identical(name, capsys):
    argv = [name, *SMALL[name]]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


def test_floats_have_twelve_significant_digits(capsys):
    _, out, _ = run(["identity", "--alpha", "1", "--beta", "0.5"], capsys)
    for cell in out.strip().splitlines()[1].split(",")[2:4]:
        assert len(cell.replace(".", "").lstrip("0").split("e")[0]) == 12


@pytest.mark.parametrize("argv", [
    ["e0"],
    ["e0", "--family", "1"],
    ["e0", "--family", "1,2"],
    ["identity", "--alpha", "1"],
    ["nosuch"],
    ["gegenbauer", "--g", "-1"],
    ["lemma4", "--order", "3"],
    ["lemma4", "--order", "1", "--x1", "__import__('os'),0,0"],
    ["probe", "--seeds", "a-b"],
    ["collapsed", "--alpha", "0.5", "--beta", "1"],
    ["e0", "--curve", "/nonexistent/path.json"],
])
def test_invalid_input_exits_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == "" and err.startswith("loopspec:")


def test_numerical_failure_exits_3(capsys):
    code, _, err = run(["eta", "--alpha", "1", "--beta", "0.01", "--mode-cutoff", "32"], capsys)
    assert code == 3 and "numerical" in err


def test_violation_exits_4_and_persists(tmp_path, monkeypatch, capsys):
    bad = probe.ProbeRecord(5, {}, 1.1, 0.8, [1.1, 0.8], 2, 1, "converged", circle(), 0.2, 0.5, 0.0)
    monkeypatch.setattr(probe, "run_probes", lambda *a, **k: [bad])
    monkeypatch.chdir(tmp_path)
    code, out, _ = run(["probe", "--seeds", "5", "--format", "json"], capsys)
    assert code == 4 and json.loads(out)["violation"] is True
    rec = json.loads((tmp_path / "loopspec_violations.jsonl").read_text())
    assert rec["seed"] == 5 and "reproduction" in rec


def test_probe_appends_jsonl(tmp_path, capsys):
    p = tmp_path / "p.jsonl"
    code, _, _ = run(["probe", "--seeds", "2,0", "--max-evals", "3", "--workers", "1",
                      "--jsonl", str(p)], capsys)
    assert code == 0
    assert [json.loads(x)["seed"] for x in p.read_text().splitlines()] == [0, 2]


def test_out_file_and_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nalpha = 1\nbeta=0.5  # axis\nformat=json\n")
    target = tmp_path / "o.json"
    code, out, _ = run(["identity", "--config", str(cfg), "--out", str(target)], capsys)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["beta"] == 0.5
    code, out, _ = run(["identity", "--config", str(cfg), "--beta", "0.25"], capsys)
    assert json.loads(out)["beta"] == 0.25
    cfg.write_text("alpha\n")
    assert run(["identity", "--config", str(cfg)], capsys)[0] == 2


def test_field_expressions():
    f = cli.field_expression("sin(s), cos(2*s)**2, -pi")
    s = np.linspace(0, 1, 5)
    assert np.allclose(f(s), np.stack([np.sin(s), np.cos(2 * s) ** 2, -np.pi + 0 * s], axis=1))
    for bad in ("s.real,0,0", "open('x'),0,0", "t,0,0", "lambda: 1,0,0", "s,0", "[s][0],0,0", "s +,0,0"):
        with pytest.raises(ValidationError):
            cli.field_expression(bad)


def test_seed_ranges():
    assert cli._seeds("0-3,7") == [0, 1, 2, 3, 7]


def test_unknown_schema():
    with pytest.raises(ValidationError):
        cli.schema("nosuch")


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "loopspec.cli", "e0", "--family", "1,1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("e0,")
