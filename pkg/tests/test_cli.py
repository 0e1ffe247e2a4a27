import csv
import json

import numpy as np
import pytest

from aronsson import __version__
from aronsson.cli import run
from aronsson.config import InputError, load_config, parse_field, parse_points, read_grid_csv


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_cone_csv_columns_and_manifest(tmp_path):
    out = tmp_path / "cone"
    assert run(["--out", str(out), "cone", "--k", "0.5,2", "--directions", "8"]) == 0
    rows = _rows(out / "cone.csv")
    assert rows[0] == ["k", "x1", "x2", "value", "p1", "p2", "kkt_residual"]
    assert len(rows) == 17
    assert float(rows[1][3]) == pytest.approx(1.0)  # sqrt(2 * 0.5)
    man = json.loads((out / "manifest.json").read_text())
    assert man["version"] == __version__ and man["exit_code"] == 0
    assert set(man["outputs"]) == {"cone.csv", "cone.json"}
    assert len(man["config_hash"]) == 64


def test_global_flags_after_subcommand(tmp_path):
    assert run(["cone", "--directions", "4", "--out", str(tmp_path / "a"), "--hamiltonian", "shifted:0.3"]) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["config"]["hamiltonian"]["spec"] == "shifted:0.3"


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ARONSSON_OUT", str(tmp_path / "env"))
    assert run(["cone", "--directions", "4"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_malformed_hamiltonian_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nseed = 1\n\n[hamiltonian]\nspec = anisotropic:1,2\n")
    assert run(["--config", str(cfg), "--out", str(tmp_path / "o"), "cone"]) == 2
    err = capsys.readouterr().err
    assert "bad.ini:5" in err and "[hamiltonian] spec" in err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[cone]\nk = 1\nbogus = 3\n")
    assert run(["--config", str(cfg), "--out", str(tmp_path / "o"), "cone"]) == 2
    assert "bad.ini:3" in capsys.readouterr().err


def test_bad_values_are_input_errors(tmp_path):
    out = ["--out", str(tmp_path / "o")]
    assert run(out + ["cone", "--k", "-1"]) == 2
    assert run(out + ["cone", "--directions", "many"]) == 2
    assert run(out + ["--threads", "0", "cone"]) == 2
    assert run(out + ["check", "--property", "nope"]) == 2
    assert run(out + ["slope", "--field", "cone"]) == 2


def test_harnack_negative_field_is_input_error(tmp_path):
    assert run(["--out", str(tmp_path / "h"), "check", "--property", "harnack", "--field", "plane:1,0"]) == 2


def test_check_exit_codes(tmp_path):
    base = ["check", "--samples", "180", "--interior", "32"]
    assert run(["--out", str(tmp_path / "a")] + base + ["--property", "cgca", "--field", "cone:1"]) == 0
    assert run(["--out", str(tmp_path / "b")] + base + ["--property", "cgcb", "--field", "paraboloid:1",
                                                       "--inner", "0"]) == 1
    rep = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rep["status"] == "violation" and len(rep["witness"]["point"]) == 2


def test_segment_check(tmp_path):
    args = ["check", "--property", "segment", "--field", "cone:1", "--inner", "0", "--pairs", "50"]
    assert run(["--out", str(tmp_path / "s")] + args + ["--level", "1"]) == 0
    assert json.loads((tmp_path / "s" / "report.json").read_text())["status"] == "pass"
    assert run(["--out", str(tmp_path / "t")] + args[:-2] + ["--inner", "0.5", "--pairs", "5"]) == 2


def test_slope_command(tmp_path):
    assert run(["--out", str(tmp_path), "slope", "--field", "cone:2", "--radii", "0.1,0.2"]) == 0
    rows = _rows(tmp_path / "slope.csv")
    assert rows[0] == ["r", "S_plus", "S_minus"]
    assert float(rows[1][1]) == pytest.approx(2.0, rel=1e-6)


def test_solve_classify_flow_pipeline(tmp_path):
    s = tmp_path / "solve"
    assert run(["--out", str(s), "solve", "--n", "33"]) == 0
    info = json.loads((s / "solve.json").read_text())
    assert info["status"] == "converged" and info["max_error"] < 0.05
    assert _rows(s / "grid.csv")[0] == ["x", "y", "u"]
    g = read_grid_csv(str(s / "grid.csv"))
    assert g.h == pytest.approx(1 / 16)
    f = tmp_path / "flow"
    assert run(["--out", str(f), "flow", "--field", f"grid:{s / 'grid.csv'}", "--start", "0.6,0.2",
                "--step", "0.01", "--arrival-radius", "0.25"]) == 0
    assert json.loads((f / "flow.json").read_text())["status"] == "arrived"
    c = tmp_path / "cls"
    assert run(["--out", str(c), "classify", "--field", "cone:2:3"]) == 0
    assert json.loads((c / "report.json").read_text())["verdict"] == "cone_plus"
    assert _rows(c / "ladder.csv")[0][0] == "scale"


def test_outputs_are_bit_identical_across_runs_and_threads(tmp_path):
    digests = []
    for i, threads in enumerate((1, 1, 4)):
        out = tmp_path / f"r{i}"
        assert run(["--out", str(out), "--threads", str(threads), "--seed", "7", "solve", "--n", "33",
                    "--hamiltonian", "anisotropic:2,0.6,1"]) == 0
        man = json.loads((out / "manifest.json").read_text())
        digests.append((man["outputs"], man["config_hash"]))
    assert digests[0] == digests[1] == digests[2]


def test_manifest_reproduces_run(tmp_path):
    a = tmp_path / "a"
    assert run(["--out", str(a), "--seed", "3", "check", "--property", "segment", "--inner", "0",
                "--pairs", "40"]) == 0
    b = tmp_path / "b"
    assert run(["--config", str(a / "manifest.json"), "--out", str(b), "check"]) == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"] and ma["config_hash"] == mb["config_hash"]


def test_suite_subset(tmp_path, capsys):
    assert run(["--out", str(tmp_path), "suite", "--criteria", "2,4"]) == 0
    text = capsys.readouterr().out
    assert "[PASS] criterion  2" in text and "2/2 criteria passed" in text
    assert run(["--out", str(tmp_path), "suite", "--criteria", "13"]) == 2


def test_load_config_precedence(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[cone]\ndirections = 12\nk = 2\n")
    rc = load_config("cone", str(cfg), {("cone", "k"): "3"})
    assert rc.section("cone")["directions"] == 12 and rc.section("cone")["k"] == "3"
    assert "directions = 12" in rc.to_ini()
    with pytest.raises(InputError):
        load_config("nope")


def test_field_grammar(iso):
    X = np.array([[0.3, 0.4]])
    assert parse_field("plane:1,2:0.5", iso)(X)[0] == pytest.approx(1.6)
    assert parse_field("cone:2", iso)(X)[0] == pytest.approx(1.0)
    assert parse_field("cone_hat:2:1:0,0", iso)(X)[0] == pytest.approx(0.0)
    assert parse_field("constant:4", iso)(X)[0] == 4.0
    for bad in ("plane", "cone:x", "grid:/nonexistent.csv", "wave:1"):
        with pytest.raises(InputError):
            parse_field(bad, iso)
    assert parse_points("1,2;3,4").shape == (2, 2)
