import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from wavebeam.cli import main, read_config, ConfigError
from wavebeam.model import make_point
from wavebeam.serialization import point_to_json


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_trace_trunk_matches_closed_form(tmp_path):
    assert main(["trace", "--nu", "2", "--N", "1", "--omega-max", "3", "--out-dir", str(tmp_path)]) == 0
    data = rows(tmp_path / "trunk.csv")
    assert float(data[-1]["omega"]) > 2.9
    for r in data:
        om, A = float(r["omega"]), float(r["u00"])
        assert abs(A - 4 / 3 * math.sqrt(om**2 - 1)) <= max(1e-10, 2e-11 / (om**2 - 1))
    assert (tmp_path / "trunk.json").exists()


def test_trace_branches(tmp_path):
    code = main(["trace", "--nu", "2", "--N", "2", "--branches", "--out-dir", str(tmp_path)])
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "branch_1_1.csv" in names and "structures.csv" in names
    b = rows(tmp_path / "branch_1_1.csv")
    assert abs(float(b[-1]["u00"])) <= 1e-8
    assert "fold" in {e for r in b for e in r["event"].split(";")}


def test_trace_empty_range_writes_nothing(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["trace", "--omega-max", "1.0", "--out-dir", str(out)]) == 2
    assert not out.exists()
    assert "omega_max" in capsys.readouterr().err


def test_trace_first_point_failure(tmp_path):
    out = tmp_path / "o"
    assert main(["trace", "--N", "2", "--tol", "1e-30", "--out-dir", str(out)]) == 2
    assert not out.exists()


def test_trace_partial_output(tmp_path, monkeypatch):
    import wavebeam.cli as cli
    real = cli.sweep_trunk

    def stalled(*args, **kw):
        pieces = real(*args, **kw)
        pieces[-1].events.append((len(pieces[-1]) - 1, "aborted"))
        return pieces

    monkeypatch.setattr(cli, "sweep_trunk", stalled)
    assert main(["trace", "--N", "1", "--max-points", "6", "--out-dir", str(tmp_path)]) == 3
    data = rows(tmp_path / "trunk.csv")
    assert len(data) == 6 and "aborted" in data[-1]["event"].split(";")


def test_trace_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["trace", "--N", "2", "--branches", "--omega-max", "2.0", "--out-dir", str(d)]) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# beam trunk\nnu = 2\nN = 1\nomega-max = 2.0  # short\n")
    assert main(["trace", "--config", str(cfg), "--out-dir", str(tmp_path / "a")]) == 0
    assert float(rows(tmp_path / "a" / "trunk.csv")[-1]["omega"]) <= 2.0
    assert main(["trace", "--config", str(cfg), "--omega-max", "1.5",
                 "--out-dir", str(tmp_path / "b")]) == 0
    assert float(rows(tmp_path / "b" / "trunk.csv")[-1]["omega"]) <= 1.5


def test_config_unknown_key_named(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("N = 1\nstepmax = 0.1\n")
    assert main(["trace", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    assert "stepmax" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="branches"):
        read_config(_write(tmp_path, "branches = 1\n"), "stability")
    with pytest.raises(ConfigError):
        read_config(_write(tmp_path, "no equals sign\n"), "trace")
    with pytest.raises(ConfigError, match="N"):
        read_config(_write(tmp_path, "N = two\n"), "trace")


def _write(tmp_path, text):
    p = tmp_path / "c.cfg"
    p.write_text(text)
    return p


@pytest.mark.parametrize("args,key", [
    (["--nu", "3"], "nu"), (["--N", "0"], "N"), (["--tol", "-1"], "tol"),
    (["--threads", "0"], "threads"), (["--seed-omega", "0.5"], "seed_omega"),
    (["--step-min", "1", "--step-max", "0.1"], "step_min"),
])
def test_invalid_globals(tmp_path, capsys, args, key):
    assert main(["trace", *args, "--out-dir", str(tmp_path / "o")]) == 2
    assert key in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_reducible_tree(tmp_path):
    assert main(["reducible-tree", "--nu", "2", "--N", "4", "--m-max", "3",
                 "--omega-max", "10", "--out-dir", str(tmp_path)]) == 0
    data = rows(tmp_path / "tree.csv")
    pairs = {(int(r["m"]), int(r["n"])) for r in data if r["family"] == "branch"}
    assert pairs == {(m, n) for m in (1, 2, 3) for n in (1, 2, 3) if 2 * m + 1 < (2 * n + 1) ** 2}
    assert main(["reducible-tree", "--nu", "2", "--N", "1", "--out-dir", str(tmp_path / "t")]) == 0
    assert {r["family"] for r in rows(tmp_path / "t" / "tree.csv")} == {"trunk"}
    assert main(["reducible-tree", "--N", "0", "--out-dir", str(tmp_path / "z")]) == 2


def test_reducible_tree_wave_windows(tmp_path):
    assert main(["reducible-tree", "--nu", "1", "--N", "2", "--out-dir", str(tmp_path)]) == 0
    data = [r for r in rows(tmp_path / "tree.csv") if r["family"] == "branch"]
    for m in {int(r["m"]) for r in data}:
        om = [float(r["omega"]) for r in data if int(r["m"]) == m]
        k, l = (2 * m + 1) ** 2, 9
        assert min(om) == pytest.approx(math.sqrt((4 * l - 3) / (4 * k - 3)), rel=1e-15)
        assert max(om) == pytest.approx(math.sqrt((3 * l - 4) / (3 * k - 4)), rel=1e-15)


def test_stability_on_trunk(tmp_path):
    assert main(["trace", "--N", "1", "--max-points", "15", "--out-dir", str(tmp_path)]) == 0
    assert main(["stability", str(tmp_path / "trunk.json"), "--multipliers", "--threads", "2",
                 "--out-dir", str(tmp_path)]) == 0
    scan = rows(tmp_path / "scan.csv")
    assert len(scan) == 15 and {r["verdict"] for r in scan} == {"stable"}
    mult = json.loads((tmp_path / "multipliers.json").read_text())
    assert len(mult) == 15 and len(mult[0]["multipliers"]) == 2
    # CSV input needs nu, which has a default
    assert main(["stability", str(tmp_path / "trunk.csv"), "--out-dir", str(tmp_path / "c")]) == 0


def test_stability_empty_and_unreadable(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["stability", str(empty), "--out-dir", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "scan.csv").read_text() == "index,omega,energy,verdict,max_dev\n"
    assert main(["stability", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path / "m")]) == 2
    assert not (tmp_path / "m").exists()
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert main(["stability", str(junk), "--out-dir", str(tmp_path / "j")]) == 2


def test_field_sample(tmp_path):
    sol = tmp_path / "p.json"
    sol.write_text(point_to_json(make_point(np.array([[1.25]]), 1.3, 2)))
    assert main(["field-sample", str(sol), "--n-tau", "5", "--n-x", "3", "--out-dir", str(tmp_path)]) == 0
    for r in rows(tmp_path / "field.csv"):
        t, x, u = float(r["tau"]), float(r["x"]), float(r["u"])
        assert u == pytest.approx(1.25 * math.cos(t) * math.sin(x), abs=1e-15)
    assert main(["field-sample", str(sol), "--n-tau", "1", "--n-x", "1",
                 "--out-dir", str(tmp_path / "one")]) == 0
    (r,) = rows(tmp_path / "one" / "field.csv")
    assert float(r["tau"]) == 0 and float(r["x"]) == 0 and float(r["u"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"nu": 2}')
    assert main(["field-sample", str(bad), "--out-dir", str(tmp_path / "b")]) == 2


def test_field_sample_from_curve_index(tmp_path):
    assert main(["trace", "--N", "1", "--max-points", "5", "--out-dir", str(tmp_path)]) == 0
    assert main(["field-sample", str(tmp_path / "trunk.json"), "--index", "4",
                 "--out-dir", str(tmp_path)]) == 0
    assert main(["field-sample", str(tmp_path / "trunk.json"), "--index", "9",
                 "--out-dir", str(tmp_path / "x")]) == 2


def test_rescale(tmp_path):
    sol = tmp_path / "p.json"
    p = make_point(np.array([[4 / 3]]), math.sqrt(2), 1)
    sol.write_text(point_to_json(p))
    assert main(["rescale", str(sol), "--nu", "1", "--m-scale", "1", "--n-scale", "3",
                 "--out-dir", str(tmp_path)]) == 0
    q = json.loads((tmp_path / "rescaled.json").read_text())
    assert q["N"] == 2 and q["coeffs"][1] == pytest.approx(4.0)
    assert q["omega"] == pytest.approx(3 * math.sqrt(2))
    assert q["energy"] == pytest.approx(81 * p.energy, rel=1e-12)
    assert main(["rescale", str(sol), "--n-scale", "2", "--out-dir", str(tmp_path / "e")]) == 2


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "wavebeam", "reducible-tree", "--N", "2",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "tree.csv").exists()
