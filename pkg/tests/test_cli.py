import csv
import json
import subprocess
import sys

import pytest

from randstir.cli import main


def read_rows(path):
    lines = path.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    return lines, list(csv.DictReader(body))


def test_exact_check(tmp_path):
    out = tmp_path / "exact.csv"
    assert main(["exact-check", "--n", "3", "--steps", "2", "--out", str(out)]) == 0
    _, rows = read_rows(out)
    assert {r["outcome"]: r["direct"] for r in rows} == {
        "(3;)": "2/9", "(2;)": "4/9", "(1;1)": "2/9", "(1;)": "1/9"}
    assert all(r["direct"] == r["reduced"] for r in rows)
    manifest = json.loads((tmp_path / "exact.csv.manifest.json").read_text())
    assert manifest["passed"] and manifest["version"].startswith("v")


def test_couple_table(tmp_path):
    out = tmp_path / "c.csv"
    main(["couple", "--n", "100,1000,10000", "--T", "2", "--reps", "30", "--seed", "42", "--out", str(out)])
    lines, rows = read_rows(out)
    assert len(rows) == 3
    assert list(rows[0]) == ["n", "replications", "T", "q50", "q90", "q99", "correction_rate",
                             "fictive_rate", "jump_match_rate", "seed"]
    config = json.loads(lines[1].removeprefix("# config: "))
    assert config["seed"] == 42 and config["n"] == [100, 1000, 10000]
    assert "slope" in json.loads(lines[-1].removeprefix("# summary: "))


@pytest.mark.parametrize("argv", [
    ["couple", "--n", "100,400,1600", "--reps", "20"],
    ["returns-limit", "--n", "400", "--reps", "2000"],
    ["limit-sim", "--reps", "50"],
    ["stationarity", "--reps", "10000"],
    ["exact-check", "--n", "3", "--steps", "3"],
])
def test_byte_identical_reruns(tmp_path, argv):
    outputs = []
    for k, threads in enumerate(["1", "1", "3"]):
        out = tmp_path / f"run{k}.out"
        main(argv + ["--seed", "5", "--threads", threads, "--out", str(out)])
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_json_format(tmp_path):
    out = tmp_path / "s.json"
    main(["limit-sim", "--reps", "5", "--format", "json", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert set(doc) == {"manifest", "rows", "summary"}
    assert doc["manifest"]["command"] == "limit-sim"
    assert doc["summary"]["invariant_violations"] == 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 3\nsteps = 1\nseed = 9\n")
    out = tmp_path / "e.json"
    assert main(["exact-check", "--config", str(cfg), "--steps", "2", "--format", "json",
                 "--out", str(out)]) == 0
    manifest = json.loads(out.read_text())["manifest"]
    assert (manifest["n"], manifest["steps"], manifest["seed"]) == (3, 2, 9)


def test_random_seed_is_recorded(tmp_path):
    out = tmp_path / "r.json"
    main(["exact-check", "--seed", "random", "--format", "json", "--out", str(out)])
    assert isinstance(json.loads(out.read_text())["manifest"]["seed"], int)


def test_usage_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    for argv in (["couple", "--reps", "0"], ["exact-check", "--config", str(cfg)], ["nope"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    assert main(["couple", "--n", "2", "--out", str(tmp_path / "x.csv")]) == 2


def test_failed_check_exits_one(tmp_path):
    # four places cannot produce a Poisson(2) return count
    out = tmp_path / "r.csv"
    assert main(["returns-limit", "--n", "4", "--reps", "20000", "--out", str(out)]) == 1
    assert not json.loads((tmp_path / "r.csv.manifest.json").read_text())["passed"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "randstir", "exact-check", "--n", "2", "--steps", "3"],
                          cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("PASS exact-check")
    assert (tmp_path / "exact-check.csv").exists()
