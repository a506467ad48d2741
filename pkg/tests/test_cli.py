import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hamlearn.cli import main
from hamlearn.dataset import TABLE1_COUNTS, load_table
from hamlearn.hamiltonian import HYPERFINE_H, load_hamiltonian, save_hamiltonian


@pytest.fixture
def truth_file(tmp_path):
    rng = np.random.default_rng(3)
    A = rng.uniform(-1, 1, (3, 3))
    H = np.triu(A) + np.triu(A, 1).T
    path = tmp_path / "truth.json"
    save_hamiltonian(path, H)
    return path, H


@pytest.fixture
def counts_csv(tmp_path):
    path = tmp_path / "counts.csv"
    names = ["State 1", "State 2", "State 3", "State 4", "Uniform Superposition"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["prepared", "1", "2", "3", "4"])
        for name, counts in zip(names, TABLE1_COUNTS):
            w.writerow([name, *counts])
    return path


def parse_lines(text):
    return {k: float(v) for k, v in (line.rsplit(" ", 1) for line in text.strip().splitlines())}


def test_simulate_is_byte_identical_for_same_seed(tmp_path, truth_file):
    truth, _ = truth_file
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert main(["simulate", "--truth", str(truth), "--shots", "500", "--seed", "7",
                     "--out", str(out), "--quiet"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert len(load_table(tmp_path / "a.json").rows) == 1 + 3 + 3
    manifest = json.loads((tmp_path / "a.json.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["command"] == "simulate"


def test_simulate_exact_then_learn(tmp_path, truth_file):
    truth, H = truth_file
    data = tmp_path / "data.json"
    assert main(["simulate", "--truth", str(truth), "--shots", "exact", "--out", str(data),
                 "--quiet"]) == 0
    learned = tmp_path / "learned.json"
    code = main(["learn", "--data", str(data), "--reference", str(truth), "--seed", "0",
                 "--out", str(learned), "--quiet"])
    assert code == 0
    report = json.loads((tmp_path / "learned.json.report.json").read_text())
    assert report["final_cost"] <= 1e-9
    assert report["reference_error"] <= 1e-4
    L, _ = load_hamiltonian(learned)
    assert L.shape == H.shape


def test_eval_reference_table(tmp_path, counts_csv, capsys):
    h = tmp_path / "h.json"
    save_hamiltonian(h, HYPERFINE_H)
    assert main(["eval", "--hamiltonian", str(h), "--data", str(counts_csv), "--t", "0.785"]) == 0
    values = parse_lines(capsys.readouterr().out)
    assert values["total"] == pytest.approx(0.044891608584168144, abs=1e-6)
    assert values["sum"] == pytest.approx(5 * values["total"])
    assert sum(1 for k in values if k.startswith("pair")) == 5


def test_learn_with_mask_from_csv(tmp_path, counts_csv):
    out = tmp_path / "hf.json"
    code = main(["learn", "--data", str(counts_csv), "--t", "0.785", "--mask", "hyperfine",
                 "--max-iters", "3000", "--restarts", "0", "--out", str(out), "--quiet"])
    assert code in (0, 3)
    H, mask = load_hamiltonian(out)
    assert mask is not None
    assert H[0, 1] == 0 and H[0, 2] == 0 and H[2, 3] == 0


def test_learn_config_file(tmp_path, truth_file):
    truth, _ = truth_file
    data = tmp_path / "d.json"
    main(["simulate", "--truth", str(truth), "--shots", "exact", "--out", str(data), "--quiet"])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 5, "restarts": 0, "seed": 4}))
    out = tmp_path / "l.json"
    assert main(["learn", "--data", str(data), "--config", str(cfg), "--out", str(out),
                 "--quiet"]) == 3
    report = json.loads((tmp_path / "l.json.report.json").read_text())
    assert report["config"]["seed"] == 4 and report["reason"] == "max_iters"
    cfg.write_text(json.dumps({"step_size": 1}))
    assert main(["learn", "--data", str(data), "--config", str(cfg), "--out", str(out),
                 "--quiet"]) == 2


def test_learn_diverged_exit(tmp_path, truth_file):
    truth, H = truth_file
    data = tmp_path / "d.json"
    main(["simulate", "--truth", str(truth), "--shots", "exact", "--out", str(data), "--quiet"])
    warm = tmp_path / "warm.json"
    save_hamiltonian(warm, H + 1e-3)
    out = tmp_path / "l.json"
    code = main(["learn", "--data", str(data), "--warm-start", str(warm), "--alpha", "100",
                 "--restarts", "0", "--out", str(out), "--quiet"])
    assert code == 4
    assert json.loads((tmp_path / "l.json.report.json").read_text())["status"] == "diverged"


def test_compare(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_hamiltonian(a, np.diag([0.0, 0.0]))
    save_hamiltonian(b, np.diag([1.0, -1.0]) + 5 * np.eye(2))
    assert main(["compare", str(a), str(b)]) == 0
    values = parse_lines(capsys.readouterr().out)
    assert values["aligned"] == pytest.approx(1.0, abs=1e-10)
    assert values["shift"] == pytest.approx(-5.0, abs=1e-8)
    assert values["raw"] == pytest.approx(6.0)


def test_bench_expm(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench-expm", "--sizes", "2,4", "--trials", "3", "--out", str(out),
                 "--quiet"]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["n"], r["method"]) for r in rows] == [
        ("2", "eig"), ("2", "taylor"), ("4", "eig"), ("4", "taylor")
    ]
    assert all(float(r["max_norm_diff"]) <= 1e-12 for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        [],
        ["learn", "--data", "does-not-exist.json", "--out", "x.json"],
        ["simulate", "--truth", "missing.json", "--out", "x.json"],
        ["simulate", "--truth", "missing.json", "--shots", "-3", "--out", "x.json"],
        ["bench-expm", "--sizes", "a,b", "--out", "x.csv"],
    ],
)
def test_input_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_empty_table_and_missing_out(tmp_path, capsys):
    data = tmp_path / "empty.json"
    data.write_text(json.dumps({"dim": 2, "rows": []}))
    assert main(["learn", "--data", str(data), "--out", str(tmp_path / "o.json")]) == 2
    assert main(["learn", "--data", str(data)]) == 2
    assert "--out is required" in capsys.readouterr().err


def test_csv_without_time(tmp_path, counts_csv, capsys):
    assert main(["learn", "--data", str(counts_csv), "--out", str(tmp_path / "o.json")]) == 2
    assert "--t" in capsys.readouterr().err


def test_help_and_version(capsys):
    assert main(["--version"]) == 0
    assert main(["learn", "--help"]) == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hamlearn", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
