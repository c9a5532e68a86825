import csv
import io
import json
import subprocess
import sys

import pytest

from selora.cli import main

FAST = ["--set", "optimizer.steps=40", "--set", "adapter.rank=8", "--set", "task.d1=16",
        "--set", "task.d2=16", "--set", "task.true_rank=2"]


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def error_fields(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("selora: error: ")
    return dict(part.split("=", 1) for part in lines[0][len("selora: error: "):].split(" ", 2))


def test_check_passes():
    code, out, err = run(["check"])
    assert code == 0, out + err
    assert out.count("PASS") == 7 and "FAIL" not in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "selora", "check"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_train_writes_artifacts(tmp_path):
    code, out, err = run(["train", *FAST, "--out", str(tmp_path)])
    assert code == 0, err
    assert {p.name for p in tmp_path.iterdir()} == {"metrics.json", "checkpoint.selora", "config.txt"}
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert len(metrics["losses"]) == 40 and "wall_seconds" not in metrics
    assert "adapter.rank = 8" in (tmp_path / "config.txt").read_text()


def test_train_is_byte_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run(["train", *FAST, "--set", "adapter.dropout=0.2", "--out", str(tmp_path / name)])[0] == 0
    for f in ("metrics.json", "checkpoint.selora"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    configs = [(tmp_path / n / "config.txt").read_text().splitlines() for n in ("a", "b")]
    assert [l for l in configs[0] if not l.startswith("output.dir")] == [
        l for l in configs[1] if not l.startswith("output.dir")
    ]


def test_train_from_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("optimizer.steps = 5\nadapter.rank = 4\ntask.kind = toy_classification\n")
    code, _, err = run(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 0, err


def test_degenerate_sparsity_exit_2(tmp_path):
    code, _, err = run(["train", "--set", "adapter.sparse_ratio=0.9999", "--out", str(tmp_path)])
    assert code == 2
    fields = error_fields(err)
    assert fields["category"] == "config" and fields["type"] == "DegenerateSparsityError"
    assert not any(tmp_path.iterdir())


@pytest.mark.parametrize(
    "argv",
    [["train", "--set", "nope=1"], ["train", "--set", "adapter.rank=abc"], ["frobnicate"],
     ["sweep", "--axis", "depth"], ["train", "--set", "no_equals"]],
)
def test_config_errors_exit_2(argv):
    code, _, err = run(argv)
    assert code == 2
    assert error_fields(err)["category"] == "config"


def test_numeric_failure_exit_3(tmp_path):
    code, _, err = run(["train", *FAST, "--set", "optimizer.lr=1e200", "--set", "optimizer.warmup_steps=0",
                        "--out", str(tmp_path)])
    assert code == 3
    assert error_fields(err)["type"] == "NumericalError"


def test_sweep_reference_layout(tmp_path):
    code, _, err = run(["sweep", "--axis", "sparse-ratio", "--grid", "0.2,0.4,0.6,0.8", "--steps", "10",
                        "--out", str(tmp_path)])
    assert code == 0, err
    report = json.loads((tmp_path / "sweep.json").read_text())
    assert report["axis"] == "sparse_ratio" and report["seeds"] == [0, 1, 2]
    assert len(report["entries"]) == 4 * 3 * 3
    assert {e["arm"] for e in report["entries"]} == {"selora", "masked_lora", "reduced_lora"}
    code, _, err = run(["export", str(tmp_path / "sweep.json"), "--format", "csv", "--out", str(tmp_path / "s.csv")])
    assert code == 0, err
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert len(rows) == 36 and list(rows[0]) == ["axis_value", "arm", "seed", "final_metric", "params"]


def test_analyze_checkpoint(tmp_path):
    assert run(["train", *FAST, "--out", str(tmp_path)])[0] == 0
    code, out, err = run(["analyze", str(tmp_path / "checkpoint.selora"), "--rank", "2"])
    assert code == 0, err
    data = json.loads(out)
    assert data["subspace"]["rank_used"] == 2 and data["subspace"]["af"] > 0
    assert "var_A" in data["variance"]


def test_analyze_corrupt_checkpoint_exit_4(tmp_path):
    assert run(["train", *FAST, "--out", str(tmp_path)])[0] == 0
    path = tmp_path / "checkpoint.selora"
    blob = bytearray(path.read_bytes())
    blob[-3] ^= 0xFF
    path.write_bytes(bytes(blob))
    code, _, err = run(["analyze", str(path)])
    assert code == 4
    assert error_fields(err)["type"] == "CorruptionError"


def test_analyze_missing_file_exit_1(tmp_path):
    code, _, err = run(["analyze", str(tmp_path / "missing.selora")])
    assert code == 1 and error_fields(err)["category"] == "io"


def test_export_run_metrics(tmp_path):
    assert run(["train", *FAST, "--out", str(tmp_path)])[0] == 0
    code, out, _ = run(["export", str(tmp_path / "metrics.json"), "--format", "csv"])
    assert code == 0 and len(out.strip().splitlines()) == 2
    code, out, _ = run(["export", str(tmp_path / "metrics.json"), "--format", "json"])
    assert code == 0 and json.loads(out)["final_metric"] > 0


def test_export_unknown_format_is_usage_error(tmp_path):
    (tmp_path / "m.json").write_text("{}")
    code, _, err = run(["export", str(tmp_path / "m.json"), "--format", "xml"])
    assert code == 2


def test_export_rejects_garbage(tmp_path):
    (tmp_path / "m.json").write_text("not json")
    assert run(["export", str(tmp_path / "m.json")])[0] == 4
    (tmp_path / "m.json").write_text('{"foo": 1}')
    assert run(["export", str(tmp_path / "m.json")])[0] == 4
