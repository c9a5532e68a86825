import numpy as np
import pytest

from selora.adapter import AdapterConfig, Schema
from selora.errors import NumericalError
from selora.optim import OptimizerConfig
from selora.tasks import make_teacher_student_task, make_toy_classification_task
from selora.trainer import (
    SweepAxis,
    SweepReport,
    matched_rank,
    max_workers,
    sweep,
    sweep_arms,
    train,
)

OPT = OptimizerConfig(lr=1e-2, warmup_steps=10)


@pytest.fixture(scope="module")
def task():
    return make_teacher_student_task(16, 16, 2, seed=0)


@pytest.fixture(scope="module")
def base():
    return AdapterConfig(16, 16, rank=4, alpha=8.0, sparse_ratio=0.25, basis="haar")


def test_training_recovers_perturbation(task):
    cfg = AdapterConfig(16, 16, rank=4, alpha=8.0, sparse_ratio=0.0, basis="haar")
    metrics = train(task, cfg, steps=400, optimizer=OPT)
    assert metrics.initial_metric == pytest.approx(1.0)
    assert metrics.final_metric < 0.05
    assert np.mean(metrics.losses[-20:]) < 0.05 * np.mean(metrics.losses[:5])
    assert len(metrics.losses) == 400


def test_training_is_deterministic(task, base):
    cfg = AdapterConfig(16, 16, rank=4, sparse_ratio=0.25, dropout_rate=0.2)
    a = train(task, cfg, steps=30, seed=2, optimizer=OPT).to_dict()
    b = train(task, cfg, steps=30, seed=2, optimizer=OPT).to_dict()
    assert a == b
    assert "wall_seconds" not in a
    assert a["config"]["seed"] == 2 and a["config"]["steps"] == 30


def test_seeds_differ(task, base):
    a = train(task, base, steps=10, seed=0, optimizer=OPT)
    b = train(task, base, steps=10, seed=1, optimizer=OPT)
    assert a.losses != b.losses


def test_return_adapters(task, base):
    metrics, adapters, state = train(task, base, steps=5, optimizer=OPT, return_adapters=True)
    assert state.t == 5 and state.config.total_steps == 5
    assert metrics.trainable_params == adapters["weight"].num_parameters == len(state)


def test_toy_classification_improves():
    task = make_toy_classification_task(16, 4, seed=0, n_train=512, n_test=512)
    cfg = AdapterConfig(16, 16, rank=4, alpha=8.0, sparse_ratio=0.0, basis="identity")
    metrics = train(task, cfg, steps=300, optimizer=OPT)
    assert metrics.final_metric > metrics.initial_metric


def test_divergence_raises(task, base):
    with pytest.raises(NumericalError):
        train(task, base, steps=50, optimizer=OptimizerConfig(lr=1e200, warmup_steps=0))


def test_steps_must_be_positive(task, base):
    with pytest.raises(ValueError):
        train(task, base, steps=0)


@pytest.mark.parametrize("rank, eta, expected", [(16, 0.6, 6), (16, 0.5, 8), (32, 0.4, 19), (4, 0.99, 1)])
def test_matched_rank(rank, eta, expected):
    assert matched_rank(rank, eta) == expected


def test_sweep_arms(base):
    arms = sweep_arms(SweepAxis.SPARSE_RATIO, 0.5, base)
    assert [a for a, _ in arms] == ["selora", "masked_lora", "reduced_lora"]
    assert arms[1][1]["schema"] is Schema.MASKED_LORA
    assert arms[2][1]["rank"] == matched_rank(base.rank, 0.5)
    assert [a for a, _ in sweep_arms(SweepAxis.SCHEMA, "dora", base)] == ["spectral", "spatial"]
    assert sweep_arms(SweepAxis.BASIS, "db4", base)[0][1]["basis"].name == "db4"


@pytest.mark.parametrize("text", ["sparse-ratio", "SPARSE_RATIO", " rank "])
def test_axis_parse(text):
    assert isinstance(SweepAxis.parse(text), SweepAxis)


def test_sweep_report_layout(task, base):
    report = sweep("sparse-ratio", [0.25, 0.5], task, base, seeds=[0, 1], steps=5, optimizer=OPT)
    assert len(report.entries) == 2 * 3 * 2
    keys = [(e["axis_value"], e["arm"], e["seed"]) for e in report.entries]
    assert keys[:3] == [(0.25, "selora", 0), (0.25, "selora", 1), (0.25, "masked_lora", 0)]
    assert set(report.entries[0]) == {"axis_value", "arm", "seed", "final_metric", "initial_metric", "final_loss", "params"}
    d = report.to_dict()
    assert d["axis"] == "sparse_ratio" and len(d["medians"]) == 6
    assert report.median(0.25, "selora") == pytest.approx(
        np.median([e["final_metric"] for e in report.entries if e["arm"] == "selora" and e["axis_value"] == 0.25])
    )


def test_sweep_skips_invalid_points(task, base):
    report = sweep("rank", [4, 5, 32], task, base, seeds=[0], steps=3, optimizer=OPT)
    assert [e["axis_value"] for e in report.entries] == [4]
    assert {s["axis_value"] for s in report.skipped} == {5, 32}


def test_sweep_parallel_matches_serial(task, base):
    kw = dict(seeds=[0, 1], steps=5, optimizer=OPT)
    serial = sweep("basis", ["fourier", "haar"], task, base, workers=1, **kw)
    parallel = sweep("basis", ["fourier", "haar"], task, base, workers=2, **kw)
    assert serial.entries == parallel.entries


def test_sweep_needs_grid_and_seeds(task, base):
    with pytest.raises(ValueError):
        sweep("rank", [], task, base, seeds=[0])
    with pytest.raises(ValueError):
        sweep("rank", [4], task, base, seeds=[])


@pytest.mark.parametrize("raw, expected", [(None, 1), ("3", 3), ("0", 1), ("x", 1)])
def test_max_workers_env(monkeypatch, raw, expected):
    if raw is None:
        monkeypatch.delenv("SELORA_MAX_WORKERS", raising=False)
    else:
        monkeypatch.setenv("SELORA_MAX_WORKERS", raw)
    assert max_workers() == expected


def test_empty_report_medians():
    assert SweepReport(SweepAxis.RANK, [], []).medians() == {}
