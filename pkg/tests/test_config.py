import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selora.adapter import Schema
from selora.config import SCHEMA, RunConfig
from selora.errors import ConfigError, DegenerateSparsityError, SeLoRAError
from selora.tasks import TeacherStudentTask, ToyClassificationTask

TEXT = """
# comment line
task.kind = teacher_student
task.d1 = 32   # trailing comment
adapter.basis = DB4
adapter.rank = 8
sweep.axis = sparse-ratio
sweep.grid = .2, 0.40,0.6
"""


def test_defaults():
    cfg = RunConfig.loads("")
    assert cfg["adapter.rank"] == 32 and cfg["adapter.alpha"] == 64.0
    assert cfg["adapter.dropout"] == 0.05 and cfg["optimizer.warmup_steps"] == 100
    assert set(cfg.values) == set(SCHEMA)


def test_parse_and_normalize():
    cfg = RunConfig.loads(TEXT)
    assert cfg["task.d1"] == 32 and cfg["adapter.basis"] == "db4"
    assert cfg["sweep.axis"] == "sparse_ratio"
    assert cfg["sweep.grid"] == ["0.2", "0.4", "0.6"]


def test_dump_is_fixed_point():
    text = RunConfig.loads(TEXT).dumps()
    again = RunConfig.loads(text)
    assert again == RunConfig.loads(TEXT)
    assert again.dumps() == text
    lines = text.splitlines()
    assert lines == sorted(lines)


def test_overrides_win():
    cfg = RunConfig.loads(TEXT, ["adapter.rank = 4"])
    assert cfg["adapter.rank"] == 4


@pytest.mark.parametrize(
    "line",
    ["bogus = 1", "adapter.rank = zero", "adapter.rank = 0", "adapter.basis = sym8",
     "task.kind = imagenet", "no equals sign", "sweep.grid = a, b", "adapter.schema = vera"],
)
def test_rejects_bad_input(line):
    with pytest.raises(ConfigError):
        RunConfig.loads(line)


def test_seed_env(monkeypatch):
    monkeypatch.setenv("SELORA_SEED", "17")
    assert RunConfig.loads("")["seed"] == 17
    assert RunConfig.loads("seed = 3")["seed"] == 3


def test_validate_builds_task_and_adapter():
    task, adapter_cfg = RunConfig.loads("adapter.rank = 8\nadapter.schema = dora").validate()
    assert isinstance(task, TeacherStudentTask)
    assert adapter_cfg.schema is Schema.DORA and adapter_cfg.in_dim == 64
    task, adapter_cfg = RunConfig.loads("task.kind = toy_classification\nadapter.rank = 4").validate()
    assert isinstance(task, ToyClassificationTask) and adapter_cfg.in_dim == 32


def test_validate_surfaces_degenerate_sparsity():
    with pytest.raises(DegenerateSparsityError):
        RunConfig.loads("adapter.sparse_ratio = 0.9999").validate()


@pytest.mark.parametrize("line", ["adapter.rank = 100", "optimizer.beta1 = 1.5", "task.true_rank = 99"])
def test_validate_rejects_inconsistent(line):
    with pytest.raises(SeLoRAError) as info:
        RunConfig.loads(line).validate()
    assert info.value.category == "config"


def test_load_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(TEXT)
    assert RunConfig.load(path) == RunConfig.loads(TEXT)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 64), st.floats(0.0, 0.95), st.sampled_from(["haar", "Fourier", "coif1", "identity"]),
    st.lists(st.integers(1, 64), min_size=1, max_size=4),
)
def test_canonicalization_idempotent(rank, eta, basis, grid):
    text = (f"adapter.rank = {rank}\nadapter.sparse_ratio = {eta}\nadapter.basis = {basis}\n"
            f"sweep.axis = rank\nsweep.grid = {', '.join(map(str, grid))}\n")
    once = RunConfig.loads(text).dumps()
    assert RunConfig.loads(once).dumps() == once
