"""Run configuration: a flat ``key = value`` text format with a fixed schema.

Example::

    # teacher-student run
    task.kind = teacher_student
    adapter.rank = 16
    adapter.basis = haar
    sweep.grid = 0.2, 0.4, 0.6

Unknown keys are rejected. :meth:`RunConfig.dumps` writes every key in sorted
order with normalized values, so ``loads(dumps(c)) == c`` and dumping twice
gives identical text.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .adapter import AdapterConfig, InitScheme, Schema
from .errors import ConfigError, SeLoRAError
from .optim import OptimizerConfig
from .spectral import SpectralBasis
from .tasks import TaskKind, make_teacher_student_task, make_toy_classification_task
from .trainer import SweepAxis

SEED_ENV = "SELORA_SEED"


def _choice(*options):
    def parse(text):
        key = text.strip().lower().replace("-", "_")
        if key not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return key

    return parse


def _basis(text):
    return SpectralBasis.from_name(text).name


def _str_list(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _int_list(text):
    return [int(t) for t in _str_list(text)]


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


# Defaults mirror common LoRA fine-tuning settings (rank 32, alpha 64,
# dropout 0.05, batch 16, 100 warmup steps, cosine schedule).
SCHEMA: dict[str, tuple] = {
    "seed": (int, 0),
    "task.kind": (_choice(*[k.value for k in TaskKind]), "teacher_student"),
    "task.d1": (_positive_int, 64),
    "task.d2": (_positive_int, 64),
    "task.true_rank": (_positive_int, 8),
    "task.noise_std": (float, 0.01),
    "task.input_dim": (_positive_int, 32),
    "task.classes": (_positive_int, 8),
    "task.seed": (int, 0),
    "adapter.rank": (_positive_int, 32),
    "adapter.alpha": (float, 64.0),
    "adapter.sparse_ratio": (float, 0.4),
    "adapter.basis": (_basis, "haar"),
    "adapter.schema": (_choice(*[s.value for s in Schema]), "lora"),
    "adapter.init_scheme": (_choice(*[s.value for s in InitScheme]), "kaiming"),
    "adapter.dropout": (float, 0.05),
    "optimizer.lr": (float, 1e-3),
    "optimizer.beta1": (float, 0.9),
    "optimizer.beta2": (float, 0.999),
    "optimizer.eps": (float, 1e-8),
    "optimizer.weight_decay": (float, 0.0),
    "optimizer.warmup_steps": (int, 100),
    "optimizer.steps": (_positive_int, 2000),
    "optimizer.batch_size": (_positive_int, 16),
    "sweep.axis": (_choice(*[a.value for a in SweepAxis]), "sparse_ratio"),
    "sweep.grid": (_str_list, ["0.2", "0.4", "0.6", "0.8"]),
    "sweep.seeds": (_int_list, [0, 1, 2]),
    "output.dir": (str, "runs/default"),
}


def _format(value) -> str:
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _normalize_grid(axis: str, grid: list[str]) -> list[str]:
    if axis == "sparse_ratio":
        return [repr(float(g)) for g in grid]
    if axis == "rank":
        return [str(int(g)) for g in grid]
    if axis == "basis":
        return [SpectralBasis.from_name(g).name for g in grid]
    return [Schema(g.strip().lower()).value for g in grid]


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "RunConfig":
        values = {}
        for key, (parse, default) in SCHEMA.items():
            if key == "seed" and key not in raw and os.environ.get(SEED_ENV):
                raw = {**raw, key: os.environ[SEED_ENV]}
            if key in raw:
                try:
                    values[key] = parse(raw[key])
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{key}: {exc}") from None
            else:
                values[key] = list(default) if isinstance(default, list) else default
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            values["sweep.grid"] = _normalize_grid(values["sweep.axis"], values["sweep.grid"])
        except ValueError as exc:
            raise ConfigError(f"sweep.grid: {exc}") from None
        return cls(values)

    @classmethod
    def loads(cls, text: str, overrides: list[str] | None = None) -> "RunConfig":
        raw: dict[str, str] = {}
        lines = text.splitlines() + list(overrides or [])
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
        return cls.from_mapping(raw)

    @classmethod
    def load(cls, path, overrides: list[str] | None = None) -> "RunConfig":
        text = Path(path).read_text() if path else ""
        return cls.loads(text, overrides)

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in sorted(self.values))

    def build_task(self):
        v = self.values
        if v["task.kind"] == TaskKind.TEACHER_STUDENT.value:
            return make_teacher_student_task(
                v["task.d1"], v["task.d2"], v["task.true_rank"], v["task.noise_std"], v["task.seed"]
            )
        return make_toy_classification_task(v["task.input_dim"], v["task.classes"], v["task.seed"])

    def adapter_config(self, in_dim: int, out_dim: int) -> AdapterConfig:
        v = self.values
        return AdapterConfig(
            in_dim=in_dim,
            out_dim=out_dim,
            rank=v["adapter.rank"],
            alpha=v["adapter.alpha"],
            sparse_ratio=v["adapter.sparse_ratio"],
            basis=SpectralBasis.from_name(v["adapter.basis"]),
            schema=Schema(v["adapter.schema"]),
            init_scheme=InitScheme(v["adapter.init_scheme"]),
            dropout_rate=v["adapter.dropout"],
            seed=v["seed"],
        )

    def optimizer_config(self) -> OptimizerConfig:
        v = self.values
        return OptimizerConfig(
            lr=v["optimizer.lr"],
            beta1=v["optimizer.beta1"],
            beta2=v["optimizer.beta2"],
            eps=v["optimizer.eps"],
            weight_decay=v["optimizer.weight_decay"],
            warmup_steps=v["optimizer.warmup_steps"],
            total_steps=v["optimizer.steps"],
        )

    def validate(self):
        """Build task and adapter configs once so bad settings fail before any compute.

        Returns ``(task, adapter_config)``.
        """
        try:
            task = self.build_task()
            self.optimizer_config()
            configs = [self.adapter_config(W.shape[1], W.shape[0]) for W in task.layers.values()]
        except SeLoRAError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return task, configs[0]
