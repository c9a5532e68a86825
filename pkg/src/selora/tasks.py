"""Deterministic desk-scale fine-tuning tasks.

Each task owns frozen base weights, a seeded data stream and a metric.
Adapters are keyed by layer name; :attr:`Task.layers` lists the weights that
receive one.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .adapter import Adapter, dropout_mask, forward, merge
from .autograd import backward
from .errors import InvalidDimensionError


class TaskKind(str, enum.Enum):
    TEACHER_STUDENT = "teacher_student"
    TOY_CLASSIFICATION = "toy_classification"


class Metric(str, enum.Enum):
    REL_FROBENIUS_RECOVERY = "rel_frobenius_recovery"
    MSE = "mse"
    ACCURACY = "accuracy"

    @property
    def higher_is_better(self) -> bool:
        return self is Metric.ACCURACY


def _low_rank_unit(rng, d1, d2, rank):
    U = rng.standard_normal((d1, rank))
    V = rng.standard_normal((rank, d2))
    P = U @ V
    return P / np.linalg.norm(P, 2)


def _branch_mask(adapter: Adapter, X, training: bool, rng):
    rate = adapter.config.dropout_rate
    if training and rate > 0.0 and rng is not None:
        return dropout_mask(rate, X.shape, rng)
    return None


@dataclass(eq=False)
class TeacherStudentTask:
    """Recover a hidden low-rank perturbation of a frozen Gaussian weight.

    ``W* = W0 + P`` with ``P`` of rank ``true_rank`` and unit spectral norm;
    targets are ``W* X + noise``.
    """

    d1: int
    d2: int
    true_rank: int
    noise_std: float = 0.01
    seed: int = 0
    W0: np.ndarray = field(init=False, repr=False)
    perturbation: np.ndarray = field(init=False, repr=False)

    kind = TaskKind.TEACHER_STUDENT
    metric = Metric.REL_FROBENIUS_RECOVERY

    def __post_init__(self):
        if not 1 <= self.true_rank <= min(self.d1, self.d2):
            raise InvalidDimensionError(
                f"true rank {self.true_rank} must lie in [1, {min(self.d1, self.d2)}]"
            )
        rng = np.random.default_rng([self.seed, 0])
        self.W0 = rng.standard_normal((self.d1, self.d2)) / np.sqrt(self.d2)
        self.perturbation = _low_rank_unit(rng, self.d1, self.d2, self.true_rank)

    @property
    def layers(self) -> dict[str, np.ndarray]:
        return {"weight": self.W0}

    @property
    def target_weight(self) -> np.ndarray:
        return self.W0 + self.perturbation

    def batch(self, index: int, batch_size: int = 64, stream: int = 0):
        rng = np.random.default_rng([self.seed, 1, stream, index])
        X = rng.standard_normal((self.d2, batch_size))
        Y = self.target_weight @ X + self.noise_std * rng.standard_normal((self.d1, batch_size))
        return X, Y

    def loss_and_grads(self, adapters, X, Y, training=False, rng=None):
        adapter = adapters["weight"]
        mask = _branch_mask(adapter, X, training, rng)
        pred = forward(adapter, X, training=training, mask=mask)
        n = X.shape[1]
        resid = pred - Y
        loss = 0.5 * float(np.sum(resid * resid)) / n
        return loss, {"weight": backward(adapter, X, resid / n, mask)}

    def recovery_error(self, delta: np.ndarray) -> float:
        return float(np.linalg.norm(delta - self.perturbation) / np.linalg.norm(self.perturbation))

    def evaluate(self, adapters) -> float:
        if adapters is None:
            return 1.0
        delta = merge(adapters["weight"]) - self.W0
        return self.recovery_error(delta)


@dataclass(eq=False)
class ToyClassificationTask:
    """Two-layer ReLU classifier whose hidden layer must absorb a low-rank shift.

    Labels come from a teacher network that differs from the frozen base only
    in its first-layer weight. Adapters attach to that layer; the read-out
    stays frozen.
    """

    input_dim: int
    classes: int
    seed: int = 0
    hidden: int | None = None
    true_rank: int = 4
    shift_scale: float = 3.0
    n_train: int = 2048
    n_test: int = 1024
    W1: np.ndarray = field(init=False, repr=False)
    W2: np.ndarray = field(init=False, repr=False)

    kind = TaskKind.TOY_CLASSIFICATION
    metric = Metric.ACCURACY

    def __post_init__(self):
        if self.classes < 2:
            raise InvalidDimensionError("classes must be >= 2")
        if self.hidden is None:
            self.hidden = self.input_dim
        rng = np.random.default_rng([self.seed, 0])
        self.W1 = rng.standard_normal((self.hidden, self.input_dim)) / np.sqrt(self.input_dim)
        self.W2 = rng.standard_normal((self.classes, self.hidden)) / np.sqrt(self.hidden)
        shift = _low_rank_unit(rng, self.hidden, self.input_dim, self.true_rank)
        self.teacher_W1 = self.W1 + self.shift_scale * shift
        data_rng = np.random.default_rng([self.seed, 1])
        self.X_train = data_rng.standard_normal((self.input_dim, self.n_train))
        self.X_test = data_rng.standard_normal((self.input_dim, self.n_test))
        self.y_train = self._predict(self.teacher_W1, self.X_train)
        self.y_test = self._predict(self.teacher_W1, self.X_test)

    @property
    def layers(self) -> dict[str, np.ndarray]:
        return {"hidden": self.W1}

    def _logits(self, W1, X):
        return self.W2 @ np.maximum(W1 @ X, 0.0)

    def _predict(self, W1, X):
        return np.argmax(self._logits(W1, X), axis=0)

    def batch(self, index: int, batch_size: int = 64, stream: int = 0):
        rng = np.random.default_rng([self.seed, 2, stream, index])
        idx = rng.integers(0, self.n_train, size=batch_size)
        return self.X_train[:, idx], self.y_train[idx]

    def loss_and_grads(self, adapters, X, y, training=False, rng=None):
        adapter = adapters["hidden"]
        mask = _branch_mask(adapter, X, training, rng)
        Z = forward(adapter, X, training=training, mask=mask)
        H = np.maximum(Z, 0.0)
        logits = self.W2 @ H
        logits = logits - logits.max(axis=0, keepdims=True)
        expl = np.exp(logits)
        probs = expl / expl.sum(axis=0, keepdims=True)
        n = X.shape[1]
        cols = np.arange(n)
        loss = -float(np.mean(np.log(probs[y, cols])))
        dlogits = probs
        dlogits[y, cols] -= 1.0
        dlogits /= n
        dZ = (self.W2.T @ dlogits) * (Z > 0)
        return loss, {"hidden": backward(adapter, X, dZ, mask)}

    def accuracy(self, W1) -> float:
        return 100.0 * float(np.mean(self._predict(W1, self.X_test) == self.y_test))

    def evaluate(self, adapters) -> float:
        if adapters is None:
            return self.accuracy(self.W1)
        return self.accuracy(merge(adapters["hidden"]))


Task = TeacherStudentTask | ToyClassificationTask


def make_teacher_student_task(d1, d2, true_rank, noise_std=0.01, seed=0) -> TeacherStudentTask:
    return TeacherStudentTask(d1, d2, true_rank, noise_std, seed)


def make_toy_classification_task(input_dim, classes, seed=0, **kwargs) -> ToyClassificationTask:
    return ToyClassificationTask(input_dim, classes, seed, **kwargs)
