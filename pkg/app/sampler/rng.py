from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

# Счётчиковый генератор Philox-4x64-10 из numpy; поток = spawn_key (stream_index,)
ALGORITHM = "philox4x64-10"


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return {"__uint64__": [int(v) for v in value.tolist()]}
    if isinstance(value, dict):
        return {k: _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, np.integer):
        return int(value)
    return value


def _from_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value) == {"__uint64__"}:
            return np.array(value["__uint64__"], dtype=np.uint64)
        return {k: _from_jsonable(v) for k, v in value.items()}
    return value


@dataclass(eq=False)
class RngStream:
    """
    Поток случайных чисел (root_seed, stream_index). Одинаковая пара даёт одну и ту же
    последовательность на каждом запуске; разные индексы - независимые потоки.
    Нормальные величины получаются преобразованием Бокса-Мюллера из равномерных.
    """

    root_seed: int
    stream_index: int
    algorithm: str = field(default=ALGORITHM, init=False)
    _generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=(self.stream_index,))
        self._generator = np.random.Generator(np.random.Philox(seq))

    def uniform(self, size) -> np.ndarray:
        """Равномерные в [0, 1)."""
        return self._generator.random(size)

    def normal(self, shape) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape).tolist())
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = (2.0 * math.pi) * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.ravel()[:count].reshape(shape)

    def get_state(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "root_seed": self.root_seed,
            "stream_index": self.stream_index,
            "bit_generator": _to_jsonable(self._generator.bit_generator.state),
        }

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        stream = cls(int(state["root_seed"]), int(state["stream_index"]))
        stream._generator.bit_generator.state = _from_jsonable(state["bit_generator"])
        return stream
