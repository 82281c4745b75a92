from __future__ import annotations

import os

import numpy as np
import pytest

from app.integrator.verlet import ObservationBuffer, integrate
from app.model.types import SimConfig, SystemState
from app.sampler.langevin import SamplerConfig, sample_canonical

RUN_SLOW = os.getenv("RUN_SLOW", "0") in ("1", "true", "True")


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="долгая проверка, запуск с RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def random_state(n: int, box_edge: float, rng: np.random.Generator, *, min_distance: float = 0.0,
                 speed: float = 1.0) -> SystemState:
    """Случайные позиции в ящике; при min_distance > 0 - без близких пар (отбор)."""
    positions = np.empty((n, 2))
    placed = 0
    while placed < n:
        candidate = rng.uniform(0.0, box_edge, size=2)
        if min_distance > 0 and placed:
            d = positions[:placed] - candidate
            d -= box_edge * np.floor(d / box_edge + 0.5)
            if np.min(np.sum(d * d, axis=1)) < min_distance ** 2:
                continue
        positions[placed] = candidate
        placed += 1
    velocities = rng.normal(0.0, speed, size=(n, 2))
    return SystemState.create(positions, velocities, box_edge)


@pytest.fixture
def np_rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def full_config() -> SimConfig:
    return SimConfig()


@pytest.fixture
def small_config() -> SimConfig:
    # 16 частиц в ящике 6 x 6: плотность как у основной системы, но быстро
    return SimConfig(n_particles=16, box_edge=6.0, r_cutoff=2.5, dt=0.005, seed=7)


@pytest.fixture
def two_far_particles() -> tuple[SystemState, SimConfig]:
    """Две частицы дальше обрезки друг от друга: первая движется свободно со скоростью (1, 0)."""
    config = SimConfig(n_particles=2, box_edge=11.5, r_cutoff=2.5, dt=0.01)
    state = SystemState.create([[0.5, 1.0], [5.0, 7.0]], [[1.0, 0.0], [0.0, 0.0]], config.box_edge)
    return state, config


@pytest.fixture(scope="session")
def canonical_tracer_paths():
    """
    2000 независимых канонических образцов малой системы и смещения метки
    на сетке 0, 0.01, ..., 0.05 (шаг Верле 0.001). Строится один раз на сессию.
    """
    config = SimConfig(n_particles=16, box_edge=6.0, r_cutoff=2.5, dt=0.001, seed=7)
    sampler_cfg = SamplerConfig(friction=1.0, langevin_step=0.005, burn_in=5.0, gap=0.1)
    states = sample_canonical(config, sampler_cfg, 2000, 404, workers=4)
    dx, dy = [], []
    times = None
    for state in states:
        buffer = ObservationBuffer()
        integrate(state, config, 50, 10, buffer)
        arrays = buffer.arrays()
        times = arrays["time"]
        dx.append(arrays["dx"])
        dy.append(arrays["dy"])
    return config, states, times, np.array(dx), np.array(dy)
