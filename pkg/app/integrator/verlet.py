from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from app.custom_logging import get_logger, log_call
from app.errors import ConfigurationError, IntegrationError
from app.model.forces import cells_per_side, total_energy
from app.model.kernels import COINCIDENT, OK, advance_verlet
from app.model.types import EnergyReport, SimConfig, SystemState

log = get_logger(__name__)

TRACER = 0


@dataclass(frozen=True)
class StepObservation:
    step: int
    time: float
    energy: EnergyReport
    # развёрнутое смещение частицы-метки (индекс 0)
    tracer_displacement: np.ndarray
    # её свёрнутая позиция
    tracer_position: np.ndarray


ObservationSink = Callable[[StepObservation], None]


def _advance(state: SystemState, config: SimConfig, n_steps: int, first_step: int = 0) -> SystemState:
    pos = state.positions.copy()
    vel = state.velocities.copy()
    disp = state.displacement.copy()
    forces = np.empty_like(pos)
    done, time, code = advance_verlet(
        pos, vel, disp, float(state.time), config.box_edge, config.r_cutoff,
        cells_per_side(config.box_edge, config.r_cutoff), config.dt, n_steps,
        config.verlet_variant == "as-printed", forces,
    )
    if code != OK:
        reason = "совпадающие частицы" if code == COINCIDENT else "неконечная сила"
        raise IntegrationError(reason, step=first_step + int(done) + 1)
    return replace(state, positions=pos, velocities=vel, displacement=disp, time=float(time))


def verlet_step(state: SystemState, config: SimConfig) -> SystemState:
    """Один шаг: дрейф dt/2, удар dt силой в q_{n+1/2}, дрейф dt/2; позиции сворачиваются в [0, L)."""
    return _advance(state, config, 1)


def observe(state: SystemState, config: SimConfig, step: int) -> StepObservation:
    return StepObservation(
        step=step,
        time=step * config.dt,
        energy=total_energy(state, config),
        tracer_displacement=state.displacement[TRACER].copy(),
        tracer_position=state.positions[TRACER].copy(),
    )


@log_call()
def integrate(
    state: SystemState,
    config: SimConfig,
    n_steps: int,
    observe_every: int,
    sink: ObservationSink,
) -> SystemState:
    """
    n_steps шагов Верле. Наблюдение отдаётся в sink на шаге 0 и далее каждые
    observe_every шагов. Между наблюдениями шаги идут одним вызовом ядра,
    результат побитово равен повторению verlet_step.
    """
    if n_steps < 0:
        raise ConfigurationError(f"n_steps должно быть >= 0, получено {n_steps}")
    if observe_every < 1:
        raise ConfigurationError(f"observe_every должно быть >= 1, получено {observe_every}")

    current = state
    sink(observe(current, config, 0))
    done = 0
    while done < n_steps:
        chunk = min(observe_every, n_steps - done)
        current = _advance(current, config, chunk, first_step=done)
        done += chunk
        if done % observe_every == 0:
            sink(observe(current, config, done))
    return current


@dataclass
class ObservationBuffer:
    """Приёмник наблюдений, складывающий их в массивы."""

    steps: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    dx: list[float] = field(default_factory=list)
    dy: list[float] = field(default_factory=list)
    x: list[float] = field(default_factory=list)

    def __call__(self, obs: StepObservation) -> None:
        self.steps.append(obs.step)
        self.times.append(obs.time)
        self.total.append(obs.energy.total)
        self.dx.append(float(obs.tracer_displacement[0]))
        self.dy.append(float(obs.tracer_displacement[1]))
        self.x.append(float(obs.tracer_position[0]))

    def __len__(self) -> int:
        return len(self.steps)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "step": np.asarray(self.steps, dtype=np.int64),
            "time": np.asarray(self.times, dtype=np.float64),
            "energy": np.asarray(self.total, dtype=np.float64),
            "dx": np.asarray(self.dx, dtype=np.float64),
            "dy": np.asarray(self.dy, dtype=np.float64),
            "x": np.asarray(self.x, dtype=np.float64),
        }
