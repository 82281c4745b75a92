from __future__ import annotations

import math
from dataclasses import replace
from typing import NamedTuple, Sequence

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from app.custom_logging import get_logger, log_call, stage_log
from app.errors import ConfigurationError, SamplingError, StatisticsError
from app.model.forces import cells_per_side, compute_forces
from app.model.kernels import COINCIDENT, OK, advance_langevin
from app.model.types import SimConfig, SystemState
from app.sampler.rng import RngStream

log = get_logger(__name__)

# Ниже этого шага решётки стартовое состояние попадает в область жёсткого отталкивания
MIN_LATTICE_SPACING = 0.8
# Шум генерируется порциями, чтобы не держать в памяти всё выжигание
_NOISE_CHUNK = 1000


class SamplerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # gamma = 0 допустимо: шаг Ланжевена тогда совпадает с шагом Верле
    friction: float = Field(default=1.0, ge=0)
    langevin_step: float = Field(default=0.001, gt=0, le=0.005)
    burn_in: float = Field(default=100.0, gt=0)
    gap: float = Field(default=10.0, gt=0)

    @property
    def burn_in_steps(self) -> int:
        return max(1, round(self.burn_in / self.langevin_step))

    @property
    def gap_steps(self) -> int:
        return max(1, round(self.gap / self.langevin_step))


class EquipartitionReport(NamedTuple):
    mean_ke_per_dof: float
    standard_error: float


class NormalityReport(NamedTuple):
    skewness: float
    excess_kurtosis: float
    n_values: int


class StationarityReport(NamedTuple):
    first_half_mean: float
    second_half_mean: float
    combined_se: float
    z: float


def lattice_init(config: SimConfig) -> SystemState:
    # решётка ceil(sqrt(n)) x ceil(sqrt(n)), скорости нулевые
    side = math.ceil(math.sqrt(config.n_particles))
    spacing = config.box_edge / side
    if spacing < MIN_LATTICE_SPACING:
        raise ConfigurationError(
            f"ящик {config.box_edge} слишком мал для {config.n_particles} частиц: "
            f"шаг решётки {spacing:.4g} < {MIN_LATTICE_SPACING}"
        )
    k = np.arange(config.n_particles)
    positions = np.column_stack(((k % side + 0.5) * spacing, (k // side + 0.5) * spacing))
    return SystemState.create(positions, np.zeros_like(positions), config.box_edge)


def _ou_coefficients(config: SimConfig, sampler_cfg: SamplerConfig) -> tuple[float, float]:
    gh = sampler_cfg.friction * sampler_cfg.langevin_step
    decay = math.exp(-gh)
    noise_scale = math.sqrt(config.kT * -math.expm1(-2.0 * gh))
    return decay, noise_scale


def _langevin_chunk(
    state: SystemState,
    config: SimConfig,
    sampler_cfg: SamplerConfig,
    rng: RngStream,
    n_steps: int,
    first_step: int,
) -> SystemState:
    n = state.n_particles
    fused = sampler_cfg.friction == 0.0
    decay, noise_scale = _ou_coefficients(config, sampler_cfg)
    noise = np.empty((0, n, 2)) if fused else rng.normal((n_steps, n, 2))

    pos = state.positions.copy()
    vel = state.velocities.copy()
    disp = state.displacement.copy()
    forces = np.empty_like(pos)
    done, time, code = advance_langevin(
        pos, vel, disp, float(state.time), config.box_edge, config.r_cutoff,
        cells_per_side(config.box_edge, config.r_cutoff), sampler_cfg.langevin_step,
        decay, noise_scale, noise, fused, n_steps, forces,
    )
    if code != OK:
        reason = "совпадающие частицы" if code == COINCIDENT else "неконечная сила"
        raise SamplingError(reason, step=first_step + int(done) + 1, stream=rng.stream_index)
    return replace(state, positions=pos, velocities=vel, displacement=disp, time=float(time))


def langevin_step(
    state: SystemState,
    config: SimConfig,
    sampler_cfg: SamplerConfig,
    rng: RngStream,
) -> SystemState:
    """Один шаг кинетического Ланжевена с шагом sampler_cfg.langevin_step."""
    return _langevin_chunk(state, config, sampler_cfg, rng, 1, 0)


def langevin_run(
    state: SystemState,
    config: SimConfig,
    sampler_cfg: SamplerConfig,
    rng: RngStream,
    n_steps: int,
) -> SystemState:
    done = 0
    current = state
    while done < n_steps:
        chunk = min(_NOISE_CHUNK, n_steps - done)
        current = _langevin_chunk(current, config, sampler_cfg, rng, chunk, done)
        done += chunk
    return current


def sample_member(config: SimConfig, sampler_cfg: SamplerConfig, rng: RngStream) -> SystemState:
    state = langevin_run(lattice_init(config), config, sampler_cfg, rng, sampler_cfg.burn_in_steps)
    return state.restarted(stream_index=rng.stream_index)


def _independent_sample(config: SimConfig, sampler_cfg: SamplerConfig, root_seed: int, stream: int) -> SystemState:
    return sample_member(config, sampler_cfg, RngStream(root_seed, stream))


@log_call()
def sample_canonical(
    config: SimConfig,
    sampler_cfg: SamplerConfig,
    n_samples: int,
    root_seed: int,
    *,
    independent: bool = True,
    workers: int = 1,
) -> list[SystemState]:
    if n_samples < 1:
        raise ConfigurationError(f"n_samples должно быть >= 1, получено {n_samples}")
    stage_log("Выборка", status="старт", образцов=n_samples, независимые=independent, потоков=workers)

    if independent:
        # порядок результатов = порядок потоков, от числа процессов не зависит
        samples = Parallel(n_jobs=workers)(
            delayed(_independent_sample)(config, sampler_cfg, root_seed, k) for k in range(n_samples)
        )
    else:
        # одна цепочка на потоке 0, образцы через каждый gap
        rng = RngStream(root_seed, 0)
        state = langevin_run(lattice_init(config), config, sampler_cfg, rng, sampler_cfg.burn_in_steps)
        samples = [state.restarted(stream_index=0)]
        for _ in range(n_samples - 1):
            state = langevin_run(state, config, sampler_cfg, rng, sampler_cfg.gap_steps)
            samples.append(state.restarted(stream_index=0))

    stage_log("Выборка", status="успех", образцов=len(samples))
    return list(samples)


def potential_trace(
    state: SystemState,
    config: SimConfig,
    sampler_cfg: SamplerConfig,
    rng: RngStream,
    n_points: int,
    every: int,
) -> tuple[SystemState, np.ndarray]:
    values = np.empty(n_points)
    current = state
    for k in range(n_points):
        current = langevin_run(current, config, sampler_cfg, rng, every)
        values[k] = compute_forces(current, config).potential
    return current, values


def equipartition_report(states: Sequence[SystemState]) -> EquipartitionReport:
    if len(states) < 2:
        raise StatisticsError(f"нужно хотя бы 2 состояния, получено {len(states)}")
    per_state = np.array([0.5 * float(np.mean(s.velocities * s.velocities)) for s in states])
    centred = per_state - per_state[0]
    mean = per_state[0] + float(np.mean(centred))
    se = float(np.std(centred, ddof=1)) / math.sqrt(len(per_state))
    return EquipartitionReport(float(mean), se)


def velocity_normality(states: Sequence[SystemState]) -> NormalityReport:
    values = np.concatenate([s.velocities.ravel() for s in states])
    if values.size < 3:
        raise StatisticsError("слишком мало компонент скорости для проверки нормальности")
    return NormalityReport(
        skewness=float(stats.skew(values)),
        excess_kurtosis=float(stats.kurtosis(values, fisher=True)),
        n_values=int(values.size),
    )


def stationarity_check(values) -> StationarityReport:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 4:
        raise StatisticsError(f"нужно хотя бы 4 значения, получено {values.size}")
    half = values.size // 2
    first, second = values[:half], values[half:2 * half]
    se = math.sqrt(np.var(first, ddof=1) / first.size + np.var(second, ddof=1) / second.size)
    diff = float(np.mean(second) - np.mean(first))
    z = 0.0 if se == 0.0 else diff / se
    return StationarityReport(float(np.mean(first)), float(np.mean(second)), se, z)
