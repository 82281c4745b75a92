from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.model.potential import cutoff_jump

VerletVariant = Literal["leapfrog", "as-printed"]


class SimConfig(BaseModel):
    """Физические и численные параметры системы (по умолчанию 100 частиц в ящике 11.5 x 11.5)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_particles: int = Field(default=100, ge=2)
    box_edge: float = Field(default=11.5, gt=0)
    r_cutoff: float = Field(default=2.5, gt=0)
    temperature: float = Field(default=1.0, gt=0)
    boltzmann_k: float = Field(default=1.0, gt=0)
    dt: float = Field(default=0.01, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    # Сдвиг энергии на V(r_cutoff); силы не меняются
    shift_potential: bool = False
    # "leapfrog": q_{n+1} = q_{n+1/2} + p_{n+1} dt/2; "as-printed": q_{n+1} = q_n + p_{n+1} dt/2
    verlet_variant: VerletVariant = "leapfrog"

    @model_validator(mode="after")
    def _check_cutoff(self) -> "SimConfig":
        if self.r_cutoff > self.box_edge / 2:
            raise ValueError(
                f"r_cutoff={self.r_cutoff} больше половины ребра ящика {self.box_edge}: "
                "минимальный образ не определён"
            )
        return self

    @property
    def kT(self) -> float:
        return self.boltzmann_k * self.temperature

    @property
    def energy_shift(self) -> float:
        return cutoff_jump(self.r_cutoff) if self.shift_potential else 0.0


@dataclass(frozen=True, eq=False)
class SystemState:
    """
    Состояние системы: свёрнутые координаты в [0, L), скорости (масса 1),
    развёрнутое смещение с момента создания и время.
    """

    positions: np.ndarray
    velocities: np.ndarray
    displacement: np.ndarray
    time: float = 0.0
    # Номер потока ГСЧ, которым получено состояние (для выборок)
    stream_index: int | None = field(default=None)

    @classmethod
    def create(
        cls,
        positions,
        velocities,
        box_edge: float,
        *,
        stream_index: int | None = None,
    ) -> "SystemState":
        pos = wrap_positions(np.array(positions, dtype=np.float64, copy=True), box_edge)
        vel = np.array(velocities, dtype=np.float64, copy=True)
        if pos.ndim != 2 or pos.shape[1] != 2 or vel.shape != pos.shape:
            raise ValueError(f"ожидались массивы формы (n, 2), получено {pos.shape} и {vel.shape}")
        return cls(
            positions=np.ascontiguousarray(pos),
            velocities=np.ascontiguousarray(vel),
            displacement=np.zeros_like(pos),
            time=0.0,
            stream_index=stream_index,
        )

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    def restarted(self, *, stream_index: int | None = None) -> "SystemState":
        """То же фазовое состояние, смещение и время обнулены."""
        return SystemState(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            displacement=np.zeros_like(self.positions),
            time=0.0,
            stream_index=self.stream_index if stream_index is None else stream_index,
        )

    def same_as(self, other: "SystemState") -> bool:
        """Побитовое совпадение фазового состояния, смещения и времени."""
        return (
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.velocities, other.velocities)
            and np.array_equal(self.displacement, other.displacement)
            and self.time == other.time
        )


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    potential: float
    total: float

    @classmethod
    def from_parts(cls, kinetic: float, potential: float) -> "EnergyReport":
        return cls(kinetic=kinetic, potential=potential, total=kinetic + potential)


def wrap_positions(positions: np.ndarray, box_edge: float) -> np.ndarray:
    wrapped = np.mod(positions, box_edge)
    # np.mod(-1e-17, L) округляется до L
    wrapped[wrapped >= box_edge] = 0.0
    return wrapped
