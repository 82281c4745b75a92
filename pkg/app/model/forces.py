from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from app.errors import DomainError
from app.model.kernels import accumulate_all_pairs, accumulate_cells, bin_particles
from app.model.types import EnergyReport, SimConfig, SystemState


class ForceField(NamedTuple):
    forces: np.ndarray
    potential: float


@dataclass(frozen=True)
class CellList:
    """
    Разбиение ящика на m x m ячеек со стороной >= r_cutoff.
    Частицы ячейки c: members[cell_start[c]:cell_start[c + 1]] по возрастанию индекса.
    """

    cells_per_side: int
    cell_edge: float
    cell_of: np.ndarray
    cell_start: np.ndarray
    members: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.cells_per_side * self.cells_per_side

    @property
    def buckets(self) -> list[np.ndarray]:
        return [self.members[self.cell_start[c]:self.cell_start[c + 1]] for c in range(self.n_cells)]


def cells_per_side(box_edge: float, r_cutoff: float) -> int:
    return max(1, int(math.floor(box_edge / r_cutoff)))


def build_cell_list(state: SystemState, config: SimConfig) -> CellList:
    m = cells_per_side(config.box_edge, config.r_cutoff)
    cell_of, start, members = bin_particles(state.positions, config.box_edge, m)
    return CellList(
        cells_per_side=m,
        cell_edge=config.box_edge / m,
        cell_of=cell_of,
        cell_start=start,
        members=members,
    )


def _raise_coincident(state: SystemState, i: int) -> None:
    raise DomainError(f"частица {i} совпадает с соседней, позиция {state.positions[i].tolist()}")


def compute_forces(state: SystemState, config: SimConfig, cells: CellList | None = None) -> ForceField:
    """Силы и потенциальная энергия через список ячеек; побитово равны полному перебору пар."""
    if cells is None:
        cells = build_cell_list(state, config)
    forces = np.zeros_like(state.positions)
    potential, bad = accumulate_cells(
        state.positions, config.box_edge, config.r_cutoff, config.energy_shift,
        cells.cells_per_side, cells.cell_of, cells.cell_start, cells.members, forces,
    )
    if bad >= 0:
        _raise_coincident(state, bad)
    return ForceField(forces, float(potential))


def compute_forces_all_pairs(state: SystemState, config: SimConfig) -> ForceField:
    """Эталон O(n^2): все пары в порядке возрастания (i, j)."""
    forces = np.zeros_like(state.positions)
    potential, bad = accumulate_all_pairs(
        state.positions, config.box_edge, config.r_cutoff, config.energy_shift, forces,
    )
    if bad >= 0:
        _raise_coincident(state, bad)
    return ForceField(forces, float(potential))


def kinetic_energy(state: SystemState) -> float:
    return 0.5 * float(np.sum(state.velocities * state.velocities))


def total_energy(state: SystemState, config: SimConfig) -> EnergyReport:
    _, potential = compute_forces(state, config)
    return EnergyReport.from_parts(kinetic_energy(state), potential)
