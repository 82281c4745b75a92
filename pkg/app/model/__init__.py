from app.model.forces import (
    CellList,
    ForceField,
    build_cell_list,
    cells_per_side,
    compute_forces,
    compute_forces_all_pairs,
    kinetic_energy,
    total_energy,
)
from app.model.geometry import min_image_disp, torus_distance
from app.model.potential import R_MIN, lj_pair_force, lj_potential
from app.model.types import EnergyReport, SimConfig, SystemState, wrap_positions

__all__ = [
    "CellList", "ForceField", "build_cell_list", "cells_per_side", "compute_forces",
    "compute_forces_all_pairs", "kinetic_energy", "total_energy", "min_image_disp",
    "torus_distance", "R_MIN", "lj_pair_force", "lj_potential", "EnergyReport",
    "SimConfig", "SystemState", "wrap_positions",
]
