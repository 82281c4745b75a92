from app.sampler.langevin import (
    EquipartitionReport,
    NormalityReport,
    SamplerConfig,
    StationarityReport,
    equipartition_report,
    langevin_run,
    langevin_step,
    lattice_init,
    potential_trace,
    sample_canonical,
    sample_member,
    stationarity_check,
    velocity_normality,
)
from app.sampler.rng import ALGORITHM, RngStream

__all__ = [
    "EquipartitionReport", "NormalityReport", "SamplerConfig", "StationarityReport",
    "equipartition_report", "langevin_run", "langevin_step", "lattice_init", "potential_trace",
    "sample_canonical", "sample_member", "stationarity_check", "velocity_normality",
    "ALGORITHM", "RngStream",
]
