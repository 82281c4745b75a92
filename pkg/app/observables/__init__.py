from app.observables.displacement import (
    STATISTICS,
    DisplacementRecord,
    ObservableSeries,
    SeriesDifference,
    grids_match,
    msd_from_arrays,
    msd_series,
    records_from_arrays,
    series_difference,
    statistic_values,
    tracer_displacement,
)
from app.observables.histogram import Histogram, KsResult, ks_critical_1pct, ks_two_sample, make_histogram

__all__ = [
    "STATISTICS", "DisplacementRecord", "ObservableSeries", "SeriesDifference", "grids_match",
    "msd_from_arrays", "msd_series", "records_from_arrays", "series_difference", "statistic_values",
    "tracer_displacement", "Histogram", "KsResult", "ks_critical_1pct", "ks_two_sample", "make_histogram",
]
