from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from app.custom_logging import get_logger, log_call, stage_log
from app.errors import ConfigurationError, StatisticsError
from app.experiments.manifest import ExperimentManifest
from app.experiments.runner import EnsembleResult, run_ensemble, sample_initial_states
from app.export.checkpoint import CheckpointStore
from app.export.csv_exporter import Table
from app.model.forces import compute_forces, compute_forces_all_pairs
from app.model.types import SimConfig, SystemState
from app.observables.displacement import ObservableSeries, msd_from_arrays, series_difference
from app.observables.histogram import ks_two_sample, make_histogram
from app.sampler.langevin import (
    equipartition_report,
    potential_trace,
    sample_member,
    stationarity_check,
    velocity_normality,
)
from app.sampler.rng import RngStream

log = get_logger(__name__)

MSD_STATISTICS = ("r2", "dx2")
# Разность считается неразличимой с нулём в пределах стольких совокупных SE
RESOLUTION_Z = 2.0
RATIO_BAND = (2.5, 5.5)
MAX_GROWTH = 10.0


@dataclass
class ExperimentOutput:
    manifest: ExperimentManifest
    tables: list[Table]
    failures: int = 0
    data: dict[str, Any] = field(default_factory=dict)


def _finest(dts) -> float:
    return min(dts)


def divergence_time(times, a, b, threshold: float) -> float | None:
    """Первое t, где |a - b| > threshold; None, если кривые не расходятся."""
    n = min(len(times), len(a), len(b))
    gap = np.abs(np.asarray(a[:n]) - np.asarray(b[:n]))
    hits = np.flatnonzero(gap > threshold)
    return float(times[hits[0]]) if hits.size else None


@log_call()
def run_trajectory_divergence(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
) -> ExperimentOutput:
    ensemble = run_ensemble(manifest, workers=workers, store=store)
    grid = ensemble.grid
    finest = manifest.dts[-1]

    curves = Table("divergence_curves", ["dt", "t", "x", "x_unwrapped"])
    summary = Table("divergence_times", ["dt", "reference_dt", "divergence_time", "status"], summary=True)
    unwrapped = {}
    for dt in ensemble.runs:
        run = ensemble.runs[dt][0]
        x0 = float(ensemble.initial_states[run.stream_index].positions[0, 0])
        unwrapped[dt] = x0 + run.dx
        for k in range(len(run.times)):
            curves.add(dt=dt, t=float(grid[k]), x=float(run.x[k]), x_unwrapped=float(unwrapped[dt][k]))

    reference = ensemble.runs[finest][0]
    times_out: dict[float, float | None] = {}
    # сравниваются развёрнутые x0 + dx, свёрнутый x прыгает на границе ящика
    for dt in dict.fromkeys(manifest.dts[:-1]):
        run = ensemble.runs[dt][0]
        if not reference.ok:
            status = "эталон не рассчитан"
            t_div = None
        else:
            t_div = divergence_time(grid, unwrapped[dt], unwrapped[finest], manifest.divergence_threshold)
            status = "ok" if run.ok else f"отказ: {run.failure}"
        times_out[dt] = t_div
        summary.add(dt=dt, reference_dt=finest, divergence_time=t_div, status=status)

    return ExperimentOutput(
        manifest=manifest,
        tables=[curves, summary],
        failures=ensemble.failure_count,
        data={"divergence_times": times_out, "ensemble": ensemble},
    )


@log_call()
def run_histogram_experiment(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
) -> ExperimentOutput:
    ensemble = run_ensemble(manifest, workers=workers, store=store)
    finest = _finest(manifest.dts)

    values = {dt: np.array([run.dx[-1] for run in runs if run.ok]) for dt, runs in ensemble.runs.items()}
    histograms = {dt: make_histogram(v, manifest.histogram_bins, manifest.histogram_range) for dt, v in values.items()}

    bins = Table("histogram", ["dt", "bin_lo", "bin_hi", "count"])
    summary = Table(
        "histogram_summary",
        ["dt", "n", "failures", "underflow", "overflow", "mean", "se",
         "ks_statistic", "ks_pvalue", "ks_critical_1pct", "ks_passes"],
        summary=True,
    )
    ks_results = {}
    for dt, hist in histograms.items():
        for k in range(hist.n_bins):
            bins.add(dt=dt, bin_lo=float(hist.edges[k]), bin_hi=float(hist.edges[k + 1]), count=int(hist.counts[k]))
        ks = None
        if dt != finest and values[dt].size and values[finest].size:
            ks = ks_two_sample(values[dt], values[finest])
            ks_results[dt] = ks
        summary.add(
            dt=dt, n=hist.total, failures=len(ensemble.failures(dt)),
            underflow=hist.underflow, overflow=hist.overflow, mean=hist.sample_mean, se=hist.sample_se,
            ks_statistic=ks.statistic if ks else None, ks_pvalue=ks.pvalue if ks else None,
            ks_critical_1pct=ks.critical_1pct if ks else None, ks_passes=ks.passes if ks else None,
        )

    return ExperimentOutput(
        manifest=manifest,
        tables=[bins, summary],
        failures=ensemble.failure_count,
        data={"histograms": histograms, "values": values, "ks": ks_results, "ensemble": ensemble},
    )


def _series_by_dt(
    ensemble: EnsembleResult,
    statistic: str,
    dts,
) -> dict[float, ObservableSeries]:
    manifest = ensemble.manifest
    # общие случайные числа: сравниваются одни и те же члены при всех dt
    members = ensemble.common_ok_members(dts) if manifest.common_random_numbers else None
    series = {}
    for dt in dts:
        dx, dy = ensemble.displacements(dt, members)
        if dx.shape[0] < 2:
            log.warning(f"dt={dt!r}: успешных членов {dx.shape[0]}, ряд {statistic} не строится")
            continue
        series[dt] = msd_from_arrays(
            ensemble.grid, dx, dy, statistic, bootstrap=manifest.bootstrap, seed=manifest.root_seed,
        )
    return series


@log_call()
def run_msd_experiment(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
) -> ExperimentOutput:
    ensemble = run_ensemble(manifest, workers=workers, store=store)
    finest = _finest(manifest.dts)

    columns = ["statistic", "dt", "t", "mean", "se", "n"]
    full = Table("msd", columns)
    zoom = Table("msd_zoom", columns)
    agreement = Table(
        "msd_agreement",
        ["statistic", "dt", "reference_dt", "fraction_within_2se", "max_abs_z"],
        summary=True,
    )
    all_series: dict[tuple[str, float], ObservableSeries] = {}
    for statistic in MSD_STATISTICS:
        series = _series_by_dt(ensemble, statistic, manifest.dts)
        for dt, s in series.items():
            all_series[(statistic, dt)] = s
            for k, t in enumerate(s.times):
                row = dict(statistic=statistic, dt=dt, t=float(t), mean=float(s.mean[k]), se=float(s.se[k]), n=s.n)
                full.add(**row)
                if t <= manifest.zoom_horizon * (1 + 1e-12):
                    zoom.add(**row)
        if finest not in series:
            continue
        for dt, s in series.items():
            if dt == finest:
                continue
            diff = series_difference(s, series[finest])
            within = np.abs(diff.difference) <= RESOLUTION_Z * diff.combined_se
            finite_z = np.abs(diff.z[np.isfinite(diff.z)])
            agreement.add(
                statistic=statistic, dt=dt, reference_dt=finest,
                fraction_within_2se=float(np.mean(within)),
                max_abs_z=float(finite_z.max()) if finite_z.size else 0.0,
            )

    return ExperimentOutput(
        manifest=manifest,
        tables=[full, zoom, agreement],
        failures=ensemble.failure_count,
        data={"series": all_series, "ensemble": ensemble},
    )


def drift_windows(times: np.ndarray, drift: np.ndarray, horizon: float) -> tuple[float, float]:
    # середина прогона [0.45T, 0.55T) и последняя десятая t >= 0.9T
    mid_mask = (times >= 0.45 * horizon) & (times < 0.55 * horizon)
    late_mask = times >= 0.9 * horizon * (1 - 1e-12)
    mid = float(drift[mid_mask].max()) if mid_mask.any() else math.nan
    late = float(drift[late_mask].max()) if late_mask.any() else math.nan
    return mid, late


@log_call()
def run_energy_drift_experiment(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
) -> ExperimentOutput:
    ensemble = run_ensemble(manifest, workers=workers, store=store)
    grid = ensemble.grid

    table = Table(
        "energy_drift",
        ["dt", "status", "max_drift", "mean_drift", "mid_drift", "late_drift", "monotone_growth", "blowup_step"],
        summary=True,
    )
    max_drift: dict[float, float] = {}
    for dt, runs in ensemble.runs.items():
        run = runs[0]
        drift = np.abs(run.energy - run.energy[0]) if run.energy.size else np.empty(0)
        if not run.ok:
            table.add(dt=dt, status="разлёт", max_drift=float(drift.max()) if drift.size else None,
                      blowup_step=run.failed_step)
            continue
        mid, late = drift_windows(grid[:drift.size], drift, manifest.horizon)
        max_drift[dt] = float(drift.max())
        table.add(
            dt=dt, status="ok", max_drift=max_drift[dt], mean_drift=float(drift.mean()),
            mid_drift=mid, late_drift=late, monotone_growth=bool(late > 2.0 * mid),
        )

    fit = Table("energy_drift_fit", ["slope", "intercept", "r_value", "n_points"], summary=True)
    positive = {dt: v for dt, v in max_drift.items() if v > 0}
    slope = math.nan
    if len(positive) >= 2:
        res = stats.linregress(np.log(list(positive)), np.log(list(positive.values())))
        slope = float(res.slope)
        fit.add(slope=slope, intercept=float(res.intercept), r_value=float(res.rvalue), n_points=len(positive))
    else:
        log.warning("Недостаточно успешных dt для наклона дрейфа энергии")
        fit.add(slope=None, intercept=None, r_value=None, n_points=len(positive))

    return ExperimentOutput(
        manifest=manifest,
        tables=[table, fit],
        failures=ensemble.failure_count,
        data={"max_drift": max_drift, "slope": slope, "ensemble": ensemble},
    )


def _resolvable(difference: float, se: float) -> bool:
    return abs(difference) > RESOLUTION_Z * se


@log_call()
def run_conjecture_table(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
) -> ExperimentOutput:
    ensemble = run_ensemble(manifest, workers=workers, store=store)
    reference = manifest.reference_dt
    checkpoints = [manifest.grid_index(t) for t in manifest.checkpoint_times]
    coarse = list(dict.fromkeys(manifest.dts))

    table = Table(
        "conjecture",
        ["statistic", "dt", "T", "mean", "reference_mean", "abs_difference", "combined_se", "paired_se",
         "z", "scaled_difference", "resolvable"],
        summary=True,
    )
    checks = Table("conjecture_checks", ["statistic", "check", "dt", "T", "value", "passes"], summary=True)
    measured: dict[tuple[str, float, float], tuple[float, float]] = {}

    for statistic in MSD_STATISTICS:
        series = _series_by_dt(ensemble, statistic, manifest.all_dts)
        if reference not in series:
            raise StatisticsError(f"эталонный ряд dt={reference!r} не построен: слишком много отказов")
        for dt in coarse:
            if dt not in series:
                continue
            diff = series_difference(series[dt], series[reference])
            for k in checkpoints:
                t = float(ensemble.grid[k])
                d = abs(float(diff.difference[k]))
                se = float(diff.combined_se[k])
                measured[(statistic, dt, t)] = (d, se)
                table.add(
                    statistic=statistic, dt=dt, T=t, mean=float(series[dt].mean[k]),
                    reference_mean=float(series[reference].mean[k]), abs_difference=d, combined_se=se,
                    paired_se=float(diff.paired_se[k]), z=float(diff.z[k]), scaled_difference=d / (dt * dt),
                    resolvable=_resolvable(d, se),
                )

        # отношение соседних dt и рост разности с T; неразрешимая разность проверку проходит
        ordered = sorted((dt for dt in coarse if dt in series), reverse=True)
        times = [float(ensemble.grid[k]) for k in checkpoints]
        for big, small in zip(ordered, ordered[1:]):
            for t in times:
                d_big, se_big = measured[(statistic, big, t)]
                d_small, se_small = measured[(statistic, small, t)]
                ratio = d_big / d_small if d_small > 0 else math.inf
                unresolved = not _resolvable(d_big, se_big) and not _resolvable(d_small, se_small)
                passes = unresolved or RATIO_BAND[0] <= ratio <= RATIO_BAND[1]
                checks.add(statistic=statistic, check=f"ratio_to_{small!r}", dt=big, T=t, value=ratio, passes=passes)
        if len(times) >= 2:
            first, last = min(times), max(times)
            for dt in ordered:
                d_first, _ = measured[(statistic, dt, first)]
                d_last, se_last = measured[(statistic, dt, last)]
                growth = d_last / d_first if d_first > 0 else math.inf
                passes = not _resolvable(d_last, se_last) or growth <= MAX_GROWTH
                checks.add(statistic=statistic, check=f"growth_{first!r}_to_{last!r}", dt=dt, T=last,
                           value=growth, passes=passes)

    return ExperimentOutput(
        manifest=manifest,
        tables=[table, checks],
        failures=ensemble.failure_count,
        data={"measured": measured, "ensemble": ensemble},
    )


def force_mismatches(states: list[SystemState], config: SimConfig) -> int:
    bad = 0
    for state in states:
        cell = compute_forces(state, config)
        naive = compute_forces_all_pairs(state, config)
        if not (np.array_equal(cell.forces, naive.forces) and cell.potential == naive.potential):
            bad += 1
    return bad


@log_call()
def run_sampling(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
    check_forces: bool = False,
) -> ExperimentOutput:
    streams = list(range(manifest.ensemble))
    states = sample_initial_states(manifest, streams, workers=workers, store=store)
    ordered = [states[s] for s in streams]

    samples = Table("samples", ["member", "stream", "particle", "x", "y", "vx", "vy"])
    for member, state in enumerate(ordered):
        for i in range(state.n_particles):
            samples.add(
                member=member, stream=state.stream_index, particle=i,
                x=float(state.positions[i, 0]), y=float(state.positions[i, 1]),
                vx=float(state.velocities[i, 0]), vy=float(state.velocities[i, 1]),
            )

    report = Table("sample_report", ["quantity", "value", "se"], summary=True)
    data: dict[str, Any] = {"states": ordered}
    if len(ordered) >= 2:
        eq = equipartition_report(ordered)
        report.add(quantity="mean_ke_per_dof", value=eq.mean_ke_per_dof, se=eq.standard_error)
        data["equipartition"] = eq
    else:
        log.warning("Для отчёта о равнораспределении нужно хотя бы 2 состояния")
    normality = velocity_normality(ordered)
    report.add(quantity="velocity_skewness", value=normality.skewness)
    report.add(quantity="velocity_excess_kurtosis", value=normality.excess_kurtosis)
    report.add(quantity="velocity_components", value=normality.n_values)
    data["normality"] = normality

    if manifest.stationarity_points >= 4:
        # отдельный поток после потоков членов
        rng = RngStream(manifest.root_seed, manifest.ensemble)
        chain = sample_member(manifest.sim, manifest.sampler, rng)
        every = max(1, manifest.sampler.gap_steps // 10)
        _, trace = potential_trace(chain, manifest.sim, manifest.sampler, rng, manifest.stationarity_points, every)
        check = stationarity_check(trace)
        report.add(quantity="potential_first_half_mean", value=check.first_half_mean)
        report.add(quantity="potential_second_half_mean", value=check.second_half_mean, se=check.combined_se)
        report.add(quantity="potential_stationarity_z", value=check.z)
        data["stationarity"] = check

    if check_forces:
        bad = force_mismatches(ordered, manifest.sim)
        report.add(quantity="force_mismatches", value=bad)
        data["force_mismatches"] = bad
        stage_log("Проверка сил", status="успех" if bad == 0 else "расхождение", состояний=len(ordered), расхождений=bad)

    return ExperimentOutput(manifest=manifest, tables=[samples, report], failures=0, data=data)


EXPERIMENT_RUNNERS = {
    "sample": run_sampling,
    "divergence": run_trajectory_divergence,
    "histogram": run_histogram_experiment,
    "msd": run_msd_experiment,
    "energy-drift": run_energy_drift_experiment,
    "conjecture": run_conjecture_table,
}


def runner_for(name: str):
    try:
        return EXPERIMENT_RUNNERS[name]
    except KeyError:
        raise ConfigurationError(f"неизвестный эксперимент {name!r}")
