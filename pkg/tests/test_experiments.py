import math

import numpy as np
import pytest

from app.experiments import runner, studies
from app.experiments.manifest import build_manifest
from app.experiments.runner import EnsembleResult, open_store, run_ensemble, run_member
from app.experiments.studies import divergence_time, drift_windows
from app.main import EXIT_NUMERICAL, EXIT_OK, run_experiment
from app.model.types import SystemState

TINY = {
    "sim": {"n_particles": 9, "box_edge": 6.0},
    "sampler": {"burn_in": 0.5, "langevin_step": 0.005, "gap": 0.1},
    "root_seed": 11,
    "dts": (0.01, 0.005),
    "horizon": 0.2,
    "observe_interval": 0.05,
}


def tiny(name: str, **overrides):
    return build_manifest(name, TINY, overrides)


def _csv_files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


def test_divergence_time_helper():
    times = np.arange(5) * 0.1
    a = np.array([0.0, 0.1, 0.2, 0.9, 2.0])
    b = np.zeros(5)
    assert divergence_time(times, a, b, 0.5) == pytest.approx(0.3)
    assert divergence_time(times, b, b, 0.5) is None
    assert divergence_time(times, a[:3], b, 0.5) is None


def test_drift_windows():
    times = np.arange(101) * 1.0
    drift = times * 0.01
    mid, late = drift_windows(times, drift, 100.0)
    assert mid == pytest.approx(0.54)
    assert late == pytest.approx(1.0)


def test_common_random_numbers_share_initial_states():
    shared = run_ensemble(tiny("msd", ensemble=3))
    assert sorted(shared.initial_states) == [0, 1, 2]
    first = [run.dx[0] for run in shared.runs[0.01]]
    assert first == [0.0, 0.0, 0.0]
    for a, b in zip(shared.runs[0.01], shared.runs[0.005]):
        assert a.stream_index == b.stream_index == a.member

    separate = run_ensemble(tiny("msd", ensemble=3, common_random_numbers=False))
    assert sorted(separate.initial_states) == list(range(6))
    assert [run.stream_index for run in separate.runs[0.005]] == [3, 4, 5]


def test_ensemble_grid_and_alignment():
    result = run_ensemble(tiny("msd", ensemble=2))
    assert isinstance(result, EnsembleResult)
    assert result.grid == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    dx, dy = result.displacements(0.005)
    assert dx.shape == dy.shape == (2, 5)
    assert result.failure_count == 0
    assert result.common_ok_members() == [0, 1]


def test_identical_dts_never_diverge():
    output = studies.run_trajectory_divergence(tiny("divergence", dts=(0.01, 0.01)))
    assert output.data["divergence_times"] == {0.01: None}
    summary = output.tables[1]
    assert summary.rows[0]["status"] == "ok"


def test_divergence_curves_cover_every_dt():
    output = studies.run_trajectory_divergence(tiny("divergence"))
    curves = output.tables[0]
    assert len(curves.rows) == 2 * 5
    start = [row for row in curves.rows if row["t"] == 0.0]
    assert len({row["x"] for row in start}) == 1
    assert all(0.0 <= row["x"] < 6.0 for row in curves.rows)


def test_single_member_histogram():
    output = studies.run_histogram_experiment(tiny("histogram", ensemble=1))
    for hist in output.data["histograms"].values():
        assert hist.total == 1
        assert hist.counts.sum() + hist.underflow + hist.overflow == 1
    summary = output.tables[1]
    assert [row["dt"] for row in summary.rows] == [0.01, 0.005]
    assert summary.rows[1]["ks_statistic"] is None


def test_histogram_compares_against_finest_dt():
    output = studies.run_histogram_experiment(tiny("histogram", ensemble=6))
    assert list(output.data["ks"]) == [0.01]
    assert len(output.tables[0].rows) == 2 * 40


def test_msd_tables():
    manifest = tiny("msd", ensemble=4, zoom_horizon=0.1)
    output = studies.run_msd_experiment(manifest)
    full, zoom, agreement = output.tables
    assert len(full.rows) == 2 * 2 * 5
    assert len(zoom.rows) == 2 * 2 * 3
    assert [(row["statistic"], row["dt"]) for row in agreement.rows] == [("r2", 0.01), ("dx2", 0.01)]
    series = output.data["series"][("r2", 0.005)]
    assert series.mean[0] == 0.0 and series.n == 4
    assert all(0.0 <= row["fraction_within_2se"] <= 1.0 for row in agreement.rows)


def test_conjecture_with_reference_step_is_zero():
    manifest = tiny("conjecture", ensemble=3, dts=(0.01,), reference_dt=0.01, checkpoint_times=(0.1, 0.2))
    output = studies.run_conjecture_table(manifest)
    table = output.tables[0]
    assert len(table.rows) == 2 * 2
    for row in table.rows:
        assert row["abs_difference"] == 0.0
        assert row["z"] == 0.0
        assert row["resolvable"] is False


def test_conjecture_checks():
    manifest = tiny(
        "conjecture", ensemble=3, dts=(0.02, 0.01), reference_dt=0.005,
        observe_interval=0.1, checkpoint_times=(0.1, 0.2),
    )
    output = studies.run_conjecture_table(manifest)
    table, checks = output.tables
    assert len(table.rows) == 2 * 2 * 2
    assert {row["check"] for row in checks.rows} == {"ratio_to_0.01", "growth_0.1_to_0.2"}
    assert len(checks.rows) == 2 * 2 + 2 * 2
    for (statistic, dt, t), (d, se) in output.data["measured"].items():
        assert d >= 0.0 and se >= 0.0
        assert statistic in ("r2", "dx2") and dt in (0.02, 0.01) and t in (0.1, 0.2)


def test_energy_blowup_is_reported_not_raised():
    manifest = build_manifest(
        "energy-drift",
        {"sim": {"n_particles": 2, "box_edge": 6.0}, "dts": (0.1, 0.05, 0.025), "observe_interval": 0.1,
         "horizon": 1.0},
    )
    state = SystemState.create([[2.0, 3.0], [3.2, 3.0]], [[5.0, 0.0], [-5.0, 0.0]], 6.0, stream_index=0)
    run = run_member(manifest, state, 0.1, member=0)
    assert not run.ok
    assert run.failed_step == 1
    assert "разлёт" in run.failure
    assert len(run.times) == 2


def test_blowup_counts_as_failure():
    output = studies.run_energy_drift_experiment(
        tiny("energy-drift", dts=(0.01, 0.005, 0.0025), blowup_energy_per_particle=1e-12)
    )
    assert output.failures == 3
    assert all(row["status"] == "разлёт" for row in output.tables[0].rows)
    assert math.isnan(output.data["slope"])


def test_energy_drift_shrinks_with_step():
    output = studies.run_energy_drift_experiment(tiny("energy-drift", dts=(0.01, 0.005, 0.0025), horizon=0.5))
    drift = output.data["max_drift"]
    assert drift[0.01] > drift[0.005] > drift[0.0025] > 0.0
    assert 1.0 < output.data["slope"] < 3.0


def test_sampling_report():
    manifest = tiny("sample", ensemble=3, stationarity_points=8)
    output = studies.run_sampling(manifest, check_forces=True)
    samples, report = output.tables
    assert len(samples.rows) == 3 * 9
    assert output.data["force_mismatches"] == 0
    quantities = [row["quantity"] for row in report.rows]
    assert "mean_ke_per_dof" in quantities and "potential_stationarity_z" in quantities
    assert output.data["normality"].n_values == 3 * 9 * 2


def test_worker_count_does_not_change_output(tmp_path):
    manifest = tiny("msd", ensemble=4)
    assert run_experiment(manifest, out_dir=tmp_path / "one", workers=1) == EXIT_OK
    assert run_experiment(manifest, out_dir=tmp_path / "eight", workers=8) == EXIT_OK
    one, eight = _csv_files(tmp_path / "one"), _csv_files(tmp_path / "eight")
    assert set(one) == {"msd.csv", "msd_zoom.csv", "msd_agreement.csv"}
    assert one == eight
    assert (tmp_path / "one" / "msd_summary.xlsx").exists()


def test_resume_reuses_checkpoints(tmp_path, monkeypatch):
    manifest = tiny("msd", ensemble=3)
    out = tmp_path / "out"
    assert run_experiment(manifest, out_dir=out) == EXIT_OK
    first = _csv_files(out)

    def _fail(*args, **kwargs):
        raise AssertionError("пересчёт при наличии контрольной точки")

    monkeypatch.setattr(runner, "run_member", _fail)
    monkeypatch.setattr(runner, "sample_member", _fail)
    assert run_experiment(manifest, out_dir=out, resume=True) == EXIT_OK
    assert _csv_files(out) == first


def test_checkpoints_from_other_manifest_are_ignored(tmp_path):
    manifest = tiny("msd", ensemble=2)
    store = open_store(manifest, tmp_path, resume=True)
    run_ensemble(manifest, store=store)
    other = tiny("msd", ensemble=2, root_seed=12)
    other_store = open_store(other, tmp_path, resume=True)
    assert other_store.directory != store.directory
    assert store.load_state(0) is not None
    assert other_store.load_state(0) is None


def test_chain_resumes_from_last_saved_sample(tmp_path, monkeypatch):
    manifest = tiny("msd", ensemble=4, independent_chains=False)
    streams = [0, 1, 2, 3]
    full = runner.sample_initial_states(manifest, streams)
    store = open_store(manifest, tmp_path, resume=True)
    runner.sample_initial_states(manifest, streams, store=store)

    def _fail(*args, **kwargs):
        raise AssertionError("цепочка начата заново с решётки")

    monkeypatch.setattr(runner, "lattice_init", _fail)
    # хвост цепочки и пропуск в середине
    for lost in ((2, 3), (1,)):
        for stream in lost:
            (store.directory / f"state_{stream:06d}.json").unlink()
        resumed = runner.sample_initial_states(manifest, streams, store=store)
        for stream in streams:
            assert resumed[stream].same_as(full[stream])
            assert store.load_state(stream) is not None


def test_failures_give_numerical_exit_code(tmp_path):
    manifest = tiny("histogram", ensemble=2, blowup_energy_per_particle=1e-12)
    assert run_experiment(manifest, out_dir=tmp_path) == EXIT_NUMERICAL
    header = (tmp_path / "histogram_summary.csv").read_text(encoding="utf-8").splitlines()
    assert "# failures = 4" in header


# зёрна независимых начальных условий для медианы времени расхождения
DIVERGENCE_SEEDS = (1, 2, 3, 4, 5, 6, 7)


@pytest.mark.slow
def test_full_scale_energy_drift_scales_as_dt_squared():
    output = studies.run_energy_drift_experiment(build_manifest("energy-drift", overrides={"root_seed": 2024}),
                                                 workers=3)
    assert output.failures == 0
    rows = {row["dt"]: row for row in output.tables[0].rows}
    assert rows[0.01]["status"] == "ok"
    assert rows[0.01]["late_drift"] <= 2.0 * rows[0.01]["mid_drift"]
    assert rows[0.01]["monotone_growth"] is False
    assert output.data["slope"] == pytest.approx(2.0, abs=0.4)


@pytest.mark.slow
def test_full_scale_divergence_median_over_initial_conditions():
    # у одного начального условия время расхождения сильно разбросано, сравниваются медианы
    checked = (0.01, 0.001, 0.0001)
    times = {dt: [] for dt in checked}
    for seed in DIVERGENCE_SEEDS:
        output = studies.run_trajectory_divergence(build_manifest("divergence", overrides={"root_seed": seed}),
                                                   workers=4)
        assert output.failures == 0
        for dt in checked:
            t = output.data["divergence_times"][dt]
            times[dt].append(math.inf if t is None else t)
    medians = [float(np.median(times[dt])) for dt in checked]
    assert 0.5 <= medians[0] <= 3.0
    assert medians[0] <= medians[1] <= medians[2]


@pytest.mark.slow
def test_full_scale_histograms_pass_ks():
    manifest = build_manifest("histogram", overrides={"dts": (0.01, 0.0025), "root_seed": 2024})
    assert manifest.ensemble == 1000 and manifest.horizon == 10.0
    output = studies.run_histogram_experiment(manifest, workers=8)
    assert output.failures == 0
    ks = output.data["ks"][0.01]
    assert ks.statistic < ks.critical_1pct
    assert ks.passes


@pytest.mark.slow
def test_full_scale_msd_agrees_across_steps():
    # горизонт 20 вместо 100: шаг 0.001 до T = 100 занимает часы
    manifest = build_manifest("msd", overrides={"dts": (0.01, 0.001), "horizon": 20.0, "root_seed": 2024})
    assert manifest.ensemble == 200
    output = studies.run_msd_experiment(manifest, workers=8)
    assert output.failures == 0
    r2 = [row for row in output.tables[2].rows if row["statistic"] == "r2"]
    assert len(r2) == 1
    assert r2[0]["fraction_within_2se"] >= 0.95


@pytest.mark.slow
def test_full_scale_conjecture_checks_pass():
    output = studies.run_conjecture_table(build_manifest("conjecture", overrides={"root_seed": 2024}), workers=8)
    assert output.failures == 0
    table, checks = output.tables
    assert {row["T"] for row in table.rows} == {1.0, 10.0, 100.0}
    failed = [(row["statistic"], row["check"], row["dt"], row["T"], row["value"]) for row in checks.rows
              if not row["passes"]]
    assert failed == []
