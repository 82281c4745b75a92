from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from app.custom_logging import get_logger, member_log, stage_log
from app.errors import AlignmentError, DomainError, EnergyBlowUpError, NumericalError
from app.experiments.manifest import ExperimentManifest, manifest_digest
from app.export.checkpoint import CheckpointStore
from app.integrator.verlet import ObservationBuffer, StepObservation, integrate
from app.model.types import SimConfig, SystemState
from app.observables.displacement import grids_match
from app.sampler.langevin import langevin_run, lattice_init, sample_member
from app.sampler.rng import RngStream
from app.utils.formatting import format_seconds

log = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class MemberRun:
    """Ряды наблюдений одного члена ансамбля при одном dt; при отказе ряды обрезаны."""

    member: int
    stream_index: int
    dt: float
    times: np.ndarray
    energy: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    x: np.ndarray
    failure: str | None = None
    failed_step: int | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_dict(self) -> dict[str, Any]:
        return {
            "member": self.member,
            "stream_index": self.stream_index,
            "dt": self.dt,
            "times": self.times.tolist(),
            "energy": self.energy.tolist(),
            "dx": self.dx.tolist(),
            "dy": self.dy.tolist(),
            "x": self.x.tolist(),
            "failure": self.failure,
            "failed_step": self.failed_step,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MemberRun":
        arrays = {k: np.asarray(data[k], dtype=np.float64) for k in ("times", "energy", "dx", "dy", "x")}
        return cls(
            member=int(data["member"]),
            stream_index=int(data["stream_index"]),
            dt=float(data["dt"]),
            failure=data.get("failure"),
            failed_step=data.get("failed_step"),
            **arrays,
        )


@dataclass(eq=False)
class EnsembleResult:
    manifest: ExperimentManifest
    initial_states: dict[int, SystemState]
    # dt -> прогоны членов по возрастанию номера
    runs: dict[float, list[MemberRun]] = field(default_factory=dict)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.manifest.n_observations) * self.manifest.observe_interval

    @property
    def failure_count(self) -> int:
        return sum(1 for runs in self.runs.values() for run in runs if not run.ok)

    def failures(self, dt: float) -> list[MemberRun]:
        return [run for run in self.runs[dt] if not run.ok]

    def common_ok_members(self, dts=None) -> list[int]:
        """Члены без отказов при всех указанных dt (для парных сравнений)."""
        dts = list(self.runs) if dts is None else list(dts)
        members = None
        for dt in dts:
            ok = {run.member for run in self.runs[dt] if run.ok}
            members = ok if members is None else members & ok
        return sorted(members or ())

    def displacements(self, dt: float, members=None) -> tuple[np.ndarray, np.ndarray]:
        """Смещения метки (члены x время) успешных прогонов, в порядке номеров членов."""
        chosen = self.runs[dt] if members is None else [r for r in self.runs[dt] if r.member in set(members)]
        chosen = [run for run in chosen if run.ok]
        for run in chosen:
            if not grids_match(run.times, self.grid):
                raise AlignmentError(f"сетка члена {run.member} при dt={run.dt!r} не совпадает с номинальной")
        if not chosen:
            empty = np.empty((0, len(self.grid)))
            return empty, empty.copy()
        return np.vstack([r.dx for r in chosen]), np.vstack([r.dy for r in chosen])


class _EnergyGuard:
    """Приёмник наблюдений с проверкой разлёта энергии относительно H(0)."""

    def __init__(self, buffer: ObservationBuffer, limit: float):
        self.buffer = buffer
        self.limit = limit
        self.initial: float | None = None

    def __call__(self, obs: StepObservation) -> None:
        self.buffer(obs)
        total = obs.energy.total
        if self.initial is None:
            self.initial = total
        drift = abs(total - self.initial)
        if not math.isfinite(total) or drift > self.limit:
            raise EnergyBlowUpError(step=obs.step, drift=drift)


def stream_index_for(manifest: ExperimentManifest, member: int, dt_index: int) -> int:
    # без общих случайных чисел каждый dt получает свой блок потоков
    if manifest.common_random_numbers:
        return member
    return dt_index * manifest.ensemble + member


def run_member(manifest: ExperimentManifest, state: SystemState, dt: float, member: int) -> MemberRun:
    config = manifest.sim_for(dt)
    n_steps, every = manifest.steps_for(dt)
    buffer = ObservationBuffer()
    guard = _EnergyGuard(buffer, manifest.blowup_energy_per_particle * config.n_particles)
    failure, failed_step = None, None
    try:
        integrate(state, config, n_steps, every, guard)
    except EnergyBlowUpError as e:
        failure, failed_step = f"разлёт энергии: {e}", e.step
    except (NumericalError, DomainError) as e:
        failure, failed_step = str(e), getattr(e, "step", None)
    arrays = buffer.arrays()
    return MemberRun(
        member=member,
        stream_index=state.stream_index if state.stream_index is not None else member,
        dt=dt,
        times=arrays["time"],
        energy=arrays["energy"],
        dx=arrays["dx"],
        dy=arrays["dy"],
        x=arrays["x"],
        failure=failure,
        failed_step=failed_step,
    )


def _sample_stream(sim: SimConfig, manifest: ExperimentManifest, stream: int) -> tuple[SystemState, dict]:
    rng = RngStream(manifest.root_seed, stream)
    state = sample_member(sim, manifest.sampler, rng)
    return state, rng.get_state()


def _chain_samples(
    manifest: ExperimentManifest,
    streams: list[int],
    start: tuple[SystemState, dict] | None = None,
) -> dict[int, tuple[SystemState, dict]]:
    # одна цепочка на потоке 0: образец после выжигания и далее через каждый gap;
    # start - последний сохранённый образец с состоянием ГСЧ, цепочка продолжается с него
    sampler = manifest.sampler
    if start is None:
        rng = RngStream(manifest.root_seed, 0)
        state = langevin_run(lattice_init(manifest.sim), manifest.sim, sampler, rng, sampler.burn_in_steps)
    else:
        state, rng = start[0], RngStream.from_state(start[1])
    samples = {}
    for k, stream in enumerate(streams):
        if k > 0 or start is not None:
            state = langevin_run(state, manifest.sim, sampler, rng, sampler.gap_steps)
        samples[stream] = (state.restarted(stream_index=stream), rng.get_state())
    return samples


def sample_initial_states(
    manifest: ExperimentManifest,
    streams: list[int],
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
) -> dict[int, SystemState]:
    """Начальные состояния по номерам потоков; готовые берутся из контрольных точек."""
    started = time.perf_counter()
    cached: dict[int, tuple[SystemState, dict]] = {}
    missing = []
    for stream in streams:
        loaded = store.load_state(stream) if store else None
        if loaded is not None:
            cached[stream] = loaded
        else:
            missing.append(stream)
    states = {stream: state for stream, (state, _) in cached.items()}
    stage_log("Выборка начальных условий", status="старт", нужно=len(streams), из_контрольных_точек=len(states))

    if manifest.independent_chains:
        produced = Parallel(n_jobs=workers)(
            delayed(_sample_stream)(manifest.sim, manifest, stream) for stream in missing
        )
        fresh = dict(zip(missing, produced))
    elif missing:
        # цепочка продолжается с последнего сохранённого образца до первого пропуска
        prefix = streams.index(missing[0])
        start = cached[streams[prefix - 1]] if prefix else None
        fresh = _chain_samples(manifest, streams[prefix:], start)
        fresh = {s: fresh[s] for s in missing}
    else:
        fresh = {}

    for stream, (state, rng_state) in fresh.items():
        states[stream] = state
        member_log(stream, status="выбран", comment="начальное условие", поток=stream)
        if store:
            store.save_state(stream, state, rng_state)

    stage_log(
        "Выборка начальных условий", status="успех", состояний=len(states),
        время=format_seconds(time.perf_counter() - started),
    )
    return {stream: states[stream] for stream in streams}


def _run_name(member: int, dt: float) -> str:
    return f"run_{member:06d}_dt{dt!r}"


def run_ensemble(
    manifest: ExperimentManifest,
    *,
    workers: int = 1,
    store: CheckpointStore | None = None,
    dts: tuple[float, ...] | None = None,
) -> EnsembleResult:
    """
    Этап 1: начальные условия (по потоку на члена). Этап 2: задачи (член, dt) в пуле.
    Сборка идёт в порядке номеров членов, результат не зависит от числа процессов.
    """
    dts = manifest.all_dts if dts is None else dts
    members = range(manifest.ensemble)
    streams_by_task = {
        (member, dt): stream_index_for(manifest, member, d) for d, dt in enumerate(dts) for member in members
    }
    streams = sorted(set(streams_by_task.values()))
    initial = sample_initial_states(manifest, streams, workers=workers, store=store)

    started = time.perf_counter()
    tasks = list(streams_by_task)
    done: dict[tuple[int, float], MemberRun] = {}
    pending = []
    for member, dt in tasks:
        cached = store.load_payload(_run_name(member, dt)) if store else None
        if cached is not None:
            done[(member, dt)] = MemberRun.from_dict(cached)
        else:
            pending.append((member, dt))
    stage_log("Интегрирование ансамбля", status="старт", задач=len(tasks), из_контрольных_точек=len(done))

    produced = Parallel(n_jobs=workers)(
        delayed(run_member)(manifest, initial[streams_by_task[task]], task[1], task[0]) for task in pending
    )
    for task, run in zip(pending, produced):
        done[task] = run
        if run.ok:
            member_log(run.member, status="проинтегрирован", comment=f"dt={run.dt!r}", наблюдений=len(run.times))
        else:
            member_log(run.member, status="ошибка", comment=f"dt={run.dt!r}", ошибка=run.failure)
        if store:
            store.save_payload(_run_name(*task), run.to_dict())

    result = EnsembleResult(manifest=manifest, initial_states=initial)
    for dt in dts:
        result.runs[dt] = [done[(member, dt)] for member in members]
    stage_log(
        "Интегрирование ансамбля", status="успех", задач=len(tasks), отказов=result.failure_count,
        время=format_seconds(time.perf_counter() - started),
    )
    return result


def open_store(manifest: ExperimentManifest, directory, *, resume: bool) -> CheckpointStore:
    digest = manifest_digest(manifest)
    return CheckpointStore(directory=directory / f"{manifest.name}-{digest[:12]}", digest=digest, resume=resume)
