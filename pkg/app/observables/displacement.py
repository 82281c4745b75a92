from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from app.errors import AlignmentError, StatisticsError
from app.integrator.verlet import TRACER
from app.model.types import SystemState

Statistic = Literal["r2", "dx2", "dy2"]
STATISTICS: tuple[Statistic, ...] = ("r2", "dx2", "dy2")

# Сетки разных dt номинальные (k * шаг наблюдения), n * dt даёт ошибку округления
GRID_RTOL = 1e-9
GRID_ATOL = 1e-12


@dataclass(frozen=True)
class DisplacementRecord:
    member: int
    time: float
    dx: float
    dy: float
    r: float


def tracer_displacement(state: SystemState, member: int = 0) -> DisplacementRecord:
    # только развёрнутое смещение, свёрнутые позиции не годятся
    dx, dy = (float(v) for v in state.displacement[TRACER])
    return DisplacementRecord(member=member, time=float(state.time), dx=dx, dy=dy, r=math.hypot(dx, dy))


def records_from_arrays(member: int, times, dx, dy) -> list[DisplacementRecord]:
    return [
        DisplacementRecord(member=member, time=float(t), dx=float(x), dy=float(y), r=math.hypot(x, y))
        for t, x, y in zip(times, dx, dy)
    ]


@dataclass(frozen=True, eq=False)
class ObservableSeries:
    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    n: int
    statistic: str
    # значения по членам (n x len(times)) для парных сравнений
    samples: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class SeriesDifference:
    times: np.ndarray
    difference: np.ndarray
    combined_se: np.ndarray
    z: np.ndarray
    # SE разности по членам; NaN, если ряды не парные
    paired_se: np.ndarray


def grids_match(a, b) -> bool:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=GRID_RTOL, atol=GRID_ATOL))


def _check_grid(times: np.ndarray) -> None:
    if times.ndim != 1 or times.size == 0:
        raise AlignmentError("пустая сетка времени")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise AlignmentError("сетка времени не возрастает строго")


def _shifted_mean_se(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # сдвиг на первого члена: одинаковые члены дают SE ровно 0
    shifted = values - values[0]
    n = values.shape[0]
    mean = values[0] + shifted.mean(axis=0)
    se = shifted.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, se


def _bootstrap_se(values: np.ndarray, resamples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = values.shape[0]
    means = np.empty((resamples, values.shape[1]))
    for k in range(resamples):
        idx = rng.integers(0, n, size=n)
        means[k] = values[idx].mean(axis=0)
    return means.std(axis=0)


def statistic_values(dx: np.ndarray, dy: np.ndarray, statistic: Statistic) -> np.ndarray:
    if statistic == "r2":
        return dx * dx + dy * dy
    if statistic == "dx2":
        return dx * dx
    if statistic == "dy2":
        return dy * dy
    raise StatisticsError(f"неизвестная статистика {statistic!r}, допустимы {', '.join(STATISTICS)}")


def msd_from_arrays(
    times,
    dx,
    dy,
    statistic: Statistic = "r2",
    *,
    bootstrap: int = 0,
    seed: int = 0,
) -> ObservableSeries:
    """dx, dy формы (члены, время) на общей сетке times."""
    times = np.asarray(times, dtype=np.float64)
    dx = np.atleast_2d(np.asarray(dx, dtype=np.float64))
    dy = np.atleast_2d(np.asarray(dy, dtype=np.float64))
    _check_grid(times)
    if dx.shape != dy.shape or dx.shape[1] != times.size:
        raise AlignmentError(f"формы смещений {dx.shape}, {dy.shape} не согласованы с сеткой из {times.size} точек")
    n = dx.shape[0]
    if n < 2:
        raise StatisticsError(f"для стандартной ошибки нужно N >= 2, получено {n}")

    values = statistic_values(dx, dy, statistic)
    mean, se = _shifted_mean_se(values)
    if bootstrap > 0:
        se = _bootstrap_se(values, bootstrap, seed)
    return ObservableSeries(times=times, mean=mean, se=se, n=n, statistic=statistic, samples=values)


def msd_series(
    records: Sequence[Sequence[DisplacementRecord]],
    statistic: Statistic = "r2",
    *,
    bootstrap: int = 0,
    seed: int = 0,
) -> ObservableSeries:
    if len(records) < 2:
        raise StatisticsError(f"для стандартной ошибки нужно N >= 2, получено {len(records)}")
    times = np.array([rec.time for rec in records[0]], dtype=np.float64)
    for member_records in records[1:]:
        other = np.array([rec.time for rec in member_records], dtype=np.float64)
        if not grids_match(times, other):
            member = member_records[0].member if member_records else "?"
            raise AlignmentError(f"сетка времени члена {member} не совпадает с сеткой члена {records[0][0].member}")
    dx = np.array([[rec.dx for rec in member_records] for member_records in records], dtype=np.float64)
    dy = np.array([[rec.dy for rec in member_records] for member_records in records], dtype=np.float64)
    return msd_from_arrays(times, dx, dy, statistic, bootstrap=bootstrap, seed=seed)


def series_difference(a: ObservableSeries, b: ObservableSeries) -> SeriesDifference:
    # совокупная ошибка sqrt(se_a^2 + se_b^2); при 0/0 z = 0
    if not grids_match(a.times, b.times):
        raise AlignmentError(f"сетки рядов не совпадают ({len(a.times)} и {len(b.times)} точек)")
    difference = a.mean - b.mean
    combined = np.sqrt(a.se * a.se + b.se * b.se)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(combined > 0, difference / combined, np.where(difference == 0, 0.0, np.copysign(np.inf, difference)))

    paired = np.full(len(a.times), np.nan)
    if a.samples is not None and b.samples is not None and a.samples.shape == b.samples.shape and a.n >= 2:
        per_member = a.samples - b.samples
        _, paired = _shifted_mean_se(per_member)
    return SeriesDifference(times=a.times, difference=difference, combined_se=combined, z=z, paired_se=paired)
