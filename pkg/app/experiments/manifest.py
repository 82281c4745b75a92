from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app import __version__
from app.custom_logging import get_logger
from app.errors import ConfigurationError
from app.model.types import SimConfig
from app.sampler.langevin import SamplerConfig
from app.utils.formatting import NONE_TOKEN, format_manifest_value, parse_list

ExperimentName = Literal["sample", "divergence", "histogram", "msd", "energy-drift", "conjecture"]
EXPERIMENTS: tuple[str, ...] = ("sample", "divergence", "histogram", "msd", "energy-drift", "conjecture")

# Кратность шага: k * dt должно совпадать с интервалом с этой точностью
GRID_RTOL = 1e-9

_LIST_FIELDS = {"dts", "checkpoint_times", "histogram_range"}
_NESTED = {"sim": SimConfig, "sampler": SamplerConfig}

log = get_logger(__name__)


class ExperimentManifest(BaseModel):
    """Полное описание запуска; сериализуется в заголовок каждого выходного файла."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: ExperimentName
    sim: SimConfig = SimConfig()
    sampler: SamplerConfig = SamplerConfig()
    ensemble: int = Field(default=1, ge=1)
    dts: tuple[float, ...] = (0.01,)
    horizon: float = Field(default=10.0, gt=0)
    observe_interval: float = Field(default=0.01, gt=0)
    root_seed: int = Field(default=0, ge=0, lt=2**64)
    artifact_version: str = __version__
    reference_dt: float | None = None
    checkpoint_times: tuple[float, ...] = ()
    histogram_bins: int = Field(default=40, ge=1)
    histogram_range: tuple[float, float] = (-10.0, 10.0)
    divergence_threshold: float = Field(default=0.5, gt=0)
    zoom_horizon: float = Field(default=2.0, gt=0)
    common_random_numbers: bool = True
    independent_chains: bool = True
    blowup_energy_per_particle: float = Field(default=1.0, gt=0)
    bootstrap: int = Field(default=0, ge=0)
    stationarity_points: int = Field(default=0, ge=0)

    @field_validator("dts")
    @classmethod
    def _positive_dts(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("список dt пуст")
        if any(not dt > 0 for dt in value):
            raise ValueError(f"все dt должны быть > 0, получено {value}")
        return value

    @model_validator(mode="after")
    def _check(self) -> "ExperimentManifest":
        lo, hi = self.histogram_range
        if not lo < hi:
            raise ValueError(f"пустой диапазон гистограммы {self.histogram_range}")
        if self.sim.seed != self.root_seed:
            raise ValueError(f"sim.seed={self.sim.seed} не совпадает с root_seed={self.root_seed}")

        for dt in self.all_dts:
            _check_multiple(self.observe_interval, dt, "observe_interval", f"dt={dt!r}")
        _check_multiple(self.horizon, self.observe_interval, "horizon", "observe_interval")

        if self.name in ("divergence", "energy-drift", "conjecture") and not self.common_random_numbers:
            raise ValueError(f"эксперимент {self.name} сравнивает шаги на общих данных, нужно common_random_numbers = true")
        if self.name in ("divergence", "energy-drift") and self.ensemble != 1:
            raise ValueError(f"эксперимент {self.name} идёт от одного общего начального условия, ensemble = 1")
        if self.name == "divergence":
            if len(self.dts) < 2:
                raise ValueError("для расхождения траекторий нужно хотя бы два dt")
            if any(a < b for a, b in zip(self.dts, self.dts[1:])):
                raise ValueError(f"dt должны идти по убыванию, получено {self.dts}")
        if self.name == "energy-drift" and len(self.dts) < 3:
            raise ValueError("для наклона дрейфа энергии нужно хотя бы три dt")
        if self.name in ("msd", "conjecture") and self.ensemble < 2:
            raise ValueError("для стандартной ошибки нужен ансамбль >= 2")
        if self.name == "conjecture":
            if self.reference_dt is None:
                raise ValueError("не задан reference_dt")
            for t in self.checkpoint_times:
                if not 0 < t <= self.horizon * (1 + GRID_RTOL):
                    raise ValueError(f"контрольное время {t} вне (0, horizon]")
                _check_multiple(t, self.observe_interval, f"контрольное время {t!r}", "observe_interval")
        return self

    @property
    def all_dts(self) -> tuple[float, ...]:
        """dts и, если задан, эталонный шаг; без повторов, в исходном порядке."""
        values = list(self.dts)
        if self.reference_dt is not None:
            values.append(self.reference_dt)
        return tuple(dict.fromkeys(values))

    @property
    def verlet_variant(self) -> str:
        return self.sim.verlet_variant

    @property
    def n_observations(self) -> int:
        return round(self.horizon / self.observe_interval) + 1

    def steps_for(self, dt: float) -> tuple[int, int]:
        """(число шагов до horizon, шагов между наблюдениями) для шага dt."""
        every = round(self.observe_interval / dt)
        return every * (self.n_observations - 1), every

    def sim_for(self, dt: float) -> SimConfig:
        return self.sim.model_copy(update={"dt": dt})

    def grid_index(self, t: float) -> int:
        return round(t / self.observe_interval)


def _is_multiple(value: float, step: float) -> bool:
    k = round(value / step)
    return k >= 1 and math.isclose(k * step, value, rel_tol=GRID_RTOL)


def _check_multiple(value: float, step: float, what: str, of: str) -> None:
    if not _is_multiple(value, step):
        raise ValueError(f"{what}={value!r} не кратно {of} ({step!r})")


def _defaults() -> dict[str, dict[str, Any]]:
    return {
        "sample": {"ensemble": 500, "dts": (0.01,), "horizon": 1.0, "observe_interval": 0.01,
                   "stationarity_points": 100},
        "divergence": {"ensemble": 1, "dts": (0.01, 0.001, 0.0001, 1e-05), "horizon": 5.0,
                       "observe_interval": 0.01},
        "histogram": {"ensemble": 1000, "dts": (0.01, 0.005, 0.0025), "horizon": 10.0,
                      "observe_interval": 0.1},
        "msd": {"ensemble": 200, "dts": (0.01, 0.005, 0.0025), "horizon": 100.0, "observe_interval": 0.02},
        "energy-drift": {"ensemble": 1, "dts": (0.01, 0.005, 0.0025), "horizon": 100.0,
                         "observe_interval": 0.01, "sim.shift_potential": True},
        "conjecture": {"ensemble": 200, "dts": (0.02, 0.01, 0.005), "reference_dt": 0.000625,
                       "checkpoint_times": (1.0, 10.0, 100.0), "horizon": 100.0, "observe_interval": 1.0},
    }


def default_values(name: str) -> dict[str, Any]:
    try:
        return dict(_defaults()[name])
    except KeyError:
        raise ConfigurationError(f"неизвестный эксперимент {name!r}, допустимы: {', '.join(EXPERIMENTS)}")


def _flatten(manifest: ExperimentManifest) -> list[tuple[str, Any]]:
    items: list[tuple[str, Any]] = []
    for key in ExperimentManifest.model_fields:
        value = getattr(manifest, key)
        if key in _NESTED:
            items.extend((f"{key}.{sub}", getattr(value, sub)) for sub in type(value).model_fields)
        else:
            items.append((key, value))
    return items


def serialize_manifest(manifest: ExperimentManifest) -> list[str]:
    """Строки key = value в порядке полей; parse_manifest восстанавливает манифест без потерь."""
    return [f"{key} = {format_manifest_value(value)}" for key, value in _flatten(manifest)]


def manifest_digest(manifest: ExperimentManifest) -> str:
    data_str = json.dumps(manifest.model_dump(mode="json"), sort_keys=True, ensure_ascii=False)
    return hashlib.md5(data_str.encode("utf-8")).hexdigest()


def parse_key_values(lines) -> dict[str, str]:
    """Разбор строк key = value; '#' начинает комментарий, пустые строки пропускаются."""
    values: dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"строка {number}: ожидалось key = value, получено {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"строка {number}: пустой ключ")
        values[key] = value
    return values


def _typed(key: str, text: str) -> Any:
    leaf = key.rsplit(".", 1)[-1]
    if text.lower() == NONE_TOKEN:
        return None
    if leaf in _LIST_FIELDS:
        return tuple(parse_list(text))
    return text


def _nest(flat: dict[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        if "." in key:
            head, tail = key.split(".", 1)
            if head not in _NESTED:
                raise ConfigurationError(f"неизвестная группа ключей {head!r} в {key!r}")
            nested.setdefault(head, {})[tail] = value
        else:
            nested[key] = value
    return nested


def _merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def _validate(data: dict[str, Any]) -> ExperimentManifest:
    try:
        return ExperimentManifest.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"некорректный манифест: {e}") from e


def parse_manifest(lines) -> ExperimentManifest:
    flat = {key: _typed(key, value) for key, value in parse_key_values(lines).items()}
    return _validate(_nest(flat))


def load_config_file(path: str | Path) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    flat = {key: _typed(key, value) for key, value in parse_key_values(text.splitlines()).items()}
    return _nest(flat)


def _fit_interval(data: dict[str, Any]) -> None:
    # интервал наблюдений поднимается до наибольшего dt, если текущий не кратен всем шагам
    try:
        steps = [float(dt) for dt in data.get("dts") or ()]
        if data.get("reference_dt") is not None:
            steps.append(float(data["reference_dt"]))
        interval = float(data.get("observe_interval", ExperimentManifest.model_fields["observe_interval"].default))
    except (TypeError, ValueError):
        return
    if not steps or all(_is_multiple(interval, dt) for dt in steps):
        return
    fitted = max(steps)
    log.info(f"observe_interval={interval!r} не кратен dt {steps}, поднят до {fitted!r}")
    data["observe_interval"] = fitted


def build_manifest(
    name: str,
    file_values: dict[str, Any] | None = None,
    overrides: dict[str, Any] | None = None,
    *,
    fit_interval: bool = False,
) -> ExperimentManifest:
    """
    Умолчания эксперимента, затем значения из файла, затем флаги командной строки.
    fit_interval=True подгоняет observe_interval под заданные dt (флаг --dt без --observe-interval).
    """
    data = _merge({"name": name}, _nest(default_values(name)))
    data = _merge(data, file_values or {})
    data = _merge(data, overrides or {})
    if data.get("name") != name:
        raise ConfigurationError(f"файл описывает эксперимент {data.get('name')!r}, запрошен {name!r}")
    if fit_interval:
        _fit_interval(data)

    # sim.seed и root_seed - одно и то же зерно
    sim = dict(data.get("sim") or {})
    if "root_seed" in data and "seed" not in sim:
        sim["seed"] = data["root_seed"]
    elif "seed" in sim and "root_seed" not in data:
        data["root_seed"] = sim["seed"]
    data["sim"] = sim
    return _validate(data)
