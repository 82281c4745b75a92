from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_fixed

from app.custom_logging import get_logger, stage_log
from app.model.types import SystemState

log = get_logger(__name__)

CHECKPOINT_FORMAT = 1


@retry(stop=stop_after_attempt(3), wait=wait_fixed(0.2), retry=retry_if_exception_type(OSError), reraise=True)
def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    # json пишет float через repr, значения восстанавливаются побитово
    tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, path)


def state_to_dict(state: SystemState) -> dict[str, Any]:
    return {
        "positions": state.positions.tolist(),
        "velocities": state.velocities.tolist(),
        "displacement": state.displacement.tolist(),
        "time": state.time,
        "stream_index": state.stream_index,
    }


def state_from_dict(data: dict[str, Any]) -> SystemState:
    return SystemState(
        positions=np.array(data["positions"], dtype=np.float64).reshape(-1, 2),
        velocities=np.array(data["velocities"], dtype=np.float64).reshape(-1, 2),
        displacement=np.array(data["displacement"], dtype=np.float64).reshape(-1, 2),
        time=float(data["time"]),
        stream_index=data.get("stream_index"),
    )


@dataclass
class CheckpointStore:
    """
    Контрольные точки длинных ансамблей: выборочные состояния (с состоянием ГСЧ)
    и завершённые задачи (член, dt). Файл принимается, только если дайджест манифеста совпал.
    """

    directory: Path
    digest: str
    resume: bool = True

    def _path(self, name: str) -> Path:
        return self.directory / f"{name}.json"

    def _read(self, name: str) -> dict | None:
        if not self.resume:
            return None
        path = self._path(name)
        if not path.exists():
            return None
        try:
            text = path.read_text(encoding="utf-8").strip()
            payload = json.loads(text) if text else {}
        except (OSError, json.JSONDecodeError):
            stage_log("Контрольная точка", status="повреждена", файл=str(path))
            return None
        if payload.get("digest") != self.digest or payload.get("format") != CHECKPOINT_FORMAT:
            log.info(f"Контрольная точка {path.name} от другого манифеста, пересчитываем")
            return None
        return payload

    def save_state(self, stream: int, state: SystemState, rng_state: dict) -> None:
        _write_json(self._path(f"state_{stream:06d}"), {
            "format": CHECKPOINT_FORMAT,
            "digest": self.digest,
            "state": state_to_dict(state),
            "rng": rng_state,
        })

    def load_state(self, stream: int) -> tuple[SystemState, dict] | None:
        payload = self._read(f"state_{stream:06d}")
        if payload is None:
            return None
        return state_from_dict(payload["state"]), payload["rng"]

    def save_payload(self, name: str, data: dict) -> None:
        _write_json(self._path(name), {"format": CHECKPOINT_FORMAT, "digest": self.digest, "data": data})

    def load_payload(self, name: str) -> dict | None:
        payload = self._read(name)
        return None if payload is None else payload["data"]
