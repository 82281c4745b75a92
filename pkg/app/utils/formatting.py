from __future__ import annotations

import math
from typing import Any

NONE_TOKEN = "none"


def format_float(value: float) -> str:
    """17 значащих цифр: значение восстанавливается из строки без потерь."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def format_cell(value: Any) -> str:
    if value is None:
        return NONE_TOKEN
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    try:
        # numpy-скаляры
        if hasattr(value, "dtype"):
            return format_cell(value.item())
    except (AttributeError, ValueError):
        pass
    return str(value)


def format_manifest_value(value: Any) -> str:
    """Значение для строки key = value: float через repr, списки через запятую."""
    if value is None:
        return NONE_TOKEN
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(format_manifest_value(v) for v in value)
    return str(value)


def parse_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in parse_list(text))
    except ValueError as e:
        raise ValueError(f"ожидался список чисел через запятую, получено {text!r}") from e


def format_seconds(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f} с"
    minutes, sec = divmod(seconds, 60)
    if minutes < 60:
        return f"{int(minutes)} мин {sec:.0f} с"
    hours, minutes = divmod(minutes, 60)
    return f"{int(hours)} ч {int(minutes)} мин"
