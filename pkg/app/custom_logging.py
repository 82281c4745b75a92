from __future__ import annotations
import logging
import os
import sys
import time
from functools import wraps
from pathlib import Path
from logging.handlers import RotatingFileHandler

_LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(name)s] %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"
_MAX_BYTES = 10 * 1024 * 1024
_BACKUPS = 10

# обработчики, поставленные setup_logging (снимаются при force=True)
_installed: list[tuple[logging.Logger, logging.Handler]] = []


class _Formatter(logging.Formatter):
    def formatTime(self, record, datefmt=None):
        return time.strftime(datefmt or _DATEFMT, time.localtime(record.created))


def _rotating(path: str | os.PathLike, fmt: logging.Formatter) -> RotatingFileHandler:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(path, maxBytes=_MAX_BYTES, backupCount=_BACKUPS, encoding="utf-8")
    handler.setFormatter(fmt)
    return handler


def _install(logger: logging.Logger, handler: logging.Handler) -> None:
    logger.addHandler(handler)
    _installed.append((logger, handler))


def setup_logging(
    level: str = os.getenv("LOG_LEVEL", "INFO"),
    log_file: str | None = os.getenv("LOG_FILE", "logs/app.log"),
    audit_log_file: str | None = os.getenv("AUDIT_LOG_FILE", "logs/audit.log"),
    *,
    force: bool = False,
) -> None:
    """
    stdout и основной файл на корневом логгере; журнал "audit" (этапы
    экспериментов и судьба членов ансамбля) пишется ещё и в отдельный файл.
    Повторный вызов ничего не делает, если не передан force.
    """
    root = logging.getLogger()
    if _installed and not force:
        return
    while _installed:
        logger, handler = _installed.pop()
        logger.removeHandler(handler)
        handler.close()

    root.setLevel(level.upper())
    fmt = _Formatter(_LOG_FORMAT, datefmt=_DATEFMT)

    console = logging.StreamHandler(sys.stdout)
    console.setFormatter(fmt)
    _install(root, console)
    if log_file:
        _install(root, _rotating(log_file, fmt))

    audit = logging.getLogger("audit")
    audit.setLevel(level.upper())
    audit.propagate = True
    if audit_log_file:
        _install(audit, _rotating(audit_log_file, fmt))


def get_logger(name: str = "app") -> logging.Logger:
    return logging.getLogger(name)


def _text(v: object) -> str:
    if v is None:
        return ""
    if hasattr(v, "item") and getattr(v, "ndim", 1) == 0:
        v = v.item()
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


# Компактные журнальные строки ключ="значение"
def _q(v: object) -> str:
    return '"' + _text(v).replace('"', '\\"') + '"'


def _kv_line(**fields) -> str:
    return ", ".join(f"{k}={_q(v)}" for k, v in fields.items())


def member_log(member: int, *, status: str, comment: str = "", level: int | None = None, **extra) -> None:
    """
    Один член ансамбля = одна строка; отказы идут уровнем WARNING.
    Пример: член="17", статус="проинтегрирован", комментарий="dt=0.01", наблюдений="10001"
    """
    if level is None:
        level = logging.WARNING if status == "ошибка" else logging.INFO
    logging.getLogger("audit").log(level, _kv_line(член=member, статус=status, комментарий=comment, **extra))


def stage_log(stage: str, *, status: str, level: int = logging.INFO, **extra) -> None:
    """Этапы: Этап="Выборка начальных условий", статус="успех", состояний="200"."""
    logging.getLogger("audit").log(level, _kv_line(Этап=stage, статус=status, **extra))


def _short(value: object) -> str:
    # массивы и состояния в журнал только формой
    shape = getattr(value, "shape", None)
    if shape is not None:
        return f"<{type(value).__name__} {tuple(shape)}>"
    if hasattr(value, "positions"):
        return f"<{type(value).__name__} n={len(value.positions)}>"
    text = repr(value)
    return text if len(text) <= 80 else text[:77] + "..."


# ---- Тихий декоратор вызовов (вкл. переменной CALL_LOG=1) ----
_CALL_LOG_ENABLED = os.getenv("CALL_LOG", "0") in ("1", "true", "True")


def log_call(level: int = logging.DEBUG, include_args: bool = False):
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            logger = logging.getLogger(func.__module__)
            if _CALL_LOG_ENABLED:
                suffix = ""
                if include_args:
                    from inspect import signature
                    bound = signature(func).bind_partial(*args, **kwargs)
                    suffix = "(" + ", ".join(f"{k}={_short(v)}" for k, v in bound.arguments.items()) + ")"
                logger.log(level, f"START {func.__name__}{suffix}")
            t0 = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                logger.log(level, f"ERROR {func.__name__} after {(time.perf_counter() - t0) * 1000:.1f} ms: {e!r}")
                raise
            if _CALL_LOG_ENABLED:
                logger.log(level, f"END   {func.__name__} in {(time.perf_counter() - t0) * 1000:.1f} ms")
            return result
        return wrapper
    return decorator
