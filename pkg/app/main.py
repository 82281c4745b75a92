from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from app.config import Settings, load_non_secret_env
from app.custom_logging import get_logger, setup_logging, stage_log
from app.errors import ConfigurationError, SimulationError
from app.experiments.manifest import EXPERIMENTS, ExperimentManifest, build_manifest, load_config_file
from app.experiments.runner import open_store
from app.experiments.studies import run_sampling, runner_for
from app.export.csv_exporter import export_tables
from app.utils.formatting import parse_float_list

BASE_DIR = Path(__file__).resolve().parent
ENV_PATH = BASE_DIR / ".env"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

log = get_logger(__name__)


def _dt_list(text: str) -> tuple[float, ...]:
    try:
        values = parse_float_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    if not values:
        raise argparse.ArgumentTypeError("пустой список dt")
    return values


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"зерно должно быть целым, получено {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("зерно должно быть 64-битным беззнаковым")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="app.main",
        description="Ансамблевые эксперименты с методом Верле для двумерной системы Леннард-Джонса",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"эксперимент {name}")
        p.add_argument("--config", help="файл key = value в формате манифеста")
        p.add_argument("--seed", type=_seed, help="корневое зерно (u64)")
        p.add_argument("--workers", type=int, help="число процессов (по умолчанию WORKERS)")
        p.add_argument("--out", help="каталог результатов (по умолчанию OUTPUT_DIR)")
        p.add_argument("--dt", type=_dt_list, help="список dt через запятую")
        p.add_argument("--ensemble", type=int, help="размер ансамбля N")
        p.add_argument("--horizon", type=float, help="горизонт T")
        p.add_argument("--observe-interval", type=float,
                       help="интервал наблюдений; без него при --dt подбирается по наибольшему dt")
        p.add_argument("--resume", action="store_true", help="взять готовые контрольные точки")
        if name == "sample":
            p.add_argument("--check-forces", action="store_true",
                           help="сверить силы по ячейкам с полным перебором на выборке")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["root_seed"] = args.seed
        overrides["sim"] = {"seed": args.seed}
    if args.dt is not None:
        overrides["dts"] = args.dt
    if args.ensemble is not None:
        overrides["ensemble"] = args.ensemble
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.observe_interval is not None:
        overrides["observe_interval"] = args.observe_interval
    return overrides


def run_experiment(
    manifest: ExperimentManifest,
    *,
    out_dir: Path,
    workers: int = 1,
    resume: bool = False,
    check_forces: bool = False,
) -> int:
    """Запуск эксперимента и запись результатов; возвращает код выхода."""
    stage_log("Эксперимент", status="старт", эксперимент=manifest.name, потоков=workers, каталог=str(out_dir))
    store = open_store(manifest, out_dir / "checkpoints", resume=resume)
    if manifest.name == "sample":
        output = run_sampling(manifest, workers=workers, store=store, check_forces=check_forces)
    else:
        output = runner_for(manifest.name)(manifest, workers=workers, store=store)
    export_tables(out_dir, manifest, output.tables, output.failures)

    bad_forces = output.data.get("force_mismatches", 0)
    if output.failures or bad_forces:
        stage_log("Эксперимент", status="отказы", эксперимент=manifest.name, отказов=output.failures,
                  расхождений_сил=bad_forces)
        return EXIT_NUMERICAL
    stage_log("Эксперимент", status="успех", эксперимент=manifest.name)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    load_non_secret_env(str(ENV_PATH))
    settings = Settings()
    setup_logging(
        level=settings.LOG_LEVEL,
        log_file=settings.LOG_FILE,
        audit_log_file=settings.AUDIT_LOG_FILE,
        force=True,
    )
    args = build_parser().parse_args(argv)

    try:
        file_values = load_config_file(args.config) if args.config else None
        manifest = build_manifest(
            args.experiment,
            file_values,
            _overrides(args),
            fit_interval=args.dt is not None and args.observe_interval is None,
        )
        workers = args.workers if args.workers is not None else settings.WORKERS
        if workers < 1:
            raise ConfigurationError(f"--workers должно быть >= 1, получено {workers}")
        out_dir = Path(args.out) if args.out else settings.output_path
    except (ConfigurationError, ValidationError) as e:
        log.error(f"Ошибка конфигурации: {e}")
        return EXIT_CONFIG
    except OSError as e:
        log.error(f"Не удалось прочитать конфигурацию: {e}")
        return EXIT_IO

    try:
        return run_experiment(
            manifest,
            out_dir=out_dir,
            workers=workers,
            resume=args.resume,
            check_forces=getattr(args, "check_forces", False),
        )
    except (ConfigurationError, ValidationError) as e:
        log.error(f"Ошибка конфигурации: {e}")
        return EXIT_CONFIG
    except OSError as e:
        log.error(f"Ошибка ввода-вывода: {e}")
        return EXIT_IO
    except SimulationError as e:
        log.error(f"Численный отказ: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
