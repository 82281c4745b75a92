import logging

import numpy as np

from app.custom_logging import _kv_line, member_log, setup_logging, stage_log


def test_kv_line_quotes_and_formats():
    line = _kv_line(член=3, dt=np.float64(0.005), комментарий='x "y"', пусто=None)
    assert line == 'член="3", dt="0.005", комментарий="x \\"y\\"", пусто=""'


def test_member_failures_are_warnings(caplog):
    with caplog.at_level(logging.INFO, logger="audit"):
        member_log(4, status="проинтегрирован", comment="dt=0.01")
        member_log(5, status="ошибка", comment="dt=0.1", ошибка="разлёт энергии")
    levels = [record.levelno for record in caplog.records]
    assert levels == [logging.INFO, logging.WARNING]
    assert 'член="5"' in caplog.records[1].getMessage()


def test_setup_logging_writes_audit_file(tmp_path):
    audit = tmp_path / "audit.log"
    setup_logging("INFO", str(tmp_path / "app.log"), str(audit), force=True)
    stage_log("Экспорт", status="успех", файлов=2)
    for handler in logging.getLogger("audit").handlers:
        handler.flush()
    assert 'Этап="Экспорт", статус="успех", файлов="2"' in audit.read_text(encoding="utf-8")
