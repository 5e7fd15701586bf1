"""
Запись и чтение отчётов прогона (CSV-таблицы + summary.json)
"""
import json
import logging
import os
from typing import Dict, List, Optional

import pandas as pd

from core.errors import IoFailure
from export.formatters import JSONFormatter
from sim.metrics import TABLES, MetricsReport

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
FLOAT_FORMAT = "%.6f"


def write_table(df: pd.DataFrame, path: str) -> str:
    """Записать таблицу CSV с фиксированной точностью"""
    try:
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise IoFailure(f"Не удалось записать {path}: {e}") from e
    return path


def emit_report(report: MetricsReport, out_dir: str) -> List[str]:
    """
    Записать отчёт в каталог

    Args:
        report: Итог прогона
        out_dir: Каталог назначения (создаётся при необходимости)

    Returns:
        Пути записанных файлов
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"Не удалось создать каталог {out_dir}: {e}") from e
    written = []
    for name in TABLES:
        df = report.tables.get(name)
        if df is not None:
            written.append(write_table(df, os.path.join(out_dir, f"{name}.csv")))
    summary_path = os.path.join(out_dir, SUMMARY_FILE)
    try:
        with open(summary_path, "w", encoding="utf-8") as f:
            f.write(JSONFormatter(pretty=True).format(report).content)
    except OSError as e:
        raise IoFailure(f"Не удалось записать {summary_path}: {e}") from e
    written.append(summary_path)
    logger.info(f"Отчёт {report.name} записан в {out_dir} ({len(written)} файлов)")
    return written


def load_report(out_dir: str) -> MetricsReport:
    """
    Прочитать отчёт, записанный emit_report

    Raises:
        IoFailure: каталог или summary.json недоступны
    """
    summary_path = os.path.join(out_dir, SUMMARY_FILE)
    try:
        with open(summary_path, "r", encoding="utf-8") as f:
            summary = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"Не удалось прочитать {summary_path}: {e}") from e
    tables: Dict[str, pd.DataFrame] = {}
    for name in TABLES:
        path = os.path.join(out_dir, f"{name}.csv")
        if not os.path.exists(path):
            continue
        try:
            tables[name] = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            tables[name] = pd.DataFrame()
        except OSError as e:
            raise IoFailure(f"Не удалось прочитать {path}: {e}") from e
    summary.pop("fingerprint", None)
    return MetricsReport(
        name=summary.get("name", os.path.basename(out_dir)),
        seed=int(summary.get("seed", 0)),
        duration=float(summary.get("duration", 0.0)),
        tables=tables,
        summary=summary,
    )


def emit_table(df: pd.DataFrame, out_dir: str, name: str) -> Optional[str]:
    """Записать отдельную таблицу (comparison.csv, formulas.csv)"""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"Не удалось создать каталог {out_dir}: {e}") from e
    return write_table(df, os.path.join(out_dir, f"{name}.csv"))
