"""
Форматирование сводки прогона для консоли и файлов
"""
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List
import logging

import pandas as pd

logger = logging.getLogger(__name__)


@dataclass
class FormattedReport:
    """Отформатированная сводка"""
    content: str
    content_type: str  # "json", "text"
    metadata: Dict[str, Any]


class ReportFormatter(ABC):
    """Базовый класс форматтера отчёта"""

    @abstractmethod
    def format(self, report: Any) -> FormattedReport:
        """
        Отформатировать отчёт прогона

        Args:
            report: MetricsReport

        Returns:
            FormattedReport
        """
        pass

    @abstractmethod
    def format_table(self, df: pd.DataFrame, title: str = "") -> FormattedReport:
        """
        Отформатировать одну таблицу (сравнение стилей, проверка формул)

        Args:
            df: Таблица
            title: Заголовок

        Returns:
            FormattedReport
        """
        pass


def _clean(value: Any) -> Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


class JSONFormatter(ReportFormatter):
    """Форматтер для JSON"""

    def __init__(self, pretty: bool = True):
        self.pretty = pretty

    def _dump(self, data: Any) -> str:
        if self.pretty:
            return json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True)
        return json.dumps(data, ensure_ascii=False, sort_keys=True)

    def format(self, report: Any) -> FormattedReport:
        data = {key: _clean(value) for key, value in report.summary.items()}
        data["fingerprint"] = report.fingerprint()
        return FormattedReport(
            content=self._dump(data),
            content_type="json",
            metadata={"name": report.name, "seed": report.seed},
        )

    def format_table(self, df: pd.DataFrame, title: str = "") -> FormattedReport:
        rows = [{k: _clean(v) for k, v in row.items()} for row in df.to_dict(orient="records")]
        return FormattedReport(
            content=self._dump({"title": title, "rows": rows}),
            content_type="json",
            metadata={"rows": len(rows)},
        )


class TextFormatter(ReportFormatter):
    """Форматтер для консоли"""

    def __init__(self, include_details: bool = True, max_rows: int = 20):
        """
        Инициализация

        Args:
            include_details: Выводить таблицы федераций и каналов
            max_rows: Максимум строк одной таблицы
        """
        self.include_details = include_details
        self.max_rows = max_rows

    def format(self, report: Any) -> FormattedReport:
        summary = report.summary
        lines = [
            f"Сценарий: {report.name} (seed={report.seed})",
            f"Длительность: {pd.Timedelta(seconds=report.duration)}",
            f"Событий: {summary.get('events_processed', 0)}",
            f"Сообщений: {summary.get('messages', 0)}, без переходов: {summary.get('zero_hop_share', 0.0):.1%}",
            f"Управляющих сообщений: {summary.get('control_messages', 0)}",
            f"Отклонено (авторство/подпись): {summary.get('rejected_unauthorized', 0)}",
        ]
        if "hop_fit_slope" in summary:
            lines.append(
                f"Аппроксимация переходов: a={summary['hop_fit_intercept']:.2f}, "
                f"b={summary['hop_fit_slope']:.2f}, R²={summary['hop_fit_r2']:.3f}"
            )
        if summary.get("command_errors"):
            lines.append(f"Ошибок команд: {summary['command_errors']}")
        if self.include_details:
            lines.extend(self._section("Федерации", report.federations, [
                "name", "style", "members", "events", "messages", "msg_per_event",
                "delivery_rate", "mean_latency",
            ]))
            lines.extend(self._section("Каналы", report.channels, [
                "channel", "sends", "delivered", "lost", "discarded", "delivery_rate",
            ]))
            lines.extend(self._section("Переходы", report.hops, ["hops", "messages", "reached"]))
        lines.append(f"Отпечаток: {report.fingerprint()[:16]}")
        return FormattedReport(
            content="\n".join(lines),
            content_type="text",
            metadata={"name": report.name},
        )

    def format_table(self, df: pd.DataFrame, title: str = "") -> FormattedReport:
        lines = self._section(title, df, list(df.columns)) if title else [self._render(df)]
        return FormattedReport(content="\n".join(lines).strip(), content_type="text", metadata={"rows": len(df)})

    def _section(self, title: str, df: pd.DataFrame, columns: List[str]) -> List[str]:
        if df is None or df.empty:
            return ["", f"{title}: нет данных"]
        present = [c for c in columns if c in df.columns]
        return ["", f"{title}:", self._render(df[present])]

    def _render(self, df: pd.DataFrame) -> str:
        shown = df.head(self.max_rows)
        text = shown.to_string(index=False, float_format=lambda v: f"{v:.3f}")
        if len(df) > self.max_rows:
            text += f"\n... ещё {len(df) - self.max_rows} строк"
        return text


FORMATTERS = {
    "json": JSONFormatter,
    "text": TextFormatter,
}


def get_formatter(kind: str, **kwargs) -> ReportFormatter:
    """
    Получить форматтер по имени

    Args:
        kind: "json" или "text"
        **kwargs: Параметры форматтера

    Returns:
        ReportFormatter
    """
    formatter_cls = FORMATTERS.get(kind)
    if formatter_cls is None:
        raise ValueError(f"Неизвестный формат: {kind}")
    return formatter_cls(**kwargs)
