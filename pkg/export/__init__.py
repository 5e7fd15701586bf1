"""
Модули экспорта отчётов
"""
from .formatters import FormattedReport, ReportFormatter, JSONFormatter, TextFormatter, get_formatter
from .report import emit_report, emit_table, load_report

__all__ = [
    "FormattedReport",
    "ReportFormatter",
    "JSONFormatter",
    "TextFormatter",
    "get_formatter",
    "emit_report",
    "emit_table",
    "load_report",
]
