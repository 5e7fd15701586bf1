"""
DIRE Registry Simulator - федеративный реестр сервисов
"""
# Безопасный импорт - работает и как пакет и как модуль
try:
    from .config import SimConfig, load_config
    from .sim import MetricsReport, run, compare_styles
    from .export import emit_report, load_report
except ImportError:
    # Fallback для запуска без пакета
    from config import SimConfig, load_config
    from sim import MetricsReport, run, compare_styles
    from export import emit_report, load_report

__version__ = "0.3.0"
__author__ = "DIRE Simulator Team"

__all__ = [
    "SimConfig",
    "load_config",
    "MetricsReport",
    "run",
    "compare_styles",
    "emit_report",
    "load_report",
]
