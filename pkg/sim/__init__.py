"""
Симуляционный стенд: мир прогона, нагрузка, метрики, проверки формул
"""
from .metrics import MetricsReport, collect_metrics
from .oracles import action_chi_square, check_formulas
from .runner import compare_styles, run, run_world
from .workload import WorkloadGenerator, estimate_match_rate
from .world import World, build_world

__all__ = [
    "MetricsReport",
    "collect_metrics",
    "action_chi_square",
    "check_formulas",
    "compare_styles",
    "run",
    "run_world",
    "WorkloadGenerator",
    "estimate_match_rate",
    "World",
    "build_world",
]
