"""
Запуск прогонов и сравнение стилей кооперации
"""
import copy
import logging
import time
from typing import Sequence, Tuple

import pandas as pd

from config import STYLES, SimConfig
from sim.metrics import MetricsReport, collect_metrics
from sim.world import World
from styles.base import MAINTENANCE_KINDS

logger = logging.getLogger(__name__)


def run_world(config: SimConfig) -> Tuple[World, MetricsReport]:
    """
    Выполнить прогон и вернуть мир вместе с отчётом

    Args:
        config: Проверенная конфигурация

    Returns:
        (World, MetricsReport)
    """
    started = time.perf_counter()
    world = World(config).setup()
    world.sim.run(config.duration)
    report = collect_metrics(world)
    logger.info(
        f"Прогон {config.name} (seed={config.seed}) завершён за {time.perf_counter() - started:.1f} с, "
        f"событий {world.sim.events_processed}"
    )
    return world, report


def run(config: SimConfig) -> MetricsReport:
    """Выполнить прогон по конфигурации"""
    return run_world(config)[1]


def with_style(config: SimConfig, style: str) -> SimConfig:
    """Копия конфигурации, в которой все сценарные федерации используют style"""
    variant = copy.deepcopy(config)
    variant.name = f"{config.name}-{style}"
    for fed in variant.federations:
        fed.style = style
    return variant


def compare_styles(config: SimConfig, styles: Sequence[str] = STYLES) -> pd.DataFrame:
    """
    Прогнать один сценарий во всех стилях

    Returns:
        DataFrame: по строке на (стиль, федерация) с трафиком на продвижение,
        обслуживающими сообщениями, задержками и долей доставки
    """
    rows = []
    for style in styles:
        report = run(with_style(config, style))
        for _, fed in report.federations.iterrows():
            events = int(fed["events"])
            rows.append({
                "style": style,
                "federation": fed["name"],
                "members": int(fed["members"]),
                "events": events,
                "messages": int(fed["messages"]),
                "msg_per_promotion": fed["messages"] / events if events else 0.0,
                "maintenance_messages": int(
                    sum(fed[f"{k}_messages"] for k in MAINTENANCE_KINDS)
                    + fed["control_messages"]
                ),
                "mean_latency": fed["mean_latency"],
                "catchup_time": fed["catchup_time"],
                "delivery_rate": fed["delivery_rate"],
            })
    return pd.DataFrame(rows)
