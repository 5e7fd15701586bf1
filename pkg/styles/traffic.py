"""
Аналитическая модель трафика федераций

    PS:      P·(N−1)·D / T_renew
    PSR:     P·(N−1)
    Gossip:  продвижения P·N·log(N)·(C+1),
             heartbeat N·log(N)·(C+1)·D / T_heartbeat,
             переподписка N·log(N)²·(C+1)²·D / T_resubscription
"""
from dataclasses import dataclass
from typing import Dict, Union

import numpy as np

from config import DAY, WEEK
from core.federation_info import FederationStyle

# Допуски сравнения измерений gossip с формулами (относительные)
GOSSIP_TOLERANCES: Dict[str, float] = {
    "promotion": 0.25,
    "heartbeat": 0.25,
    "resubscription": 0.35,
}

_LOGS = {
    "e": np.log,
    "2": np.log2,
    "10": np.log10,
}


@dataclass(frozen=True)
class TrafficModel:
    """Параметры формул трафика"""
    promotions: int
    members: int
    duration: float
    renew_period: float = DAY
    heartbeat_period: float = DAY
    resubscription_period: float = WEEK
    c: int = 2

    def __post_init__(self):
        if self.promotions < 0 or self.members < 0 or self.duration < 0 or self.c < 0:
            raise ValueError(f"Параметры модели не могут быть отрицательными: {self}")
        for name in ("renew_period", "heartbeat_period", "resubscription_period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} должен быть положительным")


def _log(value: float, base: str) -> float:
    try:
        fn = _LOGS[base]
    except KeyError:
        raise ValueError(f"Неизвестное основание логарифма: {base!r}") from None
    if value <= 1:
        return 0.0
    return float(fn(value))


def expected_traffic(model: TrafficModel, style: Union[FederationStyle, str], log_base: str = "e") -> float:
    """
    Ожидаемое число сообщений продвижения

    Args:
        model: Параметры федерации
        style: Стиль кооперации
        log_base: Основание логарифма для gossip ("e", "2", "10")

    Returns:
        Число сообщений (для PS/PSR - целое значение)
    """
    style = FederationStyle.parse(style)
    p, n = model.promotions, model.members
    if p == 0 or n == 0:
        return 0.0
    if style is FederationStyle.PS:
        return p * (n - 1) * model.duration / model.renew_period
    if style is FederationStyle.PSR:
        return float(p * (n - 1))
    return p * n * _log(n, log_base) * (model.c + 1)


def expected_maintenance(model: TrafficModel, kind: str, log_base: str = "e") -> float:
    """
    Ожидаемое число обслуживающих сообщений gossip

    Args:
        model: Параметры федерации
        kind: "heartbeat" или "resubscription"
        log_base: Основание логарифма
    """
    n = model.members
    log_n = _log(n, log_base)
    if kind == "heartbeat":
        return n * log_n * (model.c + 1) * model.duration / model.heartbeat_period
    if kind == "resubscription":
        return n * log_n ** 2 * (model.c + 1) ** 2 * model.duration / model.resubscription_period
    raise ValueError(f"Неизвестный вид обслуживания: {kind!r}")


def within(measured: float, expected: float, tolerance: float) -> bool:
    """Относительное отклонение не превышает tolerance"""
    if expected == 0:
        return measured == 0
    return abs(measured - expected) / expected <= tolerance
