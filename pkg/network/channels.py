"""
Модель каналов: задержка, потери, отключения связей и аварии узлов

Каждая направленная передача учитывается в счётчиках своего класса
канала. Для каждого класса выполняется баланс:
    delivered + lost + discarded == sends
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from config import NetworkConfig
from network.simulator import Simulator

logger = logging.getLogger(__name__)


class ChannelClass(Enum):
    """Класс трафика для учёта доставки"""
    MARKETPLACE = "marketplace"
    FEDERATION = "federation"
    DIRECTORY = "directory"
    REPLY = "reply"
    GOSSIP = "gossip"


@dataclass
class ChannelCounters:
    """Счётчики одного класса канала"""
    sends: int = 0
    delivered: int = 0
    lost: int = 0
    discarded: int = 0
    bytes: int = 0
    # Доставки клиентам: ожидаемые по глобальному знанию и фактические
    expected_clients: int = 0
    reached_clients: int = 0

    @property
    def delivery_rate(self) -> float:
        if self.expected_clients == 0:
            return 1.0
        return self.reached_clients / self.expected_clients

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sends": self.sends,
            "delivered": self.delivered,
            "lost": self.lost,
            "discarded": self.discarded,
            "bytes": self.bytes,
            "expected_clients": self.expected_clients,
            "reached_clients": self.reached_clients,
            "delivery_rate": self.delivery_rate,
        }


@dataclass
class _Outage:
    a: str
    b: str
    start: float
    end: float

    def covers(self, x: str, y: str, t: float) -> bool:
        return {x, y} == {self.a, self.b} and self.start <= t < self.end


@dataclass
class _Crash:
    node: str
    at: float
    recover: Optional[float] = None

    def covers(self, node: str, t: float) -> bool:
        return node == self.node and t >= self.at and (self.recover is None or t < self.recover)


class NetworkModel:
    """
    Передача сообщений между узлами симуляции.

    Связи сохраняют порядок (FIFO): сообщение не может прийти раньше
    предыдущего по той же направленной связи.
    """

    def __init__(self, sim: Simulator, config: Optional[NetworkConfig] = None):
        self.sim = sim
        self.config = config or NetworkConfig()
        self.counters: Dict[ChannelClass, ChannelCounters] = {c: ChannelCounters() for c in ChannelClass}
        self._outages: List[_Outage] = [
            _Outage(o.a, o.b, o.start, o.end) for o in self.config.outages
        ]
        self._crashes: List[_Crash] = [_Crash(c.node, c.at, c.recover) for c in self.config.crashes]
        self._last_arrival: Dict[Tuple[str, str], float] = {}

    # -- состояние сети --------------------------------------------------

    def add_outage(self, a: str, b: str, start: float, end: float) -> None:
        self._outages.append(_Outage(a, b, start, end))

    def crash(self, node: str, at: Optional[float] = None, recover: Optional[float] = None) -> None:
        self._crashes.append(_Crash(node, self.sim.now if at is None else at, recover))

    def link_down(self, a: str, b: str, t: Optional[float] = None) -> bool:
        if not self._outages:
            return False
        t = self.sim.now if t is None else t
        return any(o.covers(a, b, t) for o in self._outages)

    def crashed(self, node: str, t: Optional[float] = None) -> bool:
        if not self._crashes:
            return False
        t = self.sim.now if t is None else t
        return any(c.covers(node, t) for c in self._crashes)

    # -- передача --------------------------------------------------------

    def _arrival_time(self, src: str, dst: str) -> float:
        cfg = self.config
        arrival = self.sim.now + self.sim.random.uniform(cfg.latency_min, cfg.latency_max)
        link = (src, dst)
        last = self._last_arrival.get(link)
        if last is not None and arrival < last:
            arrival = last
        self._last_arrival[link] = arrival
        return arrival

    def transmit(
        self,
        src: str,
        dst: str,
        channel: ChannelClass,
        size: int,
        deliver: Callable[..., None],
        *args: Any,
    ) -> bool:
        """
        Передать сообщение по связи src -> dst

        Args:
            src, dst: Концы связи (брокеры или узлы)
            channel: Класс канала для учёта
            size: Размер полезной нагрузки в байтах
            deliver: Вызывается при прибытии (если получатель жив)

        Returns:
            False, если сообщение потеряно при отправке
        """
        counters = self.counters[channel]
        counters.sends += 1
        counters.bytes += size
        if self.link_down(src, dst) or self.crashed(src) or self.sim.random.bernoulli(self.config.loss_rate):
            counters.lost += 1
            return False
        self.sim.schedule_at(self._arrival_time(src, dst), self._arrive, dst, counters, deliver, args)
        return True

    def transmit_local(
        self,
        broker: str,
        client: str,
        channel: ChannelClass,
        deliver: Callable[..., None],
        *args: Any,
    ) -> None:
        """Доставка от брокера подключённому клиенту (без задержки и случайных потерь)"""
        counters = self.counters[channel]
        counters.sends += 1
        if self.link_down(broker, client):
            counters.lost += 1
            return
        self.sim.schedule(0.0, self._arrive, client, counters, deliver, args)

    def transmit_batch(
        self,
        src: str,
        dst: str,
        channel: ChannelClass,
        items: Sequence[Any],
        size: int,
        deliver: Callable[[List[Any]], None],
    ) -> int:
        """
        Передать несколько независимых сообщений по одной связи

        Потери разыгрываются для каждого сообщения; уцелевшие прибывают
        одним событием. Возвращает число непотерянных сообщений.
        """
        counters = self.counters[channel]
        n = len(items)
        counters.sends += n
        counters.bytes += size * n
        if self.link_down(src, dst) or self.crashed(src):
            counters.lost += n
            return 0
        loss = self.config.loss_rate
        if loss > 0:
            survivors = [item for item in items if not self.sim.random.bernoulli(loss)]
            counters.lost += n - len(survivors)
        else:
            survivors = list(items)
        if survivors:
            self.sim.schedule_at(
                self._arrival_time(src, dst), self._arrive_batch, dst, counters, deliver, survivors
            )
        return len(survivors)

    def discard(self, channel: ChannelClass, size: int = 0) -> None:
        """Сообщение отброшено у отправителя: ни одной подходящей подписки"""
        counters = self.counters[channel]
        counters.sends += 1
        counters.discarded += 1

    def drop(self, channel: ChannelClass, size: int = 0) -> None:
        """Сообщение не отправлено: узел-отправитель остановлен"""
        counters = self.counters[channel]
        counters.sends += 1
        counters.bytes += size
        counters.lost += 1

    def _arrive(self, dst: str, counters: ChannelCounters, deliver: Callable, args: Tuple) -> None:
        if self.crashed(dst):
            counters.lost += 1
            return
        counters.delivered += 1
        deliver(*args)

    def _arrive_batch(self, dst: str, counters: ChannelCounters, deliver: Callable, items: List[Any]) -> None:
        if self.crashed(dst):
            counters.lost += len(items)
            return
        counters.delivered += len(items)
        deliver(items)

    def totals(self) -> Dict[str, Dict[str, Any]]:
        return {c.value: self.counters[c].to_dict() for c in ChannelClass}
