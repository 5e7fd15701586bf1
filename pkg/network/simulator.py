"""
Дискретно-событийный симулятор с виртуальным временем

Все случайные величины прогона берутся из одного генератора numpy,
инициализированного seed; чтений системных часов нет.
"""
import heapq
import itertools
import logging
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class RandomStream:
    """
    Быстрые скалярные выборки поверх numpy.random.Generator.

    Равномерные числа заранее выбираются блоками, что даёт ту же
    детерминированность, но без накладных расходов на каждый вызов.
    """

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self._block = block
        self._buffer: List[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buffer):
            self._buffer = self.rng.random(self._block).tolist()
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, n: int) -> int:
        """Целое из [0, n)"""
        return min(int(self.random() * n), n - 1)

    def choice(self, items: Sequence[Any]) -> Any:
        return items[self.randint(len(items))]

    def bernoulli(self, p: float) -> bool:
        return p > 0 and self.random() < p

    def sample(self, items: Sequence[Any], k: int) -> List[Any]:
        """k различных элементов (частичная перетасовка Фишера-Йетса)"""
        pool = list(items)
        k = min(k, len(pool))
        for i in range(k):
            j = i + self.randint(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def weighted(self, weights: Sequence[float]) -> int:
        """Индекс по весам (веса не обязаны суммироваться в 1)"""
        total = float(sum(weights))
        target = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if target < acc:
                return i
        return len(weights) - 1


class Timer:
    """Запланированное событие; cancel() снимает его с исполнения"""

    __slots__ = ("time", "callback", "args", "cancelled")

    def __init__(self, time: float, callback: Callable, args: Tuple):
        self.time = time
        self.callback = callback
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class PeriodicTimer:
    """Повторяющееся событие с фиксированным периодом"""

    def __init__(self, sim: "Simulator", period: float, callback: Callable, args: Tuple):
        if period <= 0:
            raise ValueError(f"Период должен быть положительным: {period}")
        self.sim = sim
        self.period = period
        self.callback = callback
        self.args = args
        self.cancelled = False
        self.fired = 0
        self._timer: Optional[Timer] = None

    def start(self, first_delay: float) -> "PeriodicTimer":
        self._timer = self.sim.schedule(first_delay, self._fire)
        return self

    def _fire(self) -> None:
        if self.cancelled:
            return
        self.fired += 1
        self._timer = self.sim.schedule(self.period, self._fire)
        self.callback(*self.args)

    def cancel(self) -> None:
        self.cancelled = True
        if self._timer is not None:
            self._timer.cancel()


class Simulator:
    """Очередь событий (time, seq) и виртуальные часы в секундах"""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0.0
        self.rng = np.random.default_rng(seed)
        self.random = RandomStream(self.rng)
        self.events_processed = 0
        self._queue: List[Tuple[float, int, Timer]] = []
        self._seq = itertools.count()

    def schedule(self, delay: float, callback: Callable, *args: Any) -> Timer:
        if delay < 0:
            raise ValueError(f"Отрицательная задержка: {delay}")
        return self.schedule_at(self.now + delay, callback, *args)

    def schedule_at(self, time: float, callback: Callable, *args: Any) -> Timer:
        if time < self.now:
            raise ValueError(f"Событие в прошлом: {time} < {self.now}")
        timer = Timer(time, callback, args)
        heapq.heappush(self._queue, (time, next(self._seq), timer))
        return timer

    def every(self, period: float, callback: Callable, *args: Any, first: Optional[float] = None) -> PeriodicTimer:
        """Периодическое событие; первое срабатывание через first (по умолчанию через period)"""
        return PeriodicTimer(self, period, callback, args).start(period if first is None else first)

    @property
    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> bool:
        """Выполнить одно событие; False, если очередь пуста"""
        while self._queue:
            time, _, timer = heapq.heappop(self._queue)
            if timer.cancelled:
                continue
            self.now = time
            self.events_processed += 1
            timer.callback(*timer.args)
            return True
        return False

    def run(self, until: Optional[float] = None) -> float:
        """
        Обработать события со временем строго меньше until

        Args:
            until: Граница времени; None - до опустошения очереди

        Returns:
            Текущее время симуляции
        """
        queue = self._queue
        while queue:
            time, _, timer = queue[0]
            if until is not None and time >= until:
                break
            heapq.heappop(queue)
            if timer.cancelled:
                continue
            self.now = time
            self.events_processed += 1
            timer.callback(*timer.args)
        if until is not None and until > self.now:
            self.now = until
        return self.now
