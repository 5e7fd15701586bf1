"""
Распределённый content-based publish/subscribe поверх дерева брокеров

Стратегия маршрутизации - subscription forwarding: каждая подписка
распространяется по дереву, и брокер пересылает сообщение только в те
направления, за которыми есть хотя бы одна подходящая подписка.
"""
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from core.errors import DetachedClient, ReplyTimeout
from core.facet_query import Interest, MatchContext, MatchStats, match_add_info, match_service
from core.messages import (
    AddInfoMessage,
    FederationPayload,
    Payload,
    ReplyPayload,
    ServiceMessage,
    payload_size,
)
from core.service_model import ElementId, NodeId
from network.channels import ChannelClass, NetworkModel
from network.simulator import Simulator, Timer
from network.topology import BrokerId, OverlayTopology, route_table_check

logger = logging.getLogger(__name__)

# Направление "к локальным клиентам" в таблице брокера
LOCAL = ""


@dataclass(frozen=True)
class TopicFilter:
    """Подписка на топик"""
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("Имя топика не может быть пустым")

    def __str__(self) -> str:
        return f"topic={self.name}"


@dataclass(frozen=True)
class ContentFilter:
    """Подписка по содержимому (интерес маркетплейса)"""
    interest: Interest

    def __str__(self) -> str:
        return str(self.interest)


Filter = Union[TopicFilter, ContentFilter]


@dataclass(frozen=True)
class Envelope:
    """Сообщение в пути: полезная нагрузка и след брокеров"""
    msg_id: ElementId
    payload: Payload
    channel: ChannelClass
    sender: NodeId
    repliable: bool = False
    reply_to: Optional[ElementId] = None
    hop_trace: Tuple[BrokerId, ...] = ()
    sent_at: float = 0.0

    def __post_init__(self):
        if isinstance(self.payload, ReplyPayload) and self.reply_to is None:
            raise ValueError("Ответ должен ссылаться на исходное сообщение (reply_to)")

    def hop(self, broker: BrokerId) -> "Envelope":
        return replace(self, hop_trace=self.hop_trace + (broker,))

    @property
    def size(self) -> int:
        return payload_size(self.payload)


@dataclass
class Subscription:
    """Дескриптор подписки"""
    sub_id: int
    client: NodeId
    filter: Filter
    home: BrokerId
    active: bool = True

    @property
    def key(self) -> str:
        return f"{self.client}#{self.sub_id}"


@dataclass
class DeliveryTrace:
    """Что произошло с одним опубликованным сообщением"""
    msg_id: ElementId
    sender: NodeId
    channel: ChannelClass
    published_at: float
    origin: BrokerId
    kind: str
    size: int
    expected: Tuple[NodeId, ...] = ()
    recipients: Dict[NodeId, Tuple[BrokerId, ...]] = field(default_factory=dict)
    brokers_reached: List[BrokerId] = field(default_factory=list)
    link_traversals: int = 0
    max_depth: int = 0
    lost: int = 0
    discarded: bool = False

    @property
    def hops(self) -> int:
        """Число межброкерных переходов до самого дальнего достигнутого брокера"""
        return self.max_depth

    @property
    def hosts(self) -> int:
        return len(self.brokers_reached)


class ReplyCollector:
    """
    Ожидание ответов на repliable-сообщение.

    Завершается, когда получены все ожидаемые ответы или истёк таймаут.
    """

    def __init__(self, msg_id: ElementId, expected: int):
        self.msg_id = msg_id
        self.expected = expected
        self.replies: List[ReplyPayload] = []
        self.reply_times: List[float] = []
        self.done = False
        self.timed_out = False
        self._callbacks: List[Callable[["ReplyCollector"], None]] = []
        self._timer: Optional[Timer] = None

    @property
    def received(self) -> int:
        return len(self.replies)

    def on_complete(self, callback: Callable[["ReplyCollector"], None]) -> "ReplyCollector":
        if self.done:
            callback(self)
        else:
            self._callbacks.append(callback)
        return self

    def raise_for_timeout(self) -> None:
        if self.timed_out:
            raise ReplyTimeout(
                f"Сообщение {self.msg_id}: получено {self.received} из {self.expected} ответов",
                received=self.received,
                expected=self.expected,
            )

    def _add(self, reply: ReplyPayload, now: float) -> bool:
        if self.done:
            return False
        self.replies.append(reply)
        self.reply_times.append(now)
        return len(self.replies) >= self.expected

    def _finish(self, timed_out: bool) -> None:
        if self.done:
            return
        self.done = True
        self.timed_out = timed_out
        if self._timer is not None:
            self._timer.cancel()
        callbacks, self._callbacks = self._callbacks, []
        for callback in callbacks:
            callback(self)


ClientHandler = Callable[[Envelope, Tuple[Subscription, ...]], None]


class Dispatcher:
    """
    Оверлей брокеров с таблицами подписок.

    Управляющая плоскость ((от)подписки) применяется синхронно ко всем
    брокерам и учитывается в control_messages; сообщения данных проходят
    по связям с задержкой и потерями NetworkModel.
    """

    def __init__(
        self,
        sim: Simulator,
        network: NetworkModel,
        topology: OverlayTopology,
        reply_timeout: float = 10.0,
        stats: Optional[MatchStats] = None,
    ):
        route_table_check(topology)
        self.sim = sim
        self.network = network
        self.topology = topology
        self.reply_timeout = reply_timeout
        self.stats = stats if stats is not None else MatchStats()
        self.traces: List[DeliveryTrace] = []
        self.control_messages = 0
        self._ids = itertools.count(1)
        self._sub_ids = itertools.count(1)
        self._handlers: Dict[NodeId, ClientHandler] = {}
        self._subs: Dict[int, Subscription] = {}
        # broker -> направление -> {sub_id: Subscription}
        self._tables: Dict[BrokerId, Dict[str, Dict[int, Subscription]]] = {
            b: {} for b in topology.brokers
        }
        self._next_hop: Dict[BrokerId, Dict[BrokerId, BrokerId]] = {}
        self._collectors: Dict[ElementId, ReplyCollector] = {}
        self._trace_by_id: Dict[ElementId, DeliveryTrace] = {}

    # -- клиенты ----------------------------------------------------------

    def attach_client(self, client: NodeId, handler: ClientHandler) -> BrokerId:
        broker = self.topology.broker_of(client)
        self._handlers[client] = handler
        return broker

    def _broker_of(self, client: NodeId) -> BrokerId:
        if client not in self._handlers:
            raise DetachedClient(f"Клиент {client} не подключён к диспетчеру")
        return self.topology.broker_of(client)

    def _next(self, broker: BrokerId, target: BrokerId) -> BrokerId:
        """Следующий брокер на пути broker -> target"""
        table = self._next_hop.get(target)
        if table is None:
            table = {}
            frontier = [target]
            seen = {target}
            while frontier:
                nxt = []
                for b in frontier:
                    for n in self.topology.neighbors(b):
                        if n not in seen:
                            seen.add(n)
                            table[n] = b
                            nxt.append(n)
                frontier = nxt
            self._next_hop[target] = table
        return table[broker]

    # -- подписки ---------------------------------------------------------

    def subscribe(self, client: NodeId, flt: Filter) -> Subscription:
        """
        Подписаться и распространить фильтр по дереву

        Args:
            client: Подключённый клиент
            flt: TopicFilter или ContentFilter

        Returns:
            Subscription (дескриптор для unsubscribe)
        """
        home = self._broker_of(client)
        sub = Subscription(next(self._sub_ids), client, flt, home)
        self._subs[sub.sub_id] = sub
        for broker, table in self._tables.items():
            direction = LOCAL if broker == home else self._next(broker, home)
            table.setdefault(direction, {})[sub.sub_id] = sub
        self.control_messages += len(self.topology.links)
        logger.debug(f"t={self.sim.now:.1f} подписка {sub.key}: {flt}")
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        if not sub.active:
            return
        sub.active = False
        self._subs.pop(sub.sub_id, None)
        for table in self._tables.values():
            for entries in table.values():
                entries.pop(sub.sub_id, None)
        self.control_messages += len(self.topology.links)

    def subscription_counts(self) -> Dict[BrokerId, int]:
        return {b: sum(len(e) for e in t.values()) for b, t in self._tables.items()}

    def subscriptions_of(self, client: NodeId) -> List[Subscription]:
        return [s for s in self._subs.values() if s.client == client]

    # -- сопоставление ----------------------------------------------------

    def _matches(self, sub: Subscription, payload: Payload, ctx: MatchContext) -> bool:
        flt = sub.filter
        if isinstance(flt, TopicFilter):
            topic = getattr(payload, "topic", None)
            if topic is None:
                return False
            matched = topic == flt.name
            if isinstance(payload, FederationPayload):
                ctx.stats.record("federation", matched)
            return matched
        if isinstance(payload, ServiceMessage):
            return match_service(flt.interest, payload, ctx, sub.key)
        if isinstance(payload, AddInfoMessage):
            return match_add_info(flt.interest, payload, ctx, sub.key)
        return False

    def _evaluate(
        self,
        broker: BrokerId,
        env: Envelope,
        came_from: Optional[BrokerId],
        exhaustive: bool,
    ) -> Tuple[Dict[NodeId, List[Subscription]], List[BrokerId], List[Subscription]]:
        """
        Локальные совпадения и направления пересылки на брокере

        При exhaustive=False проверка направления прекращается на первом
        совпадении; иначе собираются все подходящие подписки.
        """
        ctx = MatchContext(env.payload, self.stats)
        local: Dict[NodeId, List[Subscription]] = {}
        forward: List[BrokerId] = []
        matched_all: List[Subscription] = []
        for direction, entries in self._tables[broker].items():
            if direction == came_from or not entries:
                continue
            hit = False
            for sub in entries.values():
                if sub.client == env.sender:
                    continue
                if self._matches(sub, env.payload, ctx):
                    hit = True
                    matched_all.append(sub)
                    if direction == LOCAL:
                        local.setdefault(sub.client, []).append(sub)
                    elif not exhaustive:
                        break
            if hit and direction != LOCAL:
                forward.append(direction)
        return local, forward, matched_all

    # -- публикация -------------------------------------------------------

    def publish(
        self,
        client: NodeId,
        payload: Payload,
        channel: ChannelClass,
        repliable: bool = False,
    ) -> DeliveryTrace:
        """
        Опубликовать сообщение

        Args:
            client: Отправитель
            payload: Полезная нагрузка
            channel: Класс канала для учёта
            repliable: Получатели могут ответить

        Returns:
            DeliveryTrace (заполняется по мере доставки)
        """
        env, trace = self._publish(client, payload, channel, repliable)
        return trace

    def publish_repliable(
        self,
        client: NodeId,
        payload: Payload,
        channel: ChannelClass,
        timeout: Optional[float] = None,
    ) -> Tuple[DeliveryTrace, ReplyCollector]:
        """
        Опубликовать сообщение с ожиданием ответов

        Число ожидаемых ответов вычисляется брокером отправителя по его
        таблице подписок. Без получателей сбор завершается сразу.
        """
        env, trace = self._publish(client, payload, channel, True)
        collector = ReplyCollector(env.msg_id, len(trace.expected))
        self._collectors[env.msg_id] = collector
        if collector.expected == 0:
            self.sim.schedule(0.0, self._close, collector, False)
        else:
            wait = self.reply_timeout if timeout is None else timeout
            collector._timer = self.sim.schedule(wait, self._close, collector, True)
        return trace, collector

    def _publish(
        self, client: NodeId, payload: Payload, channel: ChannelClass, repliable: bool
    ) -> Tuple[Envelope, DeliveryTrace]:
        origin = self._broker_of(client)
        env = Envelope(
            msg_id=ElementId(f"msg:{next(self._ids)}"),
            payload=payload,
            channel=channel,
            sender=client,
            repliable=repliable,
            hop_trace=(origin,),
            sent_at=self.sim.now,
        )
        local, forward, matched = self._evaluate(origin, env, None, exhaustive=True)
        expected = tuple(sorted({s.client for s in matched}))
        trace = DeliveryTrace(
            msg_id=env.msg_id,
            sender=client,
            channel=channel,
            published_at=self.sim.now,
            origin=origin,
            kind=type(payload).__name__,
            size=env.size,
            expected=expected,
            brokers_reached=[origin],
        )
        self.traces.append(trace)
        self._trace_by_id[env.msg_id] = trace
        self.network.counters[channel].expected_clients += len(expected)
        if not expected:
            trace.discarded = True
            self.network.discard(channel)
            return env, trace
        if self.network.crashed(client):
            trace.lost += 1
            self.network.drop(channel, env.size)
            return env, trace
        self._route(origin, env, local, forward, trace)
        return env, trace

    def _route(
        self,
        broker: BrokerId,
        env: Envelope,
        local: Dict[NodeId, List[Subscription]],
        forward: Sequence[BrokerId],
        trace: DeliveryTrace,
    ) -> None:
        for client, subs in local.items():
            self.network.transmit_local(
                broker, client, env.channel, self._deliver_local, client, env, tuple(subs), trace
            )
        for neighbor in forward:
            trace.link_traversals += 1
            sent = self.network.transmit(
                broker, neighbor, env.channel, env.size, self._on_broker, neighbor, env.hop(neighbor), broker, trace
            )
            if not sent:
                trace.lost += 1

    def _on_broker(self, broker: BrokerId, env: Envelope, came_from: BrokerId, trace: DeliveryTrace) -> None:
        trace.brokers_reached.append(broker)
        depth = len(env.hop_trace) - 1
        if depth > trace.max_depth:
            trace.max_depth = depth
        local, forward, _ = self._evaluate(broker, env, came_from, exhaustive=False)
        self._route(broker, env, local, forward, trace)

    def _deliver_local(
        self, client: NodeId, env: Envelope, subs: Tuple[Subscription, ...], trace: DeliveryTrace
    ) -> None:
        if client in trace.recipients:
            return
        trace.recipients[client] = env.hop_trace
        self.network.counters[env.channel].reached_clients += 1
        handler = self._handlers.get(client)
        if handler is not None:
            handler(env, subs)

    # -- ответы -----------------------------------------------------------

    def reply(self, client: NodeId, request: Envelope, body=None) -> None:
        """
        Ответить на repliable-сообщение по обратному пути запроса

        Args:
            client: Отвечающий клиент
            request: Полученный конверт (с hop_trace)
            body: Содержимое ответа
        """
        if not request.repliable:
            raise ValueError(f"Сообщение {request.msg_id} не допускает ответа")
        payload = ReplyPayload(reply_to=request.msg_id, responder=client, body=body)
        env = Envelope(
            msg_id=ElementId(f"msg:{next(self._ids)}"),
            payload=payload,
            channel=ChannelClass.REPLY,
            sender=client,
            reply_to=request.msg_id,
            hop_trace=(request.hop_trace[-1],),
            sent_at=self.sim.now,
        )
        path = tuple(reversed(request.hop_trace))
        self._reply_step(env, path, 0, request.sender)

    def _reply_step(self, env: Envelope, path: Tuple[BrokerId, ...], index: int, requester: NodeId) -> None:
        here = path[index]
        if index == len(path) - 1:
            self.network.transmit_local(here, requester, ChannelClass.REPLY, self._deliver_reply, env)
            return
        nxt = path[index + 1]
        self.network.transmit(
            here, nxt, ChannelClass.REPLY, env.size, self._on_reply_hop, env.hop(nxt), path, index + 1, requester
        )

    def _on_reply_hop(self, env: Envelope, path: Tuple[BrokerId, ...], index: int, requester: NodeId) -> None:
        self._reply_step(env, path, index, requester)

    def _deliver_reply(self, env: Envelope) -> None:
        collector = self._collectors.get(env.reply_to)
        if collector is None:
            return
        if collector._add(env.payload, self.sim.now):
            self._close(collector, False)

    def _close(self, collector: ReplyCollector, timed_out: bool) -> None:
        if collector.done:
            return
        timed_out = timed_out and collector.received < collector.expected
        self._collectors.pop(collector.msg_id, None)
        if timed_out:
            logger.warning(
                f"t={self.sim.now:.1f} {collector.msg_id}: таймаут, "
                f"ответов {collector.received}/{collector.expected}"
            )
        collector._finish(timed_out)

    def trace(self, msg_id: ElementId) -> Optional[DeliveryTrace]:
        return self._trace_by_id.get(msg_id)
