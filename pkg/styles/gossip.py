"""
Стиль Gossip: членство SCAMP и эпидемическое распространение продвижений

Каждый член хранит частичное представление (view) размера порядка
(C+1)·ln(N) и множество узлов, у которых он сам есть в представлении
(in_view). Все сообщения, включая подписки SCAMP, идут через точка-точка
каналы NetworkModel и подвержены задержке, потерям и авариям.

Распространение: продвижения, отзывы и роспуск - слухи (rumors), которые
узел хранит всё время членства. Для каждого слуха ведётся дайджест -
множество узлов, про которые известно, что слух у них есть. Раз в
exchange_period узел выбирает случайного члена view, которому должен
хотя бы один слух, и отправляет ему все недостающие слухи пакетом.
Новому члену view предлагается дайджест; полезная нагрузка уходит только
за теми элементами, которых у него нет.
"""
import logging
import math
from functools import partial
from typing import Any, Dict, List, Optional, Set, Tuple

from core.errors import DeadContact
from core.federation_info import FederationStyle
from core.messages import HEADER_SIZE, ElementMessage
from core.service_model import ElementId, NodeId
from network.channels import ChannelClass
from network.simulator import PeriodicTimer, Timer
from styles.base import CooperationStyle

logger = logging.getLogger(__name__)

CONTROL_SIZE = 32

# ("promote", id, element) / ("retract", id) / ("dismiss", fed_id)
GossipItem = Tuple[Any, ...]
RumorKey = Tuple[str, ElementId]


def rumor_key(item: GossipItem) -> RumorKey:
    return item[0], item[1]


class GossipStyle(CooperationStyle):
    """Член gossip-федерации"""

    style = FederationStyle.GOSSIP

    def __init__(self, host, info):
        super().__init__(host, info)
        self.network = host.network
        self.cfg = host.config.gossip
        self.random = host.sim.random
        self.view: Dict[NodeId, None] = {}
        self.in_view: Dict[NodeId, None] = {}
        self.known: Dict[ElementId, ElementMessage] = {}
        self.deletion_list: Dict[ElementId, None] = {}
        self.rumors: Dict[RumorKey, GossipItem] = {}
        self.digest: Dict[RumorKey, Set[NodeId]] = {}
        self.missed: Dict[NodeId, int] = {}
        self.last_heard = self.sim.now
        self.joined = False
        self.dismissed = False
        self.catchup_complete = False
        self.join_error: Optional[DeadContact] = None
        self._owed: Dict[NodeId, Dict[RumorKey, None]] = {}
        self._offers: List[Tuple[NodeId, Tuple[RumorKey, ...]]] = []
        self._candidates: List[NodeId] = []
        self._tick: Optional[Timer] = None
        self._join_timer: Optional[Timer] = None
        self._catchup_timer: Optional[Timer] = None
        self._timers: List[PeriodicTimer] = []
        self._phase = self.random.uniform(0.0, self.cfg.exchange_period)

    # -- каналы -----------------------------------------------------------

    def _style_at(self, node: NodeId) -> Optional["GossipStyle"]:
        if node == self.node_id:
            return self
        peer = self.host.peer_style(node, self.fed_id)
        if peer is None or not peer.active:
            return None
        return peer

    def _send(self, target: NodeId, kind: Optional[str], method: str, *args: Any) -> None:
        """
        Отправить служебное сообщение члену target

        Args:
            target: Получатель
            kind: Вид обслуживающего трафика; None - учитывается в control_messages
            method: Обработчик на стороне получателя
        """
        if kind is None:
            self.counters.control_messages += 1
        else:
            self.counters.maintenance[kind] += 1
        self.network.transmit(
            self.node_id, target, ChannelClass.GOSSIP, CONTROL_SIZE, self._arrive, target, method, args
        )

    def _arrive(self, target: NodeId, method: str, args: Tuple) -> None:
        peer = self._style_at(target)
        if peer is not None:
            getattr(peer, method)(*args)

    # -- представление ----------------------------------------------------

    def _add_member(self, node: NodeId) -> None:
        self.view[node] = None
        self.missed[node] = 0
        self._owed.setdefault(node, {})

    def _remove_member(self, node: NodeId) -> None:
        self.view.pop(node, None)
        self.missed.pop(node, None)
        self._owed.pop(node, None)

    def _keep(self, subscriber: NodeId) -> None:
        """Оставить подписку у себя и предложить подписчику дайджест своих слухов"""
        self._add_member(subscriber)
        offered = tuple(key for key, holders in self.digest.items() if subscriber not in holders)
        for key in offered:
            self.digest[key].add(subscriber)
        self._send(subscriber, None, "on_kept", self.node_id, offered)

    def _evict(self, node: NodeId) -> None:
        self._remove_member(node)
        self._send(node, None, "on_view_removed", self.node_id)

    def on_kept(self, holder: NodeId, offered: Tuple[RumorKey, ...]) -> None:
        """holder добавил этот узел в своё представление"""
        self.in_view[holder] = None
        if not self.catchup_complete:
            self._offers.append((holder, offered))
            return
        self._answer_offer(holder, offered)

    def _answer_offer(self, holder: NodeId, offered: Tuple[RumorKey, ...]) -> None:
        lacking = []
        for key in offered:
            if self._holds(key):
                self._mark_held(key, holder)
            else:
                lacking.append(key)
        if lacking:
            self._send(holder, None, "on_digest_request", self.node_id, tuple(lacking))

    def on_digest_request(self, member: NodeId, keys: Tuple[RumorKey, ...]) -> None:
        owed = self._owed.get(member)
        if owed is None:
            return
        for key in keys:
            if key in self.rumors:
                owed[key] = None
        self._schedule_exchange()

    def on_view_removed(self, holder: NodeId) -> None:
        self.in_view.pop(holder, None)

    def on_unsubscribe(self, node: NodeId) -> None:
        """node переподписывается: убрать его из своего представления"""
        self._remove_member(node)

    # -- вступление -------------------------------------------------------

    def join(self) -> None:
        self.active = True
        candidates: List[NodeId] = []
        for node in (self.preferred_contact, self.info.param("contact"), *self.info.param("fallbacks", ())):
            if node and node != self.node_id and node not in candidates:
                candidates.append(node)
        if not candidates:
            self.catchup_complete = True
            self._start()
            return
        self._candidates = candidates
        self._try_next()

    def _try_next(self) -> None:
        if not self._candidates:
            self.join_error = DeadContact(f"{self.node_id}: ни один контакт федерации {self.info.name} не ответил")
            logger.warning(f"t={self.sim.now:.1f} {self.join_error}")
            self.active = False
            return
        contact = self._candidates.pop(0)
        self._send(contact, "join", "on_subscribe", self.node_id)
        self._join_timer = self.sim.schedule(self.cfg.join_timeout, self._join_timeout, contact)

    def _join_timeout(self, contact: NodeId) -> None:
        if self.joined or not self.active:
            return
        logger.warning(f"t={self.sim.now:.1f} {self.node_id}: контакт {contact} не ответил на подписку")
        self._try_next()

    def raise_for_result(self) -> None:
        if self.join_error is not None:
            raise self.join_error

    def on_subscribe(self, joiner: NodeId) -> None:
        """Контакт: подтвердить вступление и разослать |view| + C копий подписки"""
        self.in_view[joiner] = None
        self._send(joiner, "join", "on_join_ack", self.node_id)
        self.place_subscription(joiner, len(self.view) + self.cfg.c, "join")

    def on_join_ack(self, contact: NodeId) -> None:
        if self.joined or not self.active:
            return
        if self._join_timer is not None:
            self._join_timer.cancel()
        self._add_member(contact)
        self._start()
        self._send(contact, "catchup", "on_catchup_request", self.node_id)
        self._catchup_timer = self.sim.schedule(self.cfg.join_timeout, self._finish_catchup)

    def on_catchup_request(self, requester: NodeId) -> None:
        self._send(
            requester, "catchup", "on_catchup_reply",
            tuple(self.known.values()), tuple(self.deletion_list),
        )

    def on_catchup_reply(self, elements: Tuple[ElementMessage, ...], tombstones: Tuple[ElementId, ...]) -> None:
        for element_id in tombstones:
            self._tombstone(element_id)
        for element in elements:
            element_id = element.element_id
            if element_id in self.deletion_list or element_id in self.known:
                continue
            self.known[element_id] = element
            self._accept(element)
        self._finish_catchup()

    def _finish_catchup(self) -> None:
        """Ответ на запрос догоняния получен (или не пришёл): разобрать отложенные дайджесты"""
        if self.catchup_complete:
            return
        self.catchup_complete = True
        if self._catchup_timer is not None:
            self._catchup_timer.cancel()
            self._catchup_timer = None
        offers, self._offers = self._offers, []
        for holder, offered in offers:
            self._answer_offer(holder, offered)

    def _start(self) -> None:
        self.joined = True
        self.last_heard = self.sim.now
        hb = self.cfg.heartbeat_period
        resub = self.cfg.resubscription_period
        self._timers = [
            self.sim.every(hb, self._heartbeat, first=self.random.uniform(0.0, hb)),
            self.sim.every(resub, self._resubscribe, first=self.random.uniform(0.0, resub)),
        ]

    # -- подписка SCAMP ---------------------------------------------------

    def place_subscription(self, subscriber: NodeId, copies: int, kind: str) -> None:
        """
        Разослать copies копий подписки subscriber по своему представлению

        Args:
            subscriber: Подписывающийся узел
            copies: Число копий (все узлы view, остаток - случайные узлы view)
            kind: Вид обслуживающего трафика для учёта
        """
        targets = [n for n in self.view if n != subscriber]
        if not targets:
            if subscriber != self.node_id and subscriber not in self.view:
                self._keep(subscriber)
            return
        if copies >= len(targets):
            sequence = targets + [self.random.choice(targets) for _ in range(copies - len(targets))]
        else:
            sequence = self.random.sample(targets, copies)
        for target in sequence:
            self._send(target, kind, "on_forward", subscriber, 1, kind, self.node_id)

    def on_forward(self, subscriber: NodeId, hops: int, kind: str, sender: NodeId) -> None:
        """Оставить подписку с вероятностью 1/(1+|view|), иначе переслать случайному члену view"""
        if subscriber != self.node_id and subscriber not in self.view:
            if not self.view or self.random.random() < 1.0 / (1 + len(self.view)):
                self._keep(subscriber)
                return
        if hops >= self.cfg.max_forward_hops:
            logger.debug(f"t={self.sim.now:.1f} {self.node_id}: подписка {subscriber} отброшена после {hops} пересылок")
            return
        target = self.random.choice(list(self.view)) if self.view else sender
        self._send(target, kind, "on_forward", subscriber, hops + 1, kind, self.node_id)

    # -- обслуживание -----------------------------------------------------

    def _heartbeat(self) -> None:
        if not self.active:
            return
        for target in list(self.view):
            if self.missed.get(target, 0) >= self.cfg.missed_heartbeats:
                logger.debug(f"t={self.sim.now:.1f} {self.node_id}: {target} исключён из представления")
                self._evict(target)
                continue
            self.missed[target] = self.missed.get(target, 0) + 1
            self._send(target, "heartbeat", "on_heartbeat", self.node_id)
        silence = self.sim.now - self.last_heard
        if silence > self.cfg.isolation_heartbeats * self.cfg.heartbeat_period:
            logger.debug(f"t={self.sim.now:.1f} {self.node_id}: изоляция в {self.info.name}, переподписка")
            self._resubscribe()

    def on_heartbeat(self, sender: NodeId) -> None:
        self.last_heard = self.sim.now
        self.in_view[sender] = None
        self._send(sender, None, "on_heartbeat_ack", self.node_id)

    def on_heartbeat_ack(self, member: NodeId) -> None:
        if member in self.missed:
            self.missed[member] = 0

    def _resubscribe(self) -> None:
        """Переподписка через случайный узел view с числом копий, равным |in_view|"""
        if not self.active or not self.joined:
            return
        contacts = list(self.view)
        if not contacts:
            contact = self.info.param("contact")
            if not contact or contact == self.node_id:
                return
            contacts = [contact]
        contact = self.random.choice(contacts)
        holders = list(self.in_view)
        for holder in holders:
            self._send(holder, None, "on_unsubscribe", self.node_id)
        self.in_view.clear()
        self.last_heard = self.sim.now
        self._send(contact, "resubscription", "on_resubscribe", self.node_id, len(holders))

    def on_resubscribe(self, subscriber: NodeId, holders: int) -> None:
        copies = holders if holders else len(self.view) + self.cfg.c
        self.place_subscription(subscriber, copies, "resubscription")

    # -- распространение --------------------------------------------------

    def _holds(self, key: RumorKey) -> bool:
        kind, ref = key
        if kind == "promote":
            return ref in self.known or ref in self.deletion_list
        if kind == "retract":
            return ref in self.deletion_list
        return self.dismissed

    def _mark_held(self, key: RumorKey, node: NodeId) -> None:
        holders = self.digest.get(key)
        if holders is not None:
            holders.add(node)
        owed = self._owed.get(node)
        if owed is not None:
            owed.pop(key, None)

    def _spread(self, item: GossipItem, source: Optional[NodeId] = None) -> None:
        """Запомнить слух и задолжать его всем членам view, про которых неизвестно, что он у них есть"""
        key = rumor_key(item)
        self.rumors[key] = item
        holders = self.digest.setdefault(key, set())
        holders.add(self.node_id)
        if source is not None:
            holders.add(source)
        for member in self.view:
            if member not in holders:
                self._owed[member][key] = None
        self._schedule_exchange()

    def _next_tick(self) -> float:
        period = self.cfg.exchange_period
        now = self.sim.now
        if now < self._phase:
            return self._phase
        return self._phase + (math.floor((now - self._phase) / period) + 1) * period

    def _schedule_exchange(self) -> None:
        if self._tick is None and self.active:
            self._tick = self.sim.schedule_at(self._next_tick(), self._exchange)

    def _exchange(self) -> None:
        """Такт обмена: все долги одному случайному члену view"""
        self._tick = None
        if not self.active:
            return
        members = [member for member, owed in self._owed.items() if owed]
        if members:
            target = self.random.choice(members)
            owed = self._owed[target]
            items = [self.rumors[key] for key in owed]
            for key in owed:
                self.digest[key].add(target)
            owed.clear()
            self._push(target, items)
        if self.dismissed and not self._owes(("dismiss", self.fed_id)):
            self.host.federation_dismissed(self.fed_id)
            return
        if any(self._owed.values()):
            self._schedule_exchange()

    def _owes(self, key: RumorKey) -> bool:
        return any(key in owed for owed in self._owed.values())

    def _push(self, target: NodeId, items: List[GossipItem]) -> None:
        promotes = sum(1 for item in items if item[0] == "promote")
        self.counters.payload_messages += promotes
        self.counters.control_messages += len(items) - promotes
        size = sum(item[2].size if item[0] == "promote" else CONTROL_SIZE for item in items) // len(items)
        self.network.transmit_batch(
            self.node_id, target, ChannelClass.GOSSIP, items, size + HEADER_SIZE,
            partial(self._arrive_batch, target),
        )

    def _arrive_batch(self, target: NodeId, items: List[GossipItem]) -> None:
        peer = self._style_at(target)
        if peer is not None:
            peer.receive(items, self.node_id)

    def receive(self, items: List[GossipItem], sender: Optional[NodeId] = None) -> None:
        """Слухи, полученные от другого члена; повторные копии не обрабатываются"""
        for item in items:
            kind = item[0]
            key = rumor_key(item)
            if sender is not None:
                self._mark_held(key, sender)
            if kind == "promote":
                element_id, element = item[1], item[2]
                if element_id in self.deletion_list or element_id in self.known:
                    self.counters.duplicates += 1
                    continue
                self.known[element_id] = element
                self._accept(element)
                self._spread(item, sender)
            elif kind == "retract":
                element_id = item[1]
                if element_id in self.deletion_list:
                    continue
                self._tombstone(element_id)
                self._spread(item, sender)
            elif kind == "dismiss" and not self.dismissed:
                self.dismissed = True
                self._spread(item, sender)

    def _tombstone(self, element_id: ElementId) -> None:
        self.deletion_list[element_id] = None
        self.known.pop(element_id, None)
        self.own.pop(element_id, None)
        self._drop(element_id)
        key = ("promote", element_id)
        self.rumors.pop(key, None)
        self.digest.pop(key, None)
        for owed in self._owed.values():
            owed.pop(key, None)

    def promote(self, element: ElementMessage) -> None:
        element_id = element.element_id
        if element_id in self.deletion_list:
            logger.warning(f"t={self.sim.now:.1f} {self.node_id}: {element_id} уже удалён из {self.info.name}")
            return
        self.own[element_id] = element
        self.known[element_id] = element
        self._spread(("promote", element_id, element))

    def retract(self, element_id: ElementId) -> None:
        self._tombstone(element_id)
        self._spread(("retract", element_id))

    def dismiss(self) -> None:
        self.dismissed = True
        self._spread(("dismiss", self.fed_id))

    def live_elements(self):
        return set(self.known)

    # -- выход ------------------------------------------------------------

    def leave(self) -> None:
        """
        Отписка SCAMP: первые |in_view|-C-1 узлов заменяют уходящий узел
        узлами его представления, остальные просто удаляют его
        """
        for timer in self._timers:
            timer.cancel()
        self._timers = []
        for timer in (self._tick, self._join_timer, self._catchup_timer):
            if timer is not None:
                timer.cancel()
        self._tick = None
        if self.joined:
            holders = list(self.in_view)
            targets = list(self.view)
            replace_count = max(0, len(holders) - self.cfg.c - 1)
            for i, holder in enumerate(holders):
                replacement = targets[i % len(targets)] if i < replace_count and targets else None
                self._send(holder, "leave", "on_leave", self.node_id, replacement)
            for target in targets:
                self._send(target, "leave", "on_view_removed", self.node_id)
        self.view.clear()
        self.in_view.clear()
        self._owed.clear()
        self.active = False
        self.joined = False

    def on_leave(self, node: NodeId, replacement: Optional[NodeId]) -> None:
        self._remove_member(node)
        if replacement is not None and replacement != self.node_id and replacement not in self.view:
            self._keep(replacement)
