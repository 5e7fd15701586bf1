"""
Стили PS и PSR: федерация как топик диспетчера

PS - продвижения под лизом, повторная публикация каждые renew_period.
PSR - продвижения без лиза; новый член рассылает repliable-запрос, и каждый
член отвечает элементами, которые продвигал он сам.
"""
import logging
from typing import Dict, Optional

from core.federation_info import FederationStyle
from core.messages import ElementMessage, FederationAction, FederationPayload
from core.service_model import ElementId
from network.channels import ChannelClass
from network.dispatcher import Envelope, ReplyCollector, Subscription, TopicFilter
from network.simulator import PeriodicTimer
from styles.base import CooperationStyle

logger = logging.getLogger(__name__)

# Повторы запроса каталога элементов при неполных ответах (PSR)
JOIN_RETRIES = 3


class TopicStyle(CooperationStyle):
    """Общая часть PS/PSR: подписка на топик федерации"""

    def __init__(self, host, info):
        super().__init__(host, info)
        self.dispatcher = host.dispatcher
        self.topic: str = info.topic
        self._subscription: Optional[Subscription] = None

    def _payload(self, action: FederationAction, element: Optional[ElementMessage] = None,
                 element_id: Optional[ElementId] = None) -> FederationPayload:
        return FederationPayload(self.fed_id, self.topic, action, self.node_id, element, element_id)

    def _publish(self, payload: FederationPayload) -> None:
        self.dispatcher.publish(self.node_id, payload, ChannelClass.FEDERATION)

    def join(self) -> None:
        self._subscription = self.dispatcher.subscribe(self.node_id, TopicFilter(self.topic))
        self.active = True

    def leave(self) -> None:
        if self._subscription is not None:
            self.dispatcher.unsubscribe(self._subscription)
            self._subscription = None
        self.active = False

    def dismiss(self) -> None:
        self.counters.control_messages += 1
        self._publish(self._payload(FederationAction.DISMISS))
        self.host.federation_dismissed(self.fed_id)

    def on_payload(self, env: Envelope) -> None:
        payload: FederationPayload = env.payload
        if payload.action is FederationAction.PROMOTE:
            self.counters.payload_messages += 1
            self._accept(payload.element)
        elif payload.action is FederationAction.RETRACT:
            self._drop(payload.element_id)
        elif payload.action is FederationAction.DISMISS:
            self.host.federation_dismissed(self.fed_id)
        elif payload.action is FederationAction.JOIN_REQUEST:
            self._on_join_request(env)

    def _on_join_request(self, env: Envelope) -> None:
        pass


class PublishSubscribeStyle(TopicStyle):
    """PS: продвижение под лизом с периодическим продлением"""

    style = FederationStyle.PS

    def __init__(self, host, info):
        super().__init__(host, info)
        self.lease = host.config.lease
        self._renewals: Dict[ElementId, PeriodicTimer] = {}

    def promote(self, element: ElementMessage) -> None:
        element_id = element.element_id
        leased = element.with_lease(self.lease.duration, self.lease.renew_period)
        self.own[element_id] = leased
        self._send(element_id)
        old = self._renewals.pop(element_id, None)
        if old is not None:
            old.cancel()
        self._renewals[element_id] = self.sim.every(self.lease.renew_period, self._send, element_id)

    def _send(self, element_id: ElementId) -> None:
        element = self.own.get(element_id)
        if element is not None:
            self._publish(self._payload(FederationAction.PROMOTE, element))

    def retract(self, element_id: ElementId) -> None:
        timer = self._renewals.pop(element_id, None)
        if timer is not None:
            timer.cancel()
        if self.own.pop(element_id, None) is not None:
            self.counters.control_messages += 1
            self._publish(self._payload(FederationAction.RETRACT, element_id=element_id))

    def leave(self) -> None:
        for timer in self._renewals.values():
            timer.cancel()
        self._renewals.clear()
        self.own.clear()
        super().leave()


class PublishSubscribeReplyStyle(TopicStyle):
    """PSR: продвижение без лиза, догонка нового члена через ответы"""

    style = FederationStyle.PSR

    def __init__(self, host, info):
        super().__init__(host, info)
        self.catchup_complete = False
        self.catchup_attempts = 0

    def join(self) -> None:
        super().join()
        self._request_catchup()

    def _request_catchup(self) -> None:
        self.catchup_attempts += 1
        self.counters.control_messages += 1
        _, collector = self.dispatcher.publish_repliable(
            self.node_id, self._payload(FederationAction.JOIN_REQUEST), ChannelClass.FEDERATION
        )
        collector.on_complete(self._on_replies)

    def _on_replies(self, collector: ReplyCollector) -> None:
        if not self.active:
            return
        for reply in collector.replies:
            for element in reply.body or ():
                self.counters.payload_messages += 1
                self._accept(element)
        if collector.timed_out:
            if self.catchup_attempts < JOIN_RETRIES:
                logger.warning(
                    f"t={self.sim.now:.1f} {self.node_id}: неполная догонка в {self.info.name} "
                    f"({collector.received}/{collector.expected}), повтор"
                )
                self._request_catchup()
            return
        self.catchup_complete = True

    def _on_join_request(self, env: Envelope) -> None:
        self.counters.control_messages += 1
        self.dispatcher.reply(self.node_id, env, tuple(self.own.values()))

    def promote(self, element: ElementMessage) -> None:
        self.own[element.element_id] = element
        self._publish(self._payload(FederationAction.PROMOTE, element))

    def retract(self, element_id: ElementId) -> None:
        if self.own.pop(element_id, None) is not None:
            self.counters.control_messages += 1
            self._publish(self._payload(FederationAction.RETRACT, element_id=element_id))

    def leave(self) -> None:
        self.own.clear()
        super().leave()
