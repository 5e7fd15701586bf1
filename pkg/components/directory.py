"""
Каталог федераций

Экземпляры каталога подписаны на топик FederationDirectory и получают все
регистрации, продления и роспуски; запросы discover/lookup/list - repliable.
Синхронизации между экземплярами нет: они сходятся за счёт широковещания.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from config import DirectoryConfig
from core.errors import DireError, DuplicateFederation, NoDirectoryAvailable, NotManager, UnknownFederation
from core.federation_info import FederationInfo
from core.lease import LeaseState
from core.messages import DIRECTORY_TOPIC, DirectoryAction, DirectoryPayload, directory_endpoint_topic
from core.service_model import ElementId, NodeId
from network.channels import ChannelClass
from network.dispatcher import Dispatcher, Envelope, ReplyCollector, TopicFilter
from network.simulator import Simulator

logger = logging.getLogger(__name__)


class Liveness(Enum):
    """Результат периодической проверки федерации членом"""
    ACTIVE = "active"
    DISMISSED = "dismissed"
    DEFERRED = "deferred"


class DirectoryState:
    """
    Записи одного экземпляра каталога: fed_id -> FederationInfo с лизом

    Распущенные и истёкшие федерации остаются в tombstones, чтобы отличать
    их от федераций, регистрация которых до экземпляра не дошла.
    """

    def __init__(self, config: Optional[DirectoryConfig] = None):
        self.config = config or DirectoryConfig()
        self.entries: Dict[ElementId, FederationInfo] = {}
        self.tombstones: Dict[ElementId, float] = {}

    def _lease(self, now: float) -> LeaseState:
        return LeaseState(now, self.config.lease_duration, self.config.renew_period)

    def register(self, info: FederationInfo, now: float) -> FederationInfo:
        if info.fed_id in self.entries:
            raise DuplicateFederation(f"Федерация {info.fed_id} уже зарегистрирована")
        entry = info.with_lease(self._lease(now))
        self.entries[info.fed_id] = entry
        return entry

    def renew(
        self, fed_id: ElementId, caller: NodeId, now: float, info: Optional[FederationInfo] = None
    ) -> FederationInfo:
        """
        Продлить лиз записи

        Продление с описанием федерации восстанавливает запись, если
        регистрация до этого экземпляра не дошла.
        """
        if fed_id in self.tombstones:
            raise UnknownFederation(f"Федерация {fed_id} распущена")
        entry = self.entries.get(fed_id)
        if entry is None:
            if info is None:
                raise UnknownFederation(f"Федерация {fed_id} не зарегистрирована")
            entry = info
        if caller != entry.manager:
            raise NotManager(f"{caller} не является менеджером федерации {fed_id}")
        entry = entry.with_lease(self._lease(now))
        self.entries[fed_id] = entry
        return entry

    def dismiss(self, fed_id: ElementId, caller: NodeId, now: float = 0.0) -> Optional[FederationInfo]:
        """
        Распустить федерацию

        Роспуск федерации, регистрация которой до экземпляра не дошла,
        только запоминается в tombstones.
        """
        entry = self.entries.get(fed_id)
        if entry is None:
            if fed_id in self.tombstones:
                raise UnknownFederation(f"Федерация {fed_id} уже распущена")
            self.tombstones[fed_id] = now
            return None
        if caller != entry.manager:
            raise NotManager(f"{caller} не является менеджером федерации {fed_id}")
        self.tombstones[fed_id] = now
        return self.entries.pop(fed_id)

    def lookup(self, fed_id: ElementId, now: float) -> Optional[FederationInfo]:
        entry = self.entries.get(fed_id)
        if entry is None or (entry.lease is not None and entry.lease.expired(now)):
            return None
        return entry

    def liveness(self, fed_id: ElementId, now: float) -> Liveness:
        """
        Состояние федерации для проверки членом

        Returns:
            ACTIVE - запись с действующим лизом; DISMISSED - распущена или
            лиз истёк; DEFERRED - экземпляр о федерации не знает
        """
        if self.lookup(fed_id, now) is not None:
            return Liveness.ACTIVE
        if fed_id in self.tombstones or fed_id in self.entries:
            return Liveness.DISMISSED
        return Liveness.DEFERRED

    def find_by_name(self, name: str, now: float) -> Optional[FederationInfo]:
        for entry in self.listing(now):
            if entry.name == name:
                return entry
        return None

    def listing(self, now: float) -> List[FederationInfo]:
        return [e for e in self.entries.values() if e.lease is None or not e.lease.expired(now)]

    def sweep(self, now: float) -> List[ElementId]:
        """Удалить записи с истёкшим лизом"""
        expired = [
            fed_id for fed_id, e in self.entries.items()
            if e.lease is not None and e.lease.expired(now)
        ]
        for fed_id in expired:
            del self.entries[fed_id]
            self.tombstones[fed_id] = now
        return expired


class FederationDirectory:
    """Экземпляр каталога на узле с ролью directory"""

    def __init__(self, node_id: NodeId, sim: Simulator, dispatcher: Dispatcher, config: Optional[DirectoryConfig] = None):
        self.node_id = node_id
        self.sim = sim
        self.dispatcher = dispatcher
        self.config = config or DirectoryConfig()
        self.state = DirectoryState(self.config)
        self.errors = 0
        self.requests = 0
        dispatcher.attach_client(node_id, self._on_message)
        dispatcher.subscribe(node_id, TopicFilter(DIRECTORY_TOPIC))
        dispatcher.subscribe(node_id, TopicFilter(directory_endpoint_topic(node_id)))
        self._sweeper = sim.every(self.config.check_period, self._sweep)

    @property
    def endpoint(self) -> str:
        return directory_endpoint_topic(self.node_id)

    def _sweep(self) -> None:
        removed = self.state.sweep(self.sim.now)
        for fed_id in removed:
            logger.info(f"t={self.sim.now:.1f} каталог {self.node_id}: лиз федерации {fed_id} истёк")

    def _on_message(self, env: Envelope, subs) -> None:
        payload = env.payload
        if not isinstance(payload, DirectoryPayload):
            return
        now = self.sim.now
        action = payload.action
        try:
            if action is DirectoryAction.REGISTER:
                self.state.register(payload.info, now)
                logger.debug(f"t={now:.1f} каталог {self.node_id}: зарегистрирована {payload.info.name}")
            elif action is DirectoryAction.RENEW:
                self.state.renew(payload.fed_id, payload.sender, now, payload.info)
            elif action is DirectoryAction.DISMISS:
                self.state.dismiss(payload.fed_id, payload.sender, now)
                logger.info(f"t={now:.1f} каталог {self.node_id}: федерация {payload.fed_id} распущена")
            elif action is DirectoryAction.DISCOVER:
                self.requests += 1
                self.dispatcher.reply(self.node_id, env, self.node_id)
            elif action is DirectoryAction.LOOKUP:
                self.requests += 1
                fed_id = payload.fed_id
                self.dispatcher.reply(
                    self.node_id, env, (self.state.liveness(fed_id, now), self.state.lookup(fed_id, now))
                )
            elif action is DirectoryAction.LIST:
                self.requests += 1
                self.dispatcher.reply(self.node_id, env, tuple(self.state.listing(now)))
        except DireError as e:
            self.errors += 1
            logger.warning(f"t={now:.1f} каталог {self.node_id}: {action.value} отклонён: {e}")

    def get_stats(self) -> Dict[str, int]:
        return {
            "entries": len(self.state.entries),
            "requests": self.requests,
            "errors": self.errors,
        }


@dataclass
class DiscoveryResult:
    """Ответы на запрос обнаружения каталогов (по возрастанию задержки)"""
    endpoints: List[NodeId] = field(default_factory=list)
    timed_out: bool = False

    def raise_for_result(self) -> None:
        if not self.endpoints:
            raise NoDirectoryAvailable("Ни один каталог не ответил на запрос обнаружения")


LookupCallback = Callable[[Liveness, Optional[FederationInfo]], None]


class DirectoryClient:
    """
    Клиентская сторона каталога внутри delivery manager.

    Выбранный каталог (endpoint) запоминается до первого таймаута.
    """

    def __init__(self, node_id: NodeId, sim: Simulator, dispatcher: Dispatcher, config: Optional[DirectoryConfig] = None):
        self.node_id = node_id
        self.sim = sim
        self.dispatcher = dispatcher
        self.config = config or DirectoryConfig()
        self.endpoint: Optional[NodeId] = None

    def _broadcast(self, payload: DirectoryPayload) -> None:
        self.dispatcher.publish(self.node_id, payload, ChannelClass.DIRECTORY)

    def register(self, info: FederationInfo) -> None:
        self._broadcast(DirectoryPayload(DirectoryAction.REGISTER, self.node_id, info=info))

    def renew(self, info: FederationInfo) -> None:
        self._broadcast(DirectoryPayload(DirectoryAction.RENEW, self.node_id, info=info, fed_id=info.fed_id))

    def dismiss(self, fed_id: ElementId) -> None:
        self._broadcast(DirectoryPayload(DirectoryAction.DISMISS, self.node_id, fed_id=fed_id))

    def discover(self, callback: Callable[[DiscoveryResult], None]) -> ReplyCollector:
        """
        Обнаружить экземпляры каталога

        Args:
            callback: Получает DiscoveryResult после всех ответов или таймаута

        Returns:
            ReplyCollector запроса
        """
        payload = DirectoryPayload(DirectoryAction.DISCOVER, self.node_id)
        _, collector = self.dispatcher.publish_repliable(
            self.node_id, payload, ChannelClass.DIRECTORY, timeout=self.config.discovery_timeout
        )

        def done(c: ReplyCollector) -> None:
            result = DiscoveryResult([r.body for r in c.replies], c.timed_out)
            if result.endpoints:
                self.endpoint = result.endpoints[0]
            callback(result)

        return collector.on_complete(done)

    def lookup(self, fed_id: ElementId, callback: LookupCallback) -> None:
        """Запросить запись федерации у выбранного каталога"""
        if self.endpoint is not None:
            self._lookup_at(self.endpoint, fed_id, callback)
            return

        def discovered(result: DiscoveryResult) -> None:
            if result.endpoints:
                self._lookup_at(result.endpoints[0], fed_id, callback)
            else:
                callback(Liveness.DEFERRED, None)

        self.discover(discovered)

    def _lookup_at(self, endpoint: NodeId, fed_id: ElementId, callback: LookupCallback) -> None:
        payload = DirectoryPayload(
            DirectoryAction.LOOKUP, self.node_id, topic=directory_endpoint_topic(endpoint), fed_id=fed_id
        )
        _, collector = self.dispatcher.publish_repliable(
            self.node_id, payload, ChannelClass.DIRECTORY, timeout=self.config.discovery_timeout
        )

        def done(c: ReplyCollector) -> None:
            if not c.replies:
                self.endpoint = None
                callback(Liveness.DEFERRED, None)
                return
            status, info = c.replies[0].body
            callback(status, info)

        collector.on_complete(done)

    def list_federations(self, callback: Callable[[Tuple[FederationInfo, ...]], None]) -> None:
        """Список активных федераций у выбранного каталога (пустой, если каталога нет)"""

        def ask(endpoint: NodeId) -> None:
            payload = DirectoryPayload(DirectoryAction.LIST, self.node_id, topic=directory_endpoint_topic(endpoint))
            _, collector = self.dispatcher.publish_repliable(
                self.node_id, payload, ChannelClass.DIRECTORY, timeout=self.config.discovery_timeout
            )
            collector.on_complete(lambda c: callback(c.replies[0].body if c.replies else ()))

        if self.endpoint is not None:
            ask(self.endpoint)
        else:
            self.discover(lambda r: ask(r.endpoints[0]) if r.endpoints else callback(()))
