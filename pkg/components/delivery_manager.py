"""
Delivery manager - фасад организации между локальным реестром и диспетчером

Интерфейс управления: публикация сервисов и дополнительных фасетов на
маркетплейсе, объявление интересов, создание/вступление/выход из
федераций и продвижение элементов. Стили федераций подключаются через
styles.create_style.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

from components.directory import DirectoryClient, Liveness
from components.registry import InMemoryRegistry, NullRegistry
from config import SimConfig
from core.errors import (
    AddInfoForbidden,
    AlreadyJoined,
    DireError,
    NotAMember,
    NotCreator,
    NotManager,
    UnknownElement,
    UnknownFacet,
    UnknownFederation,
    UnknownService,
)
from core.facet_query import Interest
from core.federation_info import FederationInfo, FederationStyle
from core.lease import LeaseState
from core.messages import AddInfoMessage, ElementMessage, FederationPayload, ServiceMessage
from core.schemas import DEFAULT_CATALOG
from core.service_model import (
    ElementId,
    Facet,
    FacetKind,
    IdGenerator,
    KeyRing,
    NodeId,
    SchemaDescriptor,
    ServiceEntry,
    XmlElement,
    attach_facet,
)
from network.channels import ChannelClass
from network.dispatcher import ContentFilter, Dispatcher, Envelope, Subscription
from network.simulator import PeriodicTimer, Timer
from styles import create_style
from styles.base import CooperationStyle, FederationLedger

logger = logging.getLogger(__name__)

MARKETPLACE = "market"

# Проверка истечения лиза выполняется чуть позже момента истечения
PURGE_SLACK = 1.0


# ---------------------------------------------------------------------------
# Команды управления
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ServiceDraft:
    """Новый сервис: имя, документы фасетов спецификации"""
    name: str
    documents: Tuple[Tuple[SchemaDescriptor, XmlElement], ...]
    allow_add_info: bool = False


@dataclass(frozen=True)
class AddInfoDraft:
    """Новый дополнительный фасет к полученному сервису"""
    service_ref: ElementId
    schema: SchemaDescriptor
    root: XmlElement


@dataclass(frozen=True)
class Share:
    service_id: Optional[ElementId] = None
    draft: Optional[ServiceDraft] = None


@dataclass(frozen=True)
class ShareAddInfo:
    facet_id: Optional[ElementId] = None
    draft: Optional[AddInfoDraft] = None


@dataclass(frozen=True)
class DeclareInterest:
    interest: Interest


@dataclass(frozen=True)
class RevokeInterest:
    handle: "InterestHandle"


@dataclass(frozen=True)
class CreateFederation:
    name: str
    style: FederationStyle
    join_params: Optional[Dict[str, Any]] = None


@dataclass(frozen=True)
class JoinFederation:
    fed_id: Optional[ElementId] = None
    info: Optional[FederationInfo] = None
    contact: Optional[NodeId] = None


@dataclass(frozen=True)
class LeaveFederation:
    fed_id: ElementId


@dataclass(frozen=True)
class Promote:
    fed_id: ElementId
    element_id: ElementId


@dataclass(frozen=True)
class PromoteAddInfo(Promote):
    """Продвижение собственного дополнительного фасета"""


@dataclass(frozen=True)
class Retract:
    fed_id: ElementId
    element_id: ElementId


@dataclass(frozen=True)
class DismissFederation:
    fed_id: ElementId


@dataclass(frozen=True)
class Withdraw:
    element_id: ElementId


ManagementCommand = Union[
    Share, ShareAddInfo, DeclareInterest, RevokeInterest, CreateFederation, JoinFederation,
    LeaveFederation, Promote, Retract, DismissFederation, Withdraw,
]


# ---------------------------------------------------------------------------
# Состояние узла
# ---------------------------------------------------------------------------

@dataclass
class InterestHandle:
    """Объявленный интерес и его подписка в диспетчере"""
    interest: Interest
    subscription: Subscription

    @property
    def active(self) -> bool:
        return self.subscription.active


@dataclass
class Holding:
    """Полученный удалённый элемент и источники, через которые он пришёл"""
    element_id: ElementId
    kind: str
    first_seen: float
    last_seen: float
    # источник -> лиз (None - без лиза: PSR и gossip)
    sources: Dict[str, Optional[LeaseState]] = field(default_factory=dict)

    def expires_at(self) -> Optional[float]:
        leases = list(self.sources.values())
        if not leases or any(lease is None for lease in leases):
            return None
        return max(lease.expires_at for lease in leases)


@dataclass
class Membership:
    info: FederationInfo
    style: CooperationStyle
    joined_at: float
    check_timer: Optional[PeriodicTimer] = None


@dataclass
class NodeState:
    """Снимок состояния узла для генератора нагрузки"""
    node_id: NodeId
    role: str
    own_services: List[ElementId]
    own_add_info: List[ElementId]
    held_services: List[ElementId]
    add_info_targets: List[ElementId]
    shared: Set[ElementId]
    joined: List[ElementId]
    interests: int


# ---------------------------------------------------------------------------
# Delivery manager
# ---------------------------------------------------------------------------

class DeliveryManager:
    """Delivery manager одного узла"""

    def __init__(
        self,
        node_id: NodeId,
        dispatcher: Dispatcher,
        keyring: KeyRing,
        config: Optional[SimConfig] = None,
        ledger: Optional[FederationLedger] = None,
        role: str = "full",
        peers: Optional[Callable[[NodeId], Optional["DeliveryManager"]]] = None,
    ):
        self.node_id = node_id
        self.dispatcher = dispatcher
        self.sim = dispatcher.sim
        self.network = dispatcher.network
        self.keyring = keyring
        self.config = config or SimConfig()
        self.ledger = ledger if ledger is not None else FederationLedger()
        self.role = role
        self.catalog = DEFAULT_CATALOG
        self.registry = NullRegistry() if role == "tiny" else InMemoryRegistry()
        self.key = keyring.register(node_id)
        self.ids = IdGenerator(node_id)
        self.directory = DirectoryClient(node_id, self.sim, dispatcher, self.config.directory)
        self._peers = peers or (lambda node: None)

        self.rejected_unauthorized = 0
        self.errors = 0
        self.received = 0
        self.liveness_log: List[Tuple[float, ElementId, Liveness]] = []

        self._holdings: Dict[ElementId, Holding] = {}
        self._shares: Dict[ElementId, PeriodicTimer] = {}
        self._interests: Dict[int, InterestHandle] = {}
        self._memberships: Dict[ElementId, Membership] = {}
        self._managed: Dict[ElementId, Tuple[FederationInfo, PeriodicTimer]] = {}
        self._purge_timer: Optional[Timer] = None
        self._purge_at: Optional[float] = None

        dispatcher.attach_client(node_id, self._on_delivery)

    # =========================================================================
    # Локальные элементы
    # =========================================================================

    def create_service(
        self,
        name: str,
        documents: Sequence[Tuple[SchemaDescriptor, XmlElement]],
        allow_add_info: bool = False,
    ) -> ServiceEntry:
        """
        Создать сервис с фасетами спецификации, подписанными ключом узла

        Args:
            name: Имя сервиса
            documents: Пары (схема, документ) фасетов спецификации
            allow_add_info: Разрешить другим узлам дополнительные фасеты

        Returns:
            ServiceEntry, сохранённый в локальном реестре
        """
        service_id = self.ids.next_id()
        facets = tuple(
            Facet.create(self.key, self.ids, FacetKind.SPECIFICATION, schema, root, service_id)
            for schema, root in documents
        )
        entry = ServiceEntry(service_id, name, self.node_id, allow_add_info, facets)
        self.registry.put(entry)
        return entry

    def add_spec_facet(self, service_id: ElementId, schema: SchemaDescriptor, root: XmlElement) -> ServiceEntry:
        """Добавить фасет спецификации; описание переотправляется при следующем продлении"""
        entry = self._own_service(service_id)
        facet = Facet.create(self.key, self.ids, FacetKind.SPECIFICATION, schema, root, service_id)
        updated = attach_facet(entry, facet, self.node_id, self.keyring)
        self.registry.put(updated)
        return updated

    def create_add_info(self, service_id: ElementId, schema: SchemaDescriptor, root: XmlElement) -> Facet:
        """Создать дополнительный фасет к сервису из локального реестра"""
        entry = self.registry.find(service_id)
        if not isinstance(entry, ServiceEntry):
            raise UnknownService(f"Сервис {service_id} отсутствует в реестре {self.node_id}")
        if not entry.allow_add_info:
            raise AddInfoForbidden(f"Сервис {service_id} не разрешает дополнительные фасеты")
        facet = Facet.create(self.key, self.ids, FacetKind.ADDITIONAL_INFO, schema, root, service_id)
        self.registry.put(facet)
        return facet

    def _own_service(self, service_id: ElementId) -> ServiceEntry:
        entry = self.registry.find(service_id)
        if not isinstance(entry, ServiceEntry):
            raise UnknownService(f"Сервис {service_id} отсутствует в реестре {self.node_id}")
        if entry.creator != self.node_id:
            raise NotCreator(f"{self.node_id} не является создателем сервиса {service_id}")
        return entry

    def is_local(self, element_id: ElementId) -> bool:
        return element_id in self.registry and element_id not in self._holdings

    # =========================================================================
    # Маркетплейс
    # =========================================================================

    def share_service(self, service_id: ElementId) -> None:
        """
        Опубликовать сервис на маркетплейсе с автоматическим продлением лиза

        Raises:
            UnknownService, NotCreator
        """
        self._own_service(service_id)
        if service_id in self._shares:
            logger.debug(f"t={self.sim.now:.1f} {self.node_id}: {service_id} уже опубликован")
            return
        self._publish_element(service_id)
        self._shares[service_id] = self.sim.every(
            self.config.lease.renew_period, self._publish_element, service_id
        )

    def share_add_info(self, facet_id: ElementId) -> None:
        """
        Опубликовать дополнительный фасет отдельным сообщением под собственным лизом

        Raises:
            UnknownFacet, NotCreator, UnknownService, AddInfoForbidden
        """
        facet = self.registry.find(facet_id)
        if not isinstance(facet, Facet) or facet.kind is not FacetKind.ADDITIONAL_INFO:
            raise UnknownFacet(f"Дополнительный фасет {facet_id} отсутствует в реестре {self.node_id}")
        if facet.author != self.node_id:
            raise NotCreator(f"Фасет {facet_id} создан {facet.author}")
        service = self.registry.find(facet.service_ref)
        if not isinstance(service, ServiceEntry):
            raise UnknownService(f"Сервис {facet.service_ref} отсутствует в реестре {self.node_id}")
        if not service.allow_add_info:
            raise AddInfoForbidden(f"Сервис {facet.service_ref} не разрешает дополнительные фасеты")
        if facet_id in self._shares:
            return
        self._publish_element(facet_id)
        self._shares[facet_id] = self.sim.every(
            self.config.lease.renew_period, self._publish_element, facet_id
        )

    def _element_message(
        self, element_id: ElementId, lease_duration: Optional[float] = None, renew_period: Optional[float] = None
    ) -> ElementMessage:
        element = self.registry.get(element_id)
        if isinstance(element, ServiceEntry):
            return ServiceMessage.from_entry(element, lease_duration, renew_period)
        return AddInfoMessage.from_facet(element, lease_duration, renew_period)

    def _publish_element(self, element_id: ElementId) -> None:
        if element_id not in self.registry:
            self.withdraw(element_id)
            return
        lease = self.config.lease
        msg = self._element_message(element_id, lease.duration, lease.renew_period)
        self.dispatcher.publish(self.node_id, msg, ChannelClass.MARKETPLACE)

    def withdraw(self, element_id: ElementId) -> bool:
        """Прекратить продление опубликованного элемента; получатели удалят его по истечении лиза"""
        timer = self._shares.pop(element_id, None)
        if timer is None:
            return False
        timer.cancel()
        return True

    def withdraw_add_info(self, facet_id: ElementId) -> bool:
        """Прекратить продление дополнительного фасета"""
        facet = self.registry.find(facet_id)
        if not isinstance(facet, Facet) or facet.kind is not FacetKind.ADDITIONAL_INFO:
            raise UnknownFacet(f"Дополнительный фасет {facet_id} отсутствует в реестре {self.node_id}")
        return self.withdraw(facet_id)

    def declare_interest(self, interest: Interest) -> InterestHandle:
        """Установить content-подписку; совпавшие элементы сохраняются в реестре"""
        sub = self.dispatcher.subscribe(self.node_id, ContentFilter(interest))
        handle = InterestHandle(interest, sub)
        self._interests[sub.sub_id] = handle
        return handle

    def revoke_interest(self, handle: InterestHandle) -> None:
        self._interests.pop(handle.subscription.sub_id, None)
        self.dispatcher.unsubscribe(handle.subscription)

    @property
    def interests(self) -> List[InterestHandle]:
        return list(self._interests.values())

    @property
    def shared(self) -> Set[ElementId]:
        return set(self._shares)

    # =========================================================================
    # Приём
    # =========================================================================

    def _on_delivery(self, env: Envelope, subs: Tuple[Subscription, ...]) -> None:
        payload = env.payload
        try:
            if isinstance(payload, (ServiceMessage, AddInfoMessage)):
                self._store(payload, MARKETPLACE)
            elif isinstance(payload, FederationPayload):
                membership = self._memberships.get(payload.fed_id)
                if membership is not None:
                    membership.style.on_payload(env)
        except DireError as e:
            self.errors += 1
            logger.warning(f"t={self.sim.now:.1f} {self.node_id}: ошибка обработки {env.msg_id}: {e}")

    def _reject(self, element_id: ElementId, reason: str) -> None:
        self.rejected_unauthorized += 1
        logger.warning(f"t={self.sim.now:.1f} {self.node_id}: элемент {element_id} отклонён: {reason}")

    def _admit(self, msg: ElementMessage) -> Optional[Union[ServiceEntry, Facet]]:
        """Проверить подписи и права автора; None - элемент отклонён"""
        try:
            if isinstance(msg, ServiceMessage):
                facets = msg.decode_facets(self.catalog)
                for facet in facets:
                    if facet.kind is not FacetKind.SPECIFICATION or facet.service_ref != msg.service_id:
                        self._reject(msg.service_id, f"фасет {facet.id} не относится к спецификации сервиса")
                        return None
                    if facet.author != msg.creator:
                        self._reject(msg.service_id, f"фасет {facet.id} подписан не создателем ({facet.author})")
                        return None
                    if not self.keyring.verify(facet.author, facet.content, facet.signature):
                        self._reject(msg.service_id, f"подпись фасета {facet.id} не прошла проверку")
                        return None
                return msg.to_entry(facets)
            facet = msg.decode_facet(self.catalog)
        except (DireError, ValueError, KeyError) as e:
            self._reject(msg.element_id, f"некорректное сообщение: {e}")
            return None
        if (
            facet.kind is not FacetKind.ADDITIONAL_INFO
            or facet.author != msg.author
            or facet.service_ref != msg.service_ref
            or facet.id != msg.facet_id
        ):
            self._reject(msg.facet_id, "заголовок не совпадает с фасетом")
            return None
        if not self.keyring.verify(facet.author, facet.content, facet.signature):
            self._reject(msg.facet_id, "подпись не прошла проверку")
            return None
        service = self.registry.find(facet.service_ref)
        if isinstance(service, ServiceEntry) and not service.allow_add_info:
            self._reject(msg.facet_id, f"сервис {facet.service_ref} не разрешает дополнительные фасеты")
            return None
        return facet

    def _store(self, msg: ElementMessage, source: str) -> Optional[bool]:
        """
        Сохранить полученный элемент

        Returns:
            True - новый элемент, False - повторное поступление, None - отклонён
        """
        element_id = msg.element_id
        if self.is_local(element_id):
            return False
        element = self._admit(msg)
        if element is None:
            return None
        now = self.sim.now
        lease = LeaseState(now, msg.lease_duration, msg.renew_period) if msg.lease_duration else None
        holding = self._holdings.get(element_id)
        is_new = holding is None
        if is_new:
            kind = "service" if isinstance(element, ServiceEntry) else "add_info"
            holding = Holding(element_id, kind, first_seen=now, last_seen=now)
            self._holdings[element_id] = holding
        holding.sources[source] = lease
        holding.last_seen = now
        self.received += 1
        if self.registry.stores_remote:
            for dropped in self.registry.put(element):
                self._holdings.pop(dropped, None)
        if lease is not None:
            self._schedule_purge(lease.expires_at)
        return is_new

    def holdings(self) -> Dict[ElementId, Holding]:
        return dict(self._holdings)

    # =========================================================================
    # Лизы
    # =========================================================================

    def _schedule_purge(self, expires_at: float) -> None:
        at = expires_at + PURGE_SLACK
        if self._purge_at is not None and self._purge_at <= at:
            return
        if self._purge_timer is not None:
            self._purge_timer.cancel()
        self._purge_at = at
        self._purge_timer = self.sim.schedule_at(max(at, self.sim.now), self._purge_tick)

    def _purge_tick(self) -> None:
        self._purge_timer = None
        self._purge_at = None
        self.purge_expired(self.sim.now)
        upcoming = [
            lease.expires_at
            for holding in self._holdings.values()
            for lease in holding.sources.values()
            if lease is not None
        ]
        if upcoming:
            self._schedule_purge(min(upcoming))

    def purge_expired(self, now: Optional[float] = None) -> List[ElementId]:
        """
        Удалить удалённые элементы с истёкшим лизом

        Локально созданные элементы не удаляются никогда.

        Args:
            now: Момент проверки (по умолчанию текущее время симуляции)

        Returns:
            Id удалённых элементов
        """
        now = self.sim.now if now is None else now
        purged: List[ElementId] = []
        for element_id, holding in list(self._holdings.items()):
            expired = [s for s, lease in holding.sources.items() if lease is not None and lease.expired(now)]
            for source in expired:
                del holding.sources[source]
            if expired and not holding.sources:
                self._release(element_id)
                purged.append(element_id)
        if purged:
            logger.debug(f"t={now:.1f} {self.node_id}: удалено {len(purged)} элементов по истечении лиза")
        return purged

    def _release(self, element_id: ElementId) -> None:
        self._holdings.pop(element_id, None)
        if element_id in self.registry:
            self.registry.delete(element_id)

    def _purge_source(self, source: str) -> List[ElementId]:
        released = []
        for element_id, holding in list(self._holdings.items()):
            if source in holding.sources:
                del holding.sources[source]
                if not holding.sources:
                    self._release(element_id)
                    released.append(element_id)
        return released

    # =========================================================================
    # Федерации: вызовы стилей
    # =========================================================================

    def accept_federation_element(self, fed_id: ElementId, msg: ElementMessage) -> bool:
        """Элемент, доставленный стилем федерации; False - отклонён"""
        if fed_id not in self._memberships:
            return False
        result = self._store(msg, str(fed_id))
        if result is None:
            return False
        self.ledger.record_receipt(fed_id, self.node_id, msg.element_id, self.sim.now)
        return True

    def drop_federation_element(self, fed_id: ElementId, element_id: ElementId) -> None:
        holding = self._holdings.get(element_id)
        if holding is None or str(fed_id) not in holding.sources:
            return
        del holding.sources[str(fed_id)]
        if not holding.sources:
            self._release(element_id)

    def federation_holdings(self, fed_id: ElementId) -> Set[ElementId]:
        source = str(fed_id)
        return {e for e, h in self._holdings.items() if source in h.sources}

    def federation_dismissed(self, fed_id: ElementId) -> None:
        if fed_id in self._memberships:
            logger.info(f"t={self.sim.now:.1f} {self.node_id}: федерация {fed_id} распущена, выход")
            self.leave_federation(fed_id)

    def peer_style(self, node: NodeId, fed_id: ElementId) -> Optional[CooperationStyle]:
        """Стиль федерации на другом узле (для точка-точка каналов gossip)"""
        if self.network.crashed(node):
            return None
        peer = self._peers(node)
        if peer is None:
            return None
        membership = peer._memberships.get(fed_id)
        return membership.style if membership is not None else None

    def membership(self, fed_id: ElementId) -> Optional[Membership]:
        return self._memberships.get(fed_id)

    @property
    def joined(self) -> List[ElementId]:
        return list(self._memberships)

    @property
    def managed(self) -> List[ElementId]:
        return list(self._managed)

    # =========================================================================
    # Федерации: управление
    # =========================================================================

    def create_federation(
        self, name: str, style: Union[FederationStyle, str], join_params: Optional[Dict[str, Any]] = None
    ) -> FederationInfo:
        """
        Создать федерацию, зарегистрировать её в каталоге и вступить в неё

        Args:
            name: Имя (для PS/PSR по умолчанию совпадает с топиком)
            style: Стиль кооперации
            join_params: Параметры подключения

        Returns:
            FederationInfo
        """
        style = FederationStyle.parse(style)
        params = dict(join_params or {})
        if style is FederationStyle.GOSSIP:
            params.setdefault("contact", self.node_id)
        else:
            params.setdefault("topic", name)
        dcfg = self.config.directory
        info = FederationInfo(
            fed_id=self.ids.next_id(),
            name=name,
            style=style,
            join_params=params,
            manager=self.node_id,
            lease=LeaseState(self.sim.now, dcfg.lease_duration, dcfg.renew_period),
        )
        self.directory.register(info)
        timer = self.sim.every(dcfg.renew_period, self._renew_federation, info.fed_id)
        self._managed[info.fed_id] = (info, timer)
        membership = self._join(info)
        membership.style.create()
        logger.info(f"t={self.sim.now:.1f} {self.node_id}: создана федерация {name} ({style.value})")
        return info

    def _renew_federation(self, fed_id: ElementId) -> None:
        managed = self._managed.get(fed_id)
        if managed is not None:
            self.directory.renew(managed[0])

    def join_federation(
        self,
        info: Optional[FederationInfo] = None,
        fed_id: Optional[ElementId] = None,
        on_joined: Optional[Callable[[Optional[FederationInfo]], None]] = None,
        contact: Optional[NodeId] = None,
    ) -> Optional[Membership]:
        """
        Вступить в федерацию

        С известным FederationInfo вступление немедленное; по fed_id
        описание сначала запрашивается у каталога.

        Raises:
            AlreadyJoined
        """
        target = info.fed_id if info is not None else fed_id
        if target in self._memberships:
            raise AlreadyJoined(f"{self.node_id} уже состоит в федерации {target}")
        if info is not None:
            membership = self._join(info, contact)
            if on_joined is not None:
                on_joined(info)
            return membership
        if fed_id is None:
            raise UnknownFederation("Не указана федерация для вступления")
        self.directory.lookup(fed_id, partial(self._join_looked_up, fed_id, on_joined))
        return None

    def _join_looked_up(
        self, fed_id: ElementId, on_joined, status: Liveness, info: Optional[FederationInfo]
    ) -> None:
        if status is Liveness.ACTIVE and info is not None and fed_id not in self._memberships:
            self._join(info)
        elif status is not Liveness.ACTIVE:
            logger.warning(f"t={self.sim.now:.1f} {self.node_id}: федерация {fed_id} недоступна ({status.value})")
            info = None
        if on_joined is not None:
            on_joined(info)

    def _join(self, info: FederationInfo, contact: Optional[NodeId] = None) -> Membership:
        if info.fed_id in self._memberships:
            raise AlreadyJoined(f"{self.node_id} уже состоит в федерации {info.fed_id}")
        style = create_style(self, info)
        style.preferred_contact = contact
        membership = Membership(info, style, joined_at=self.sim.now)
        self._memberships[info.fed_id] = membership
        self.ledger.record_join(info.fed_id, self.node_id, self.sim.now)
        style.join()
        membership.check_timer = self.sim.every(
            self.config.directory.check_period, self.check_federation, info.fed_id
        )
        return membership

    def leave_federation(self, fed_id: ElementId) -> List[ElementId]:
        """
        Выйти из федерации; элементы, полученные только через неё, удаляются

        Returns:
            Id удалённых элементов

        Raises:
            NotAMember
        """
        membership = self._memberships.pop(fed_id, None)
        if membership is None:
            raise NotAMember(f"{self.node_id} не состоит в федерации {fed_id}")
        if membership.check_timer is not None:
            membership.check_timer.cancel()
        membership.style.leave()
        self.ledger.record_leave(fed_id, self.node_id, self.sim.now)
        return self._purge_source(str(fed_id))

    def _require_member(self, fed_id: ElementId) -> Membership:
        membership = self._memberships.get(fed_id)
        if membership is None:
            raise NotAMember(f"{self.node_id} не состоит в федерации {fed_id}")
        return membership

    def promote(self, fed_id: ElementId, element_id: ElementId) -> None:
        """
        Продвинуть элемент локального реестра в федерацию

        Raises:
            NotAMember, UnknownElement
        """
        membership = self._require_member(fed_id)
        if element_id not in self.registry:
            raise UnknownElement(f"Элемент {element_id} отсутствует в реестре {self.node_id}")
        msg = self._element_message(element_id)
        membership.style.counters.events += 1
        self.ledger.record_promotion(fed_id, element_id, self.node_id, self.sim.now)
        membership.style.promote(msg)

    def retract(self, fed_id: ElementId, element_id: ElementId) -> None:
        membership = self._require_member(fed_id)
        if element_id not in membership.style.own:
            raise UnknownElement(f"Элемент {element_id} не продвигался {self.node_id} в {fed_id}")
        membership.style.counters.retractions += 1
        self.ledger.record_retraction(fed_id, element_id, self.sim.now)
        membership.style.retract(element_id)

    def dismiss_federation(self, fed_id: ElementId) -> None:
        """
        Распустить федерацию: удалить запись каталога и разослать роспуск
        средствами стиля

        Raises:
            NotManager, UnknownFederation
        """
        managed = self._managed.pop(fed_id, None)
        if managed is None:
            membership = self._memberships.get(fed_id)
            if membership is not None:
                raise NotManager(f"{self.node_id} не является менеджером федерации {fed_id}")
            raise UnknownFederation(f"Федерация {fed_id} неизвестна {self.node_id}")
        info, timer = managed
        timer.cancel()
        self.directory.dismiss(fed_id)
        membership = self._memberships.get(fed_id)
        if membership is not None:
            membership.style.dismiss()
        logger.info(f"t={self.sim.now:.1f} {self.node_id}: федерация {info.name} распущена")

    def check_federation(self, fed_id: ElementId) -> None:
        """Периодическая проверка: федерация всё ещё есть в каталоге"""
        if fed_id not in self._memberships:
            return
        if fed_id in self._managed:
            self.liveness_log.append((self.sim.now, fed_id, Liveness.ACTIVE))
            return
        self.directory.lookup(fed_id, partial(self._on_liveness, fed_id))

    def _on_liveness(self, fed_id: ElementId, status: Liveness, info: Optional[FederationInfo]) -> None:
        self.liveness_log.append((self.sim.now, fed_id, status))
        if status is Liveness.DISMISSED and fed_id in self._memberships:
            logger.info(f"t={self.sim.now:.1f} {self.node_id}: федерация {fed_id} отсутствует в каталоге, выход")
            self.leave_federation(fed_id)

    # =========================================================================
    # Команды
    # =========================================================================

    def execute(self, cmd: ManagementCommand) -> Any:
        """
        Выполнить команду управления

        Returns:
            Результат операции (InterestHandle, FederationInfo и т.п.)
        """
        if isinstance(cmd, Share):
            service_id = cmd.service_id
            if cmd.draft is not None:
                draft = cmd.draft
                service_id = self.create_service(draft.name, draft.documents, draft.allow_add_info).id
            self.share_service(service_id)
            return service_id
        if isinstance(cmd, ShareAddInfo):
            facet_id = cmd.facet_id
            if cmd.draft is not None:
                draft = cmd.draft
                facet_id = self.create_add_info(draft.service_ref, draft.schema, draft.root).id
            self.share_add_info(facet_id)
            return facet_id
        if isinstance(cmd, DeclareInterest):
            return self.declare_interest(cmd.interest)
        if isinstance(cmd, RevokeInterest):
            return self.revoke_interest(cmd.handle)
        if isinstance(cmd, CreateFederation):
            return self.create_federation(cmd.name, cmd.style, cmd.join_params)
        if isinstance(cmd, JoinFederation):
            return self.join_federation(info=cmd.info, fed_id=cmd.fed_id, contact=cmd.contact)
        if isinstance(cmd, LeaveFederation):
            return self.leave_federation(cmd.fed_id)
        if isinstance(cmd, Promote):
            return self.promote(cmd.fed_id, cmd.element_id)
        if isinstance(cmd, Retract):
            return self.retract(cmd.fed_id, cmd.element_id)
        if isinstance(cmd, DismissFederation):
            return self.dismiss_federation(cmd.fed_id)
        if isinstance(cmd, Withdraw):
            return self.withdraw(cmd.element_id)
        raise TypeError(f"Неизвестная команда: {cmd!r}")

    # =========================================================================
    # Состояние
    # =========================================================================

    def snapshot(self) -> NodeState:
        own_services: List[ElementId] = []
        own_add_info: List[ElementId] = []
        held_services: List[ElementId] = []
        targets: List[ElementId] = []
        for element in self.registry.store.values():
            local = element.id not in self._holdings
            if isinstance(element, ServiceEntry):
                if local:
                    own_services.append(element.id)
                else:
                    held_services.append(element.id)
                    if element.allow_add_info:
                        targets.append(element.id)
            elif local and element.kind is FacetKind.ADDITIONAL_INFO:
                own_add_info.append(element.id)
        return NodeState(
            node_id=self.node_id,
            role=self.role,
            own_services=own_services,
            own_add_info=own_add_info,
            held_services=held_services,
            add_info_targets=targets,
            shared=set(self._shares),
            joined=list(self._memberships),
            interests=len(self._interests),
        )

    def get_stats(self) -> Dict[str, Any]:
        """Статистика узла"""
        stats: Dict[str, Any] = {
            "node_id": self.node_id,
            "role": self.role,
            "received": self.received,
            "rejected_unauthorized": self.rejected_unauthorized,
            "errors": self.errors,
            "shared": len(self._shares),
            "interests": len(self._interests),
            "federations": len(self._memberships),
            "holdings": len(self._holdings),
        }
        stats.update(self.registry.get_stats())
        return stats
