"""
Полезные нагрузки сообщений диспетчера

ServiceMessage / AddInfoMessage переносят фасеты в проводном формате
(core.wire), поэтому документ разбирается только при сопоставлении.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Tuple, Union

from core.federation_info import FederationInfo
from core.schemas import DEFAULT_CATALOG, SchemaCatalog
from core.service_model import ElementId, Facet, NodeId, ServiceEntry
from core.wire import decode_facet, encode_facet

# Оценка служебной части сообщения в байтах (ids, флаги, лиз)
HEADER_SIZE = 48


@dataclass(frozen=True)
class ServiceMessage:
    """Сервис со всеми фасетами спецификации"""
    service_id: ElementId
    name: str
    creator: NodeId
    allow_add_info: bool
    facets: Tuple[bytes, ...]
    lease_duration: Optional[float] = None
    renew_period: Optional[float] = None

    @classmethod
    def from_entry(
        cls,
        entry: ServiceEntry,
        lease_duration: Optional[float] = None,
        renew_period: Optional[float] = None,
    ) -> "ServiceMessage":
        return cls(
            service_id=entry.id,
            name=entry.name,
            creator=entry.creator,
            allow_add_info=entry.allow_add_info,
            facets=tuple(encode_facet(f) for f in entry.spec_facets),
            lease_duration=lease_duration,
            renew_period=renew_period,
        )

    @property
    def element_id(self) -> ElementId:
        return self.service_id

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.name.encode("utf-8")) + sum(len(f) for f in self.facets)

    def decode_facets(self, catalog: SchemaCatalog = DEFAULT_CATALOG) -> Tuple[Facet, ...]:
        return tuple(decode_facet(f, catalog) for f in self.facets)

    def to_entry(self, facets: Tuple[Facet, ...]) -> ServiceEntry:
        """ServiceEntry из разобранных фасетов (инварианты сервиса проверяются)"""
        return ServiceEntry(
            id=self.service_id,
            name=self.name,
            creator=self.creator,
            allow_add_info=self.allow_add_info,
            spec_facets=facets,
        )

    def with_lease(self, duration: Optional[float], renew_period: Optional[float]) -> "ServiceMessage":
        return ServiceMessage(
            self.service_id, self.name, self.creator, self.allow_add_info,
            self.facets, duration, renew_period,
        )


@dataclass(frozen=True)
class AddInfoMessage:
    """Один дополнительный фасет, публикуемый отдельно от сервиса"""
    facet_id: ElementId
    service_ref: ElementId
    schema_id: str
    author: NodeId
    facet: bytes
    lease_duration: Optional[float] = None
    renew_period: Optional[float] = None

    @classmethod
    def from_facet(
        cls,
        facet: Facet,
        lease_duration: Optional[float] = None,
        renew_period: Optional[float] = None,
    ) -> "AddInfoMessage":
        return cls(
            facet_id=facet.id,
            service_ref=facet.service_ref,
            schema_id=facet.schema_id,
            author=facet.author,
            facet=encode_facet(facet),
            lease_duration=lease_duration,
            renew_period=renew_period,
        )

    @property
    def element_id(self) -> ElementId:
        return self.facet_id

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.facet)

    def decode_facet(self, catalog: SchemaCatalog = DEFAULT_CATALOG) -> Facet:
        return decode_facet(self.facet, catalog)

    def with_lease(self, duration: Optional[float], renew_period: Optional[float]) -> "AddInfoMessage":
        return AddInfoMessage(
            self.facet_id, self.service_ref, self.schema_id, self.author,
            self.facet, duration, renew_period,
        )


ElementMessage = Union[ServiceMessage, AddInfoMessage]


class FederationAction(Enum):
    PROMOTE = "promote"
    RETRACT = "retract"
    DISMISS = "dismiss"
    JOIN_REQUEST = "join_request"


@dataclass(frozen=True)
class FederationPayload:
    """Сообщение федерации PS/PSR (маршрутизируется по топику федерации)"""
    fed_id: ElementId
    topic: str
    action: FederationAction
    sender: NodeId
    element: Optional[ElementMessage] = None
    element_id: Optional[ElementId] = None

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.topic) + (self.element.size if self.element else 0)


class DirectoryAction(Enum):
    REGISTER = "register"
    RENEW = "renew"
    DISMISS = "dismiss"
    DISCOVER = "discover"
    LOOKUP = "lookup"
    LIST = "list"


DIRECTORY_TOPIC = "FederationDirectory"


def directory_endpoint_topic(node_id: NodeId) -> str:
    """Топик конкретного экземпляра каталога (его endpoint)"""
    return f"{DIRECTORY_TOPIC}/{node_id}"


@dataclass(frozen=True)
class DirectoryPayload:
    """Запрос или широковещательное сообщение каталога федераций"""
    action: DirectoryAction
    sender: NodeId
    topic: str = DIRECTORY_TOPIC
    info: Optional[FederationInfo] = None
    fed_id: Optional[ElementId] = None

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.topic) + (64 if self.info else 0)


@dataclass(frozen=True)
class ReplyPayload:
    """Ответ на repliable-сообщение"""
    reply_to: ElementId
    responder: NodeId
    body: Any = None

    @property
    def size(self) -> int:
        body = self.body
        if isinstance(body, (tuple, list)):
            return HEADER_SIZE + sum(getattr(b, "size", 16) for b in body)
        return HEADER_SIZE + getattr(body, "size", 16)


Payload = Union[ServiceMessage, AddInfoMessage, FederationPayload, DirectoryPayload, ReplyPayload]


def payload_size(payload: Any) -> int:
    """Размер полезной нагрузки в байтах для учёта трафика"""
    return int(getattr(payload, "size", HEADER_SIZE))
