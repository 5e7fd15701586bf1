"""
Общий контракт стилей кооперации и учёт трафика федераций
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Set, Tuple

from core.federation_info import FederationInfo, FederationStyle
from core.messages import ElementMessage
from core.service_model import ElementId, NodeId

if TYPE_CHECKING:
    from components.delivery_manager import DeliveryManager
    from network.dispatcher import Envelope

logger = logging.getLogger(__name__)

MAINTENANCE_KINDS = ("join", "catchup", "heartbeat", "resubscription", "leave")


@dataclass
class FederationCounters:
    """Трафик одной федерации"""
    fed_id: ElementId
    name: str
    style: str
    events: int = 0
    payload_messages: int = 0
    control_messages: int = 0
    retractions: int = 0
    duplicates: int = 0
    maintenance: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in MAINTENANCE_KINDS})

    @property
    def msg_per_event(self) -> float:
        if self.events == 0:
            return 0.0
        return self.payload_messages / self.events

    @property
    def maintenance_messages(self) -> int:
        return sum(self.maintenance.values())

    def to_dict(self) -> Dict[str, Any]:
        row = {
            "fed_id": str(self.fed_id),
            "name": self.name,
            "style": self.style,
            "events": self.events,
            "messages": self.payload_messages,
            "msg_per_event": round(self.msg_per_event, 6),
            "control_messages": self.control_messages,
            "retractions": self.retractions,
            "duplicates": self.duplicates,
        }
        for kind in MAINTENANCE_KINDS:
            row[f"{kind}_messages"] = self.maintenance[kind]
        return row


class FederationLedger:
    """
    Журнал федераций прогона: счётчики трафика, моменты продвижения,
    вступления и первого получения элемента каждым членом
    """

    def __init__(self):
        self._counters: Dict[ElementId, FederationCounters] = {}
        self.promotions: Dict[Tuple[ElementId, ElementId], Tuple[NodeId, float]] = {}
        self.retracted: Dict[Tuple[ElementId, ElementId], float] = {}
        self.joins: Dict[ElementId, Dict[NodeId, float]] = {}
        self.leaves: Dict[ElementId, Dict[NodeId, float]] = {}
        self.receipts: Dict[Tuple[ElementId, NodeId, ElementId], float] = {}

    def counters(self, info: FederationInfo) -> FederationCounters:
        counters = self._counters.get(info.fed_id)
        if counters is None:
            counters = FederationCounters(info.fed_id, info.name, info.style.value)
            self._counters[info.fed_id] = counters
        return counters

    def get(self, fed_id: ElementId) -> Optional[FederationCounters]:
        return self._counters.get(fed_id)

    def values(self) -> List[FederationCounters]:
        return list(self._counters.values())

    def record_promotion(self, fed_id: ElementId, element_id: ElementId, node: NodeId, now: float) -> None:
        self.promotions.setdefault((fed_id, element_id), (node, now))

    def record_retraction(self, fed_id: ElementId, element_id: ElementId, now: float) -> None:
        self.retracted.setdefault((fed_id, element_id), now)

    def record_join(self, fed_id: ElementId, node: NodeId, now: float) -> None:
        self.joins.setdefault(fed_id, {})[node] = now
        self.leaves.get(fed_id, {}).pop(node, None)

    def record_leave(self, fed_id: ElementId, node: NodeId, now: float) -> None:
        self.leaves.setdefault(fed_id, {})[node] = now

    def record_receipt(self, fed_id: ElementId, node: NodeId, element_id: ElementId, now: float) -> None:
        self.receipts.setdefault((fed_id, node, element_id), now)

    def members(self, fed_id: ElementId) -> List[NodeId]:
        """Члены, вступившие и не покинувшие федерацию"""
        left = self.leaves.get(fed_id, {})
        return [n for n in self.joins.get(fed_id, {}) if n not in left]


class CooperationStyle(ABC):
    """
    Стиль кооперации федерации на одном узле.

    Стиль получает хост (delivery manager) и описание федерации; принятые
    элементы передаются хосту через accept_element / drop_element.
    """

    style: FederationStyle

    def __init__(self, host: "DeliveryManager", info: FederationInfo):
        self.host = host
        self.info = info
        self.node_id: NodeId = host.node_id
        self.sim = host.sim
        self.counters = host.ledger.counters(info)
        self.own: Dict[ElementId, ElementMessage] = {}
        self.active = False
        # контакт для вступления, выбранный хостом (gossip)
        self.preferred_contact: Optional[NodeId] = None

    @property
    def fed_id(self) -> ElementId:
        return self.info.fed_id

    def create(self) -> None:
        """Действия менеджера при создании федерации"""

    @abstractmethod
    def join(self) -> None:
        pass

    @abstractmethod
    def leave(self) -> None:
        pass

    @abstractmethod
    def promote(self, element: ElementMessage) -> None:
        pass

    @abstractmethod
    def retract(self, element_id: ElementId) -> None:
        pass

    @abstractmethod
    def dismiss(self) -> None:
        pass

    def on_payload(self, env: "Envelope") -> None:
        """Сообщение федерации, доставленное диспетчером"""

    def live_elements(self) -> Set[ElementId]:
        """Элементы федерации, присутствующие на узле"""
        return set(self.own) | self.host.federation_holdings(self.fed_id)

    def _accept(self, element: ElementMessage) -> bool:
        if element.element_id in self.own:
            return False
        return self.host.accept_federation_element(self.fed_id, element)

    def _drop(self, element_id: ElementId) -> None:
        self.host.drop_federation_element(self.fed_id, element_id)
