"""
Локальный реестр организации

LocalRegistry - точка расширения для адаптеров к реальным реестрам;
в симуляторе используется реализация в памяти.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import replace
from typing import Dict, List, Optional

from core.errors import UnknownElement
from core.facet_query import Interest, match_entry
from core.service_model import Element, ElementId, ElementStore, Facet, FacetKind, ServiceEntry

logger = logging.getLogger(__name__)


class LocalRegistry(ABC):
    """Контракт локального реестра: put/get/delete/query"""

    # False - реестр хранит только локально созданные элементы
    stores_remote: bool = True

    @abstractmethod
    def put(self, element: Element) -> None:
        pass

    @abstractmethod
    def get(self, element_id: ElementId) -> Element:
        pass

    @abstractmethod
    def delete(self, element_id: ElementId) -> Element:
        pass

    @abstractmethod
    def query(self, interest: Interest) -> List[ServiceEntry]:
        pass

    @abstractmethod
    def __contains__(self, element_id: ElementId) -> bool:
        pass


class InMemoryRegistry(LocalRegistry):
    """
    Реестр поверх ElementStore.

    Дополнительные фасеты хранятся отдельными элементами и связываются
    с сервисом по service_ref при чтении; фасет может прийти раньше
    сервиса.
    """

    def __init__(self):
        self.store = ElementStore()
        self._by_service: Dict[ElementId, Dict[ElementId, None]] = {}

    def __contains__(self, element_id: ElementId) -> bool:
        return element_id in self.store

    def __len__(self) -> int:
        return len(self.store)

    def put(self, element: Element) -> List[ElementId]:
        """
        Сохранить элемент (повторное поступление заменяет прежнюю версию)

        Returns:
            Id дополнительных фасетов, отброшенных из-за allow_add_info=false
        """
        dropped: List[ElementId] = []
        if isinstance(element, ServiceEntry):
            base = replace(element, add_info_facets=())
            self.store.upsert(base)
            for facet in element.add_info_facets:
                self._put_facet(facet)
            if not element.allow_add_info:
                for facet_id in list(self._by_service.get(element.id, {})):
                    self.delete(facet_id)
                    dropped.append(facet_id)
                if dropped:
                    logger.debug(f"Сервис {element.id} запрещает доп. фасеты, отброшено {len(dropped)}")
        else:
            self._put_facet(element)
        return dropped

    def _put_facet(self, facet: Facet) -> None:
        self.store.upsert(facet)
        if facet.kind is FacetKind.ADDITIONAL_INFO:
            self._by_service.setdefault(facet.service_ref, {})[facet.id] = None

    def get(self, element_id: ElementId) -> Element:
        element = self.store.get(element_id)
        if isinstance(element, ServiceEntry) and element.allow_add_info:
            linked = tuple(self.store.get(f) for f in self._by_service.get(element_id, {}))
            if linked:
                element = replace(element, add_info_facets=linked)
        return element

    def find(self, element_id: ElementId) -> Optional[Element]:
        try:
            return self.get(element_id)
        except UnknownElement:
            return None

    def delete(self, element_id: ElementId) -> Element:
        element = self.store.remove(element_id)
        if isinstance(element, Facet) and element.kind is FacetKind.ADDITIONAL_INFO:
            linked = self._by_service.get(element.service_ref)
            if linked is not None:
                linked.pop(element_id, None)
                if not linked:
                    del self._by_service[element.service_ref]
        return element

    def services(self) -> List[ServiceEntry]:
        return [self.get(e.id) for e in self.store.values() if isinstance(e, ServiceEntry)]

    def add_info_facets(self) -> List[Facet]:
        return [
            e for e in self.store.values()
            if isinstance(e, Facet) and e.kind is FacetKind.ADDITIONAL_INFO
        ]

    def add_info_for(self, service_id: ElementId) -> List[Facet]:
        return [self.store.get(f) for f in self._by_service.get(service_id, {})]

    def query(self, interest: Interest) -> List[ServiceEntry]:
        return [entry for entry in self.services() if match_entry(interest, entry)]

    def ids(self) -> List[ElementId]:
        return self.store.ids()

    def get_stats(self) -> Dict[str, int]:
        """Статистика реестра"""
        services = self.services()
        orphans = sum(
            len(facets) for service_id, facets in self._by_service.items()
            if service_id not in self.store
        )
        return {
            "services": len(services),
            "add_info_facets": len(self.add_info_facets()),
            "orphan_add_info": orphans,
            "tombstones": len(self.store.tombstones),
        }


class NullRegistry(InMemoryRegistry):
    """Реестр tiny-узла: удалённые элементы не сохраняются"""

    stores_remote = False
