"""
Конфигурация pytest для тестов симулятора DIRE
"""
import sys
import os

import pytest

# Добавляем путь к родительской директории для импортов
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import SimConfig
from core.schemas import QOS, WSDL, build_qos, build_wsdl
from core.service_model import FacetKind, Facet, IdGenerator, KeyRing, ServiceEntry


@pytest.fixture
def keyring():
    """Реестр ключей с узлами a, b, m"""
    ring = KeyRing(seed=42)
    for node in ("a", "b", "m"):
        ring.register(node)
    return ring


@pytest.fixture
def make_service(keyring):
    """
    Фабрика сервисов: WSDL с операциями и, при qos_ms, QoS-фасет.

    Идентификаторы выдаются генератором узла-создателя.
    """
    generators = {}

    def factory(creator="a", name="quotes", operations=("getLastTrade",), qos_ms=80, allow_add_info=True):
        ids = generators.setdefault(creator, IdGenerator(creator))
        key = keyring.register(creator)
        service_id = ids.next_id()
        facets = [Facet.create(key, ids, FacetKind.SPECIFICATION, WSDL, build_wsdl(name, list(operations)), service_id)]
        if qos_ms is not None:
            facets.append(Facet.create(key, ids, FacetKind.SPECIFICATION, QOS, build_qos(qos_ms), service_id))
        return ServiceEntry(
            id=service_id, name=name, creator=creator, allow_add_info=allow_add_info, spec_facets=tuple(facets)
        )

    factory.ids = generators
    return factory


@pytest.fixture
def make_config():
    """Фабрика SimConfig из словаря (как из JSON-сценария)"""

    def factory(**data):
        return SimConfig.from_dict(data)

    return factory
