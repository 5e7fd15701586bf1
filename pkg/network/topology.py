"""
Оверлей брокеров: построение и проверка ацикличности/связности
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from config import TopologyConfig
from core.errors import CycleDetected, DetachedClient, DisconnectedTopology

logger = logging.getLogger(__name__)

BrokerId = str


@dataclass
class OverlayTopology:
    """Брокеры, неориентированные связи между ними и подключения клиентов"""
    brokers: Tuple[BrokerId, ...]
    links: Tuple[Tuple[BrokerId, BrokerId], ...]
    attachments: Dict[str, BrokerId] = field(default_factory=dict)

    def __post_init__(self):
        self.brokers = tuple(self.brokers)
        self.links = tuple(tuple(link) for link in self.links)
        self._graph: Optional[nx.Graph] = None
        self._neighbors: Optional[Dict[BrokerId, Tuple[BrokerId, ...]]] = None

    def graph(self) -> nx.Graph:
        if self._graph is None:
            g = nx.Graph()
            g.add_nodes_from(self.brokers)
            g.add_edges_from(self.links)
            self._graph = g
        return self._graph

    def neighbors(self, broker: BrokerId) -> Tuple[BrokerId, ...]:
        if self._neighbors is None:
            g = self.graph()
            self._neighbors = {b: tuple(sorted(g.neighbors(b))) for b in self.brokers}
        return self._neighbors[broker]

    def broker_of(self, client: str) -> BrokerId:
        try:
            return self.attachments[client]
        except KeyError:
            raise DetachedClient(f"Клиент {client} не подключён к брокеру") from None

    def attach(self, client: str, broker: BrokerId) -> None:
        if broker not in self.brokers:
            raise ValueError(f"Неизвестный брокер {broker}")
        self.attachments[client] = broker

    def path(self, a: BrokerId, b: BrokerId) -> List[BrokerId]:
        """Единственный путь по дереву"""
        return nx.shortest_path(self.graph(), a, b)

    def diameter(self) -> int:
        if len(self.brokers) <= 1:
            return 0
        return nx.diameter(self.graph())

    def add_link(self, a: BrokerId, b: BrokerId) -> "OverlayTopology":
        return OverlayTopology(self.brokers, self.links + ((a, b),), dict(self.attachments))

    def remove_link(self, a: BrokerId, b: BrokerId) -> "OverlayTopology":
        links = tuple(l for l in self.links if set(l) != {a, b})
        return OverlayTopology(self.brokers, links, dict(self.attachments))

    def to_dict(self) -> Dict:
        return {
            "brokers": list(self.brokers),
            "links": [list(l) for l in self.links],
            "attachments": dict(self.attachments),
        }


@dataclass
class TopologyDiagnostics:
    """Результат проверки оверлея"""
    brokers: int
    links: int
    diameter: int
    clients_per_broker: Dict[BrokerId, int]
    subscriptions_per_broker: Dict[BrokerId, int]


def route_table_check(topology: OverlayTopology, subscription_counts: Optional[Dict[BrokerId, int]] = None) -> TopologyDiagnostics:
    """
    Проверить, что оверлей является деревом

    Args:
        topology: Оверлей
        subscription_counts: Размеры таблиц подписок по брокерам (если известны)

    Returns:
        TopologyDiagnostics

    Raises:
        CycleDetected, DisconnectedTopology
    """
    g = topology.graph()
    if g.number_of_nodes() == 0:
        raise DisconnectedTopology("Оверлей не содержит брокеров")
    try:
        cycle = nx.find_cycle(g)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        path = " - ".join(str(u) for u, _ in cycle)
        raise CycleDetected(f"Оверлей содержит цикл: {path}")
    if not nx.is_connected(g):
        parts = nx.number_connected_components(g)
        raise DisconnectedTopology(f"Оверлей несвязен: {parts} компонент")
    for client, broker in topology.attachments.items():
        if broker not in g:
            raise DisconnectedTopology(f"Клиент {client} подключён к неизвестному брокеру {broker}")

    clients: Dict[BrokerId, int] = {b: 0 for b in topology.brokers}
    for broker in topology.attachments.values():
        clients[broker] += 1
    counts = {b: (subscription_counts or {}).get(b, 0) for b in topology.brokers}
    return TopologyDiagnostics(
        brokers=len(topology.brokers),
        links=len(topology.links),
        diameter=topology.diameter(),
        clients_per_broker=clients,
        subscriptions_per_broker=counts,
    )


def star(clients: Sequence[str], center: BrokerId = "hub") -> OverlayTopology:
    """Центральный брокер и отдельный листовой брокер для каждого клиента"""
    brokers = [center] + [f"b-{c}" for c in clients]
    links = [(center, f"b-{c}") for c in clients]
    attachments = {c: f"b-{c}" for c in clients}
    return OverlayTopology(tuple(brokers), tuple(links), attachments)


def tree(clients: Sequence[str], n_brokers: int, branching: int = 2) -> OverlayTopology:
    """Полное branching-арное дерево из n_brokers; клиенты распределяются по кругу"""
    g = nx.full_rary_tree(branching, n_brokers)
    names = {i: f"b{i}" for i in g.nodes}
    brokers = tuple(names[i] for i in sorted(g.nodes))
    links = tuple(sorted((names[u], names[v]) for u, v in g.edges))
    attachments = {c: brokers[i % len(brokers)] for i, c in enumerate(clients)}
    return OverlayTopology(brokers, links, attachments)


def build_topology(config: TopologyConfig, clients: Sequence[str], explicit: Optional[Dict[str, str]] = None) -> OverlayTopology:
    """
    Оверлей по конфигурации сценария

    Args:
        config: Секция topology
        clients: Узлы сценария в порядке объявления
        explicit: Явно заданные брокеры узлов (NodeSpec.broker)
    """
    explicit = {k: v for k, v in (explicit or {}).items() if v}
    if config.kind == "star":
        topo = star(clients, config.center)
    elif config.kind == "tree":
        topo = tree(clients, config.brokers, config.branching)
    else:
        brokers: List[BrokerId] = []
        for a, b in config.links:
            for x in (a, b):
                if x not in brokers:
                    brokers.append(x)
        for broker in list(config.attachments.values()) + list(explicit.values()):
            if broker not in brokers:
                brokers.append(broker)
        if not brokers:
            brokers.append(config.center)
        attachments = dict(config.attachments)
        for client in clients:
            attachments.setdefault(client, brokers[0])
        topo = OverlayTopology(tuple(brokers), tuple(tuple(l) for l in config.links), attachments)
    for client, broker in explicit.items():
        topo.attach(client, broker)
    return topo
