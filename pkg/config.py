"""
Конфигурация симулятора DIRE
"""
import fnmatch
import json
import os
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from core.errors import ConfigInvalid, IoFailure

# Единицы виртуального времени (секунды)
MINUTE = 60.0
HOUR = 60 * MINUTE
DAY = 24 * HOUR
WEEK = 7 * DAY

STYLES = ("ps", "psr", "gossip")
ROLES = ("full", "tiny", "directory")
ACTION_KINDS = (
    "share",
    "subscribe",
    "share_add_info",
    "subscribe_add_info",
    "join",
    "leave",
    "promote",
    "promote_add_info",
)


def parse_duration(value: Any) -> float:
    """
    Длительность в секундах

    Args:
        value: Число секунд или строка pandas ("5min", "1D", "20h")

    Returns:
        Секунды (float)
    """
    if isinstance(value, bool):
        raise ValueError(f"Некорректная длительность: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return pd.Timedelta(value).total_seconds()
        except (ValueError, TypeError):
            raise ValueError(f"Некорректная длительность: {value!r}") from None
    raise ValueError(f"Некорректная длительность: {value!r}")


@dataclass
class LeaseConfig:
    """Лиз маркетплейса и PS-федераций"""
    duration: float = WEEK
    renew_period: float = DAY


@dataclass
class DispatcherConfig:
    """Параметры диспетчера"""
    reply_timeout: float = 10.0


@dataclass
class DirectoryConfig:
    """Каталог федераций"""
    lease_duration: float = WEEK
    renew_period: float = DAY
    check_period: float = DAY
    discovery_timeout: float = 10.0


@dataclass
class GossipConfig:
    """Параметры SCAMP"""
    c: int = 2
    exchange_period: float = MINUTE
    heartbeat_period: float = DAY
    resubscription_period: float = WEEK
    missed_heartbeats: int = 3
    isolation_heartbeats: int = 3
    max_forward_hops: int = 200
    join_timeout: float = 30.0


@dataclass
class OutageSpec:
    """Интервал недоступности связи a <-> b"""
    a: str = ""
    b: str = ""
    start: float = 0.0
    end: float = 0.0


@dataclass
class CrashSpec:
    """Остановка узла в момент at (и восстановление в recover)"""
    node: str = ""
    at: float = 0.0
    recover: Optional[float] = None


@dataclass
class NetworkConfig:
    """Модель сети: задержка, потери, аварии"""
    latency_min: float = 0.01
    latency_max: float = 0.1
    loss_rate: float = 0.0
    outages: List[OutageSpec] = field(default_factory=list)
    crashes: List[CrashSpec] = field(default_factory=list)


@dataclass
class TopologyConfig:
    """
    Оверлей брокеров.

    kind: "star" (центр + брокер на каждый узел), "tree" (brokers брокеров,
    ветвление branching) или "explicit" (links/attachments заданы явно).
    """
    kind: str = "star"
    center: str = "hub"
    brokers: int = 1
    branching: int = 2
    links: List[List[str]] = field(default_factory=list)
    attachments: Dict[str, str] = field(default_factory=dict)
    file: Optional[str] = None


@dataclass
class ServiceSpec:
    """Сервис, созданный узлом при старте"""
    name: str = ""
    operations: List[str] = field(default_factory=list)
    qos_worst_ms: Optional[int] = None
    qos_best_ms: Optional[int] = None
    allow_add_info: bool = False


@dataclass
class NodeSpec:
    """Узел сценария"""
    node_id: str = ""
    role: str = "full"
    broker: Optional[str] = None
    services: List[ServiceSpec] = field(default_factory=list)


@dataclass
class NodeGroup:
    """Группа однотипных узлов: prefix1 .. prefixN"""
    prefix: str = "n"
    count: int = 0
    role: str = "full"

    def node_ids(self) -> List[str]:
        width = len(str(self.count))
        return [f"{self.prefix}{i:0{width}d}" for i in range(1, self.count + 1)]


@dataclass
class FederationScenario:
    """
    Федерация, создаваемая при старте.

    promotions элементов продвигаются в окне [promote_start, promote_end)
    членами по кругу; late_members присоединяются в момент late_join_at.
    """
    name: str = ""
    style: str = "ps"
    manager: str = ""
    members: List[str] = field(default_factory=list)
    promotions: int = 0
    promote_start: float = 0.0
    promote_end: float = DAY
    retractions: int = 0
    late_members: List[str] = field(default_factory=list)
    late_join_at: float = 0.0
    dismiss_at: Optional[float] = None
    contact_policy: str = "random"
    oracle: bool = False


@dataclass
class ScriptCommand:
    """Команда управления с меткой времени"""
    at: float = 0.0
    node: str = ""
    command: str = ""
    args: Dict[str, Any] = field(default_factory=dict)


@dataclass
class WorkloadSpec:
    """Случайная нагрузка: узлы выполняют действие каждые action_period"""
    enabled: bool = False
    action_period: float = 5 * MINUTE
    method_pool: int = 100
    max_facets: int = 5
    qos_probability: float = 0.9
    qos_max_tenths: int = 100
    threshold_probability: float = 0.45
    allow_add_info_probability: float = 0.5
    max_testcases: int = 20
    federations: int = 100
    federation_styles: List[str] = field(default_factory=lambda: ["ps", "psr"])
    weights: Dict[str, float] = field(
        default_factory=lambda: {
            "share": 0.25,
            "subscribe": 0.25,
            "share_add_info": 0.10,
            "subscribe_add_info": 0.10,
            "join": 0.10,
            "leave": 0.05,
            "promote": 0.10,
            "promote_add_info": 0.05,
        }
    )


@dataclass
class SimConfig:
    """Корневая конфигурация прогона"""
    name: str = "scenario"
    seed: int = 0
    duration: float = DAY
    log_base: str = "e"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    nodes: List[NodeSpec] = field(default_factory=list)
    node_groups: List[NodeGroup] = field(default_factory=list)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    lease: LeaseConfig = field(default_factory=LeaseConfig)
    dispatcher: DispatcherConfig = field(default_factory=DispatcherConfig)
    directory: DirectoryConfig = field(default_factory=DirectoryConfig)
    gossip: GossipConfig = field(default_factory=GossipConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    federations: List[FederationScenario] = field(default_factory=list)
    script: List[ScriptCommand] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Optional[str] = None) -> "SimConfig":
        """
        Построить и проверить конфигурацию

        Raises:
            ConfigInvalid: со списком всех найденных ошибок
        """
        diagnostics: List[Tuple[str, str]] = []
        config = _build(cls, data, "", diagnostics)
        for group in config.node_groups:
            config.nodes.extend(NodeSpec(node_id=n, role=group.role) for n in group.node_ids())
        if config.topology.file:
            _load_topology_file(config, base_dir, diagnostics)
        _validate(config, diagnostics)
        if diagnostics:
            raise ConfigInvalid(diagnostics)
        return config

    def node_ids(self) -> List[str]:
        return [n.node_id for n in self.nodes]


# ---------------------------------------------------------------------------
# Построение из словаря
# ---------------------------------------------------------------------------

# Поля-длительности по классам
_DURATIONS = {
    "SimConfig": ("duration",),
    "LeaseConfig": ("duration", "renew_period"),
    "DispatcherConfig": ("reply_timeout",),
    "DirectoryConfig": ("lease_duration", "renew_period", "check_period", "discovery_timeout"),
    "GossipConfig": ("exchange_period", "heartbeat_period", "resubscription_period", "join_timeout"),
    "OutageSpec": ("start", "end"),
    "CrashSpec": ("at", "recover"),
    "NetworkConfig": ("latency_min", "latency_max"),
    "FederationScenario": ("promote_start", "promote_end", "late_join_at", "dismiss_at"),
    "ScriptCommand": ("at",),
    "WorkloadSpec": ("action_period",),
}

# Списки вложенных секций
_LIST_ITEMS = {
    ("SimConfig", "nodes"): NodeSpec,
    ("SimConfig", "node_groups"): NodeGroup,
    ("SimConfig", "federations"): FederationScenario,
    ("SimConfig", "script"): ScriptCommand,
    ("NetworkConfig", "outages"): OutageSpec,
    ("NetworkConfig", "crashes"): CrashSpec,
    ("NodeSpec", "services"): ServiceSpec,
}


def _join(path: str, key: Any) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else str(key)


def _type_ok(default: Any, value: Any) -> bool:
    if value is None or default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, (int, float)):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    if isinstance(default, dict):
        return isinstance(value, dict)
    return True


def _build(cls, data: Any, path: str, diagnostics: List[Tuple[str, str]]):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        diagnostics.append((path or "<root>", "ожидался объект"))
        return cls()
    defaults = cls()
    kwargs: Dict[str, Any] = {}
    known = {f.name: f for f in fields(cls)}
    durations = _DURATIONS.get(cls.__name__, ())
    for key, value in data.items():
        here = _join(path, key)
        if key not in known:
            diagnostics.append((here, "неизвестное поле"))
            continue
        default = getattr(defaults, key)
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, here, diagnostics)
            continue
        item_cls = _LIST_ITEMS.get((cls.__name__, key))
        if item_cls is not None:
            if not isinstance(value, list):
                diagnostics.append((here, "ожидался список"))
                continue
            kwargs[key] = [_build(item_cls, v, _join(here, i), diagnostics) for i, v in enumerate(value)]
            continue
        if key in durations:
            if value is None:
                kwargs[key] = None
                continue
            try:
                kwargs[key] = parse_duration(value)
            except ValueError as e:
                diagnostics.append((here, str(e)))
            continue
        if not _type_ok(default, value):
            diagnostics.append((here, f"ожидался тип {type(default).__name__}, получено {value!r}"))
            continue
        if isinstance(default, float) and isinstance(value, int):
            value = float(value)
        kwargs[key] = value
    return cls(**kwargs)


def _load_topology_file(config: SimConfig, base_dir: Optional[str], diagnostics) -> None:
    path = config.topology.file
    if base_dir and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        diagnostics.append(("topology.file", f"не удалось прочитать {path}: {e}"))
        return
    loaded = _build(TopologyConfig, data, "topology", diagnostics)
    loaded.file = config.topology.file
    if "kind" not in data:
        loaded.kind = "explicit"
    config.topology = loaded


# ---------------------------------------------------------------------------
# Проверки
# ---------------------------------------------------------------------------

def _check(diagnostics, path: str, ok: bool, message: str) -> None:
    if not ok:
        diagnostics.append((path, message))


def _validate(config: SimConfig, diagnostics: List[Tuple[str, str]]) -> None:
    _check(diagnostics, "duration", config.duration > 0, "должна быть положительной")
    _check(diagnostics, "seed", isinstance(config.seed, int), "должен быть целым")
    _check(diagnostics, "log_base", config.log_base in ("e", "2", "10"), "допустимо e, 2 или 10")

    net = config.network
    _check(diagnostics, "network.loss_rate", 0.0 <= net.loss_rate <= 1.0, "должна быть в [0, 1]")
    _check(diagnostics, "network.latency_min", net.latency_min >= 0, "не может быть отрицательной")
    _check(
        diagnostics, "network.latency_max", net.latency_max >= net.latency_min,
        "должна быть не меньше latency_min",
    )
    for i, outage in enumerate(net.outages):
        _check(diagnostics, f"network.outages[{i}].end", outage.end > outage.start, "должен быть позже start")
    for i, crash in enumerate(net.crashes):
        if crash.recover is not None:
            _check(diagnostics, f"network.crashes[{i}].recover", crash.recover > crash.at, "должен быть позже at")

    for name, lease in (("lease", config.lease), ("directory", config.directory)):
        duration = lease.duration if name == "lease" else lease.lease_duration
        _check(
            diagnostics, f"{name}.renew_period", 0 < lease.renew_period <= duration,
            "должен быть в (0, длительность лиза]",
        )
    _check(diagnostics, "directory.check_period", config.directory.check_period > 0, "должен быть положительным")
    _check(diagnostics, "dispatcher.reply_timeout", config.dispatcher.reply_timeout > 0, "должен быть положительным")

    gossip = config.gossip
    _check(diagnostics, "gossip.c", gossip.c >= 0, "не может быть отрицательным")
    for key in ("exchange_period", "heartbeat_period", "resubscription_period", "join_timeout"):
        _check(diagnostics, f"gossip.{key}", getattr(gossip, key) > 0, "должен быть положительным")
    _check(diagnostics, "gossip.max_forward_hops", gossip.max_forward_hops > 0, "должен быть положительным")

    topo = config.topology
    _check(diagnostics, "topology.kind", topo.kind in ("star", "tree", "explicit"), "допустимо star, tree, explicit")
    if topo.kind == "tree":
        _check(diagnostics, "topology.brokers", topo.brokers >= 1, "нужен хотя бы один брокер")
        _check(diagnostics, "topology.branching", topo.branching >= 1, "должно быть положительным")
    for i, link in enumerate(topo.links):
        _check(
            diagnostics, f"topology.links[{i}]", isinstance(link, list) and len(link) == 2,
            "связь задаётся парой брокеров",
        )

    ids = config.node_ids()
    seen = set()
    for i, node in enumerate(config.nodes):
        _check(diagnostics, f"nodes[{i}].node_id", bool(node.node_id), "не может быть пустым")
        _check(diagnostics, f"nodes[{i}].node_id", node.node_id not in seen, f"повтор id {node.node_id}")
        seen.add(node.node_id)
        _check(diagnostics, f"nodes[{i}].role", node.role in ROLES, f"допустимо {', '.join(ROLES)}")
        for j, service in enumerate(node.services):
            _check(diagnostics, f"nodes[{i}].services[{j}].name", bool(service.name), "не может быть пустым")

    known = set(ids)
    for i, fed in enumerate(config.federations):
        here = f"federations[{i}]"
        _check(diagnostics, f"{here}.name", bool(fed.name), "не может быть пустым")
        _check(diagnostics, f"{here}.style", fed.style in STYLES, f"допустимо {', '.join(STYLES)}")
        _check(diagnostics, f"{here}.manager", fed.manager in known, f"неизвестный узел {fed.manager!r}")
        for pattern in fed.members + fed.late_members:
            _check(
                diagnostics, f"{here}.members", bool(expand_members([pattern], ids)),
                f"нет узлов для {pattern!r}",
            )
        _check(diagnostics, f"{here}.promotions", fed.promotions >= 0, "не может быть отрицательным")
        _check(diagnostics, f"{here}.promote_end", fed.promote_end >= fed.promote_start, "раньше promote_start")
        _check(
            diagnostics, f"{here}.contact_policy", fed.contact_policy in ("random", "manager"),
            "допустимо random или manager",
        )

    for i, cmd in enumerate(config.script):
        _check(diagnostics, f"script[{i}].node", cmd.node in known, f"неизвестный узел {cmd.node!r}")
        _check(diagnostics, f"script[{i}].at", cmd.at >= 0, "не может быть отрицательным")
        _check(diagnostics, f"script[{i}].command", bool(cmd.command), "не может быть пустым")

    work = config.workload
    for key in ("qos_probability", "threshold_probability", "allow_add_info_probability"):
        value = getattr(work, key)
        _check(diagnostics, f"workload.{key}", 0.0 <= value <= 1.0, "должна быть в [0, 1]")
    _check(diagnostics, "workload.action_period", work.action_period > 0, "должен быть положительным")
    _check(diagnostics, "workload.method_pool", work.method_pool >= 1, "нужен хотя бы один метод")
    _check(diagnostics, "workload.max_facets", 1 <= work.max_facets <= 5, "допустимо от 1 до 5")
    for style in work.federation_styles:
        _check(diagnostics, "workload.federation_styles", style in STYLES, f"неизвестный стиль {style!r}")
    unknown = [k for k in work.weights if k not in ACTION_KINDS]
    _check(diagnostics, "workload.weights", not unknown, f"неизвестные действия {unknown}")
    if not unknown:
        total = sum(work.weights.values())
        _check(diagnostics, "workload.weights", abs(total - 1.0) < 1e-6, f"сумма весов {total:.4f} != 1")
        _check(
            diagnostics, "workload.weights", all(w >= 0 for w in work.weights.values()),
            "веса не могут быть отрицательными",
        )


def expand_members(patterns: List[str], node_ids: List[str]) -> List[str]:
    """Раскрыть шаблоны вида 'g*' в id узлов (порядок сценария сохраняется)"""
    result: List[str] = []
    for pattern in patterns:
        matched = fnmatch.filter(node_ids, pattern) if "*" in pattern else [pattern] if pattern in node_ids else []
        result.extend(m for m in matched if m not in result)
    return result


def load_config(path: str) -> SimConfig:
    """
    Загрузить сценарий из JSON-файла

    Args:
        path: Путь к файлу сценария

    Returns:
        Проверенный SimConfig
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise IoFailure(f"Не удалось прочитать {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigInvalid([("<file>", f"некорректный JSON: {e}")]) from None
    return SimConfig.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
