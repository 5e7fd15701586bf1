"""
Сборка прогона: узлы, диспетчер, каталоги, сценарии федераций и нагрузка
"""
import logging
from collections import Counter
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Set

from components.delivery_manager import (
    AddInfoDraft,
    CreateFederation,
    DeclareInterest,
    DeliveryManager,
    DismissFederation,
    InterestHandle,
    JoinFederation,
    LeaveFederation,
    ManagementCommand,
    Promote,
    Retract,
    RevokeInterest,
    Share,
    ShareAddInfo,
    Withdraw,
)
from components.directory import FederationDirectory
from config import MINUTE, FederationScenario, ScriptCommand, SimConfig, expand_members, parse_duration
from core.errors import DireError, UnknownElement, UnknownFederation
from core.facet_query import AddInfoInterest, ById, ByConstraints, SubConstraint, parse_path
from core.federation_info import FederationInfo, FederationStyle
from core.schemas import QOS, SOAP_TEST, WSDL, build_qos, build_soap_test, build_wsdl
from core.service_model import ElementId, KeyRing, NodeId
from network.channels import NetworkModel
from network.dispatcher import Dispatcher
from network.simulator import Simulator
from network.topology import build_topology
from sim.workload import WorkloadGenerator, action_kind
from styles.base import FederationLedger
from styles.gossip import GossipStyle

logger = logging.getLogger(__name__)

# Интервал между вступлениями членов сценарной федерации
JOIN_SPACING = 1.0

# Интервал между сценарными отзывами после окна продвижений
RETRACT_SPACING = 10 * MINUTE


class World:
    """
    Все объекты одного прогона.

    Случайность берётся только из sim.rng/sim.random, поэтому прогон
    полностью определяется конфигурацией и seed.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.sim = Simulator(config.seed)
        self.keyring = KeyRing(config.seed)
        self.network = NetworkModel(self.sim, config.network)
        explicit = {n.node_id: n.broker for n in config.nodes if n.broker}
        self.topology = build_topology(config.topology, config.node_ids(), explicit)
        self.dispatcher = Dispatcher(
            self.sim, self.network, self.topology, config.dispatcher.reply_timeout
        )
        self.ledger = FederationLedger()
        self.managers: Dict[NodeId, DeliveryManager] = {}
        self.directories: Dict[NodeId, FederationDirectory] = {}
        for node in config.nodes:
            if node.role == "directory":
                self.directories[node.node_id] = FederationDirectory(
                    node.node_id, self.sim, self.dispatcher, config.directory
                )
            else:
                self.managers[node.node_id] = DeliveryManager(
                    node.node_id, self.dispatcher, self.keyring, config, self.ledger,
                    role=node.role, peers=self.managers.get,
                )

        self.federations: Dict[str, FederationInfo] = {}
        self.scenarios: Dict[str, FederationScenario] = {}
        self.elements: Dict[str, ElementId] = {}
        self.interests: Dict[str, InterestHandle] = {}
        self.generator = WorkloadGenerator(config.workload)
        self.workload_federations: List[FederationInfo] = []
        self.action_counts: Counter = Counter()
        self.command_errors: List[Dict[str, Any]] = []
        self._ready = False

    # =========================================================================
    # Подготовка
    # =========================================================================

    def setup(self) -> "World":
        """Создать начальные сервисы и запланировать сценарии"""
        if self._ready:
            return self
        self._ready = True
        for node in self.config.nodes:
            dm = self.managers.get(node.node_id)
            if dm is None:
                continue
            for spec in node.services:
                documents = [(WSDL, build_wsdl(spec.name, spec.operations or [spec.name]))]
                if spec.qos_worst_ms is not None:
                    documents.append((QOS, build_qos(spec.qos_worst_ms, spec.qos_best_ms)))
                entry = dm.create_service(spec.name, documents, spec.allow_add_info)
                self.elements[spec.name] = entry.id
        for crash in self.config.network.crashes:
            logger.info(f"Авария узла {crash.node}: t={crash.at:.1f}, восстановление {crash.recover}")
        for fed in self.config.federations:
            self.sim.schedule_at(0.0, self._create_scenario_federation, fed)
        for cmd in self.config.script:
            self.sim.schedule_at(cmd.at, self._run_script, cmd)
        if self.config.workload.enabled:
            self.sim.schedule_at(0.0, self._start_workload)
        logger.info(
            f"Сценарий {self.config.name}: узлов {len(self.managers)}, каталогов {len(self.directories)}, "
            f"брокеров {len(self.topology.brokers)}, федераций {len(self.config.federations)}"
        )
        return self

    def run(self, until: Optional[float] = None) -> float:
        self.setup()
        return self.sim.run(self.config.duration if until is None else until)

    # =========================================================================
    # Выполнение команд
    # =========================================================================

    def execute(self, node: NodeId, cmd: ManagementCommand) -> Any:
        """Выполнить команду; ошибки протокола журналируются и не прерывают прогон"""
        dm = self.managers.get(node)
        if dm is None:
            self._command_error(node, type(cmd).__name__, f"узел {node} не имеет delivery manager")
            return None
        if self.network.crashed(node):
            self._command_error(node, type(cmd).__name__, "узел остановлен")
            return None
        try:
            return dm.execute(cmd)
        except DireError as e:
            self._command_error(node, type(cmd).__name__, f"{type(e).__name__}: {e}")
            return None

    def _command_error(self, node: NodeId, command: str, message: str) -> None:
        logger.warning(f"t={self.sim.now:.1f} {node}: команда {command} не выполнена: {message}")
        self.command_errors.append({"time": self.sim.now, "node": node, "command": command, "error": message})

    # =========================================================================
    # Сценарные федерации
    # =========================================================================

    def _create_scenario_federation(self, fed: FederationScenario) -> None:
        info = self.execute(fed.manager, _create(fed.name, fed.style))
        if info is None:
            return
        self.federations[fed.name] = info
        self.scenarios[fed.name] = fed
        ids = self.config.node_ids()
        late = [m for m in expand_members(fed.late_members, ids) if m != fed.manager and m in self.managers]
        members = [
            m for m in expand_members(fed.members, ids)
            if m != fed.manager and m in self.managers and m not in late
        ]
        for i, member in enumerate(members):
            self.sim.schedule((i + 1) * JOIN_SPACING, self._join_member, fed, info, member)
        for i, member in enumerate(late):
            self.sim.schedule_at(fed.late_join_at + i * JOIN_SPACING, self._join_member, fed, info, member)

        roster = [fed.manager] + members
        if fed.promotions:
            spacing = (fed.promote_end - fed.promote_start) / fed.promotions
            for i in range(fed.promotions):
                at = fed.promote_start + i * spacing
                self.sim.schedule_at(max(at, self.sim.now), self._promote_fresh, fed, info, roster[i % len(roster)], i)
        if fed.retractions:
            for i in range(min(fed.retractions, fed.promotions)):
                at = fed.promote_end + (i + 1) * RETRACT_SPACING
                self.sim.schedule_at(at, self._retract_nth, fed, info, roster[i % len(roster)], i)
        if fed.dismiss_at is not None:
            self.sim.schedule_at(fed.dismiss_at, self.execute, fed.manager, DismissFederation(info.fed_id))

    def _join_member(self, fed: FederationScenario, info: FederationInfo, node: NodeId) -> None:
        contact = None
        if info.style is FederationStyle.GOSSIP and fed.contact_policy == "random":
            contact = self._random_contact(info, node)
        self.execute(node, JoinFederation(info=info, contact=contact))

    def _random_contact(self, info: FederationInfo, joiner: NodeId) -> Optional[NodeId]:
        """Случайный уже вступивший член gossip-федерации"""
        candidates = []
        for member in self.ledger.members(info.fed_id):
            if member == joiner:
                continue
            membership = self.managers[member].membership(info.fed_id)
            if membership is not None and isinstance(membership.style, GossipStyle) and membership.style.joined:
                candidates.append(member)
        if not candidates:
            return None
        return self.sim.random.choice(candidates)

    def _promote_fresh(self, fed: FederationScenario, info: FederationInfo, node: NodeId, index: int) -> None:
        dm = self.managers[node]
        name = f"{fed.name}-e{index}"
        operation = f"op{index}"
        entry = dm.create_service(
            name, [(WSDL, build_wsdl(name, [operation])), (QOS, build_qos(100 + index % 900))]
        )
        self.elements[name] = entry.id
        self.execute(node, Promote(info.fed_id, entry.id))

    def _retract_nth(self, fed: FederationScenario, info: FederationInfo, node: NodeId, index: int) -> None:
        element_id = self.elements.get(f"{fed.name}-e{index}")
        if element_id is not None:
            self.execute(node, Retract(info.fed_id, element_id))

    # =========================================================================
    # Скрипт
    # =========================================================================

    def _run_script(self, cmd: ScriptCommand) -> None:
        handler = self._SCRIPT.get(cmd.command)
        if handler is None:
            self._command_error(cmd.node, cmd.command, "неизвестная команда скрипта")
            return
        try:
            handler(self, cmd.node, cmd.args)
        except (DireError, KeyError, ValueError) as e:
            self._command_error(cmd.node, cmd.command, f"{type(e).__name__}: {e}")

    def _element(self, name: str) -> ElementId:
        element_id = self.elements.get(name)
        if element_id is None:
            raise UnknownElement(f"Элемент {name!r} не создан")
        return element_id

    def _federation(self, name: str) -> FederationInfo:
        info = self.federations.get(name)
        if info is None:
            raise UnknownFederation(f"Федерация {name!r} не создана")
        return info

    def _script_create_service(self, node: NodeId, args: Dict[str, Any]) -> None:
        name = args["name"]
        documents = [(WSDL, build_wsdl(name, args.get("operations") or [name]))]
        if args.get("qos_worst_ms") is not None:
            documents.append((QOS, build_qos(int(args["qos_worst_ms"]), args.get("qos_best_ms"))))
        entry = self.managers[node].create_service(name, documents, bool(args.get("allow_add_info", False)))
        self.elements[name] = entry.id

    def _script_share(self, node: NodeId, args: Dict[str, Any]) -> None:
        if "service" in args:
            self.execute(node, Share(service_id=self._element(args["service"])))
        else:
            draft = self.generator.service_draft(self.sim.random, node)
            self.elements[draft.name] = self.execute(node, Share(draft=draft))

    def _script_share_add_info(self, node: NodeId, args: Dict[str, Any]) -> None:
        root = build_soap_test(int(args.get("testcases", 0)), float(args.get("completeness", 1.0)))
        draft = AddInfoDraft(self._element(args["service"]), SOAP_TEST, root)
        facet_id = self.execute(node, ShareAddInfo(draft=draft))
        if facet_id is not None and args.get("name"):
            self.elements[args["name"]] = facet_id

    def _script_subscribe(self, node: NodeId, args: Dict[str, Any]) -> None:
        if "service" in args:
            interest = ById(self._element(args["service"]))
        else:
            conjuncts = tuple(SubConstraint.parse(schema, expr) for schema, expr in args["constraints"])
            interest = ByConstraints(conjuncts)
        handle = self.execute(node, DeclareInterest(interest))
        if handle is not None:
            self.interests[args.get("label", f"{node}#{handle.subscription.sub_id}")] = handle

    def _script_subscribe_add_info(self, node: NodeId, args: Dict[str, Any]) -> None:
        interest = AddInfoInterest(
            self._element(args["service"]), args.get("schema", "SoapTest"), parse_path(args["expr"])
        )
        handle = self.execute(node, DeclareInterest(interest))
        if handle is not None:
            self.interests[args.get("label", f"{node}#{handle.subscription.sub_id}")] = handle

    def _script_revoke(self, node: NodeId, args: Dict[str, Any]) -> None:
        self.execute(node, RevokeInterest(self.interests.pop(args["label"])))

    def _script_create_federation(self, node: NodeId, args: Dict[str, Any]) -> None:
        info = self.execute(node, _create(args["name"], args.get("style", "ps")))
        if info is not None:
            self.federations[args["name"]] = info

    def _script_join(self, node: NodeId, args: Dict[str, Any]) -> None:
        info = self._federation(args["federation"])
        if args.get("lookup"):
            self.execute(node, JoinFederation(fed_id=info.fed_id))
        else:
            self.execute(node, JoinFederation(info=info, contact=args.get("contact")))

    def _script_leave(self, node: NodeId, args: Dict[str, Any]) -> None:
        self.execute(node, LeaveFederation(self._federation(args["federation"]).fed_id))

    def _script_promote(self, node: NodeId, args: Dict[str, Any]) -> None:
        self.execute(node, Promote(self._federation(args["federation"]).fed_id, self._element(args["service"])))

    def _script_retract(self, node: NodeId, args: Dict[str, Any]) -> None:
        self.execute(node, Retract(self._federation(args["federation"]).fed_id, self._element(args["service"])))

    def _script_dismiss(self, node: NodeId, args: Dict[str, Any]) -> None:
        self.execute(node, DismissFederation(self._federation(args["federation"]).fed_id))

    def _script_withdraw(self, node: NodeId, args: Dict[str, Any]) -> None:
        self.execute(node, Withdraw(self._element(args["service"])))

    def _script_crash(self, node: NodeId, args: Dict[str, Any]) -> None:
        recover = args.get("recover_after")
        until = self.sim.now + parse_duration(recover) if recover is not None else None
        self.network.crash(node, self.sim.now, until)
        logger.info(f"t={self.sim.now:.1f} {node}: узел остановлен")

    _SCRIPT: Dict[str, Callable[["World", NodeId, Dict[str, Any]], None]] = {
        "create_service": _script_create_service,
        "share": _script_share,
        "share_add_info": _script_share_add_info,
        "subscribe": _script_subscribe,
        "subscribe_add_info": _script_subscribe_add_info,
        "revoke": _script_revoke,
        "create_federation": _script_create_federation,
        "join": _script_join,
        "leave": _script_leave,
        "promote": _script_promote,
        "retract": _script_retract,
        "dismiss": _script_dismiss,
        "withdraw": _script_withdraw,
        "crash": _script_crash,
    }

    # =========================================================================
    # Случайная нагрузка
    # =========================================================================

    def _start_workload(self) -> None:
        work = self.config.workload
        full = [n for n, dm in self.managers.items() if dm.role == "full"]
        if full and work.federation_styles:
            for i in range(work.federations):
                style = work.federation_styles[i % len(work.federation_styles)]
                creator = full[i % len(full)]
                info = self.execute(creator, _create(f"wl-fed{i}", style))
                if info is not None:
                    self.workload_federations.append(info)
                    self.federations[info.name] = info
        for node in self.managers:
            first = self.sim.random.uniform(0.0, work.action_period)
            self.sim.every(work.action_period, self._random_action, node, first=first)

    def _random_action(self, node: NodeId) -> None:
        dm = self.managers[node]
        if self.network.crashed(node):
            return
        cmd = self.generator.gen_action(self.sim.random, dm.snapshot(), self.workload_federations)
        self.action_counts[action_kind(cmd)] += 1
        self.execute(node, cmd)

    # =========================================================================
    # Состояние
    # =========================================================================

    def federation_state(self, name: str) -> Dict[NodeId, FrozenSet[ElementId]]:
        """Элементы федерации на каждом текущем члене"""
        info = self._federation(name)
        state: Dict[NodeId, FrozenSet[ElementId]] = {}
        for node in self.ledger.members(info.fed_id):
            membership = self.managers[node].membership(info.fed_id)
            if membership is not None:
                state[node] = frozenset(membership.style.live_elements())
        return state

    def expected_elements(self, name: str) -> Set[ElementId]:
        """Продвинутые и не отозванные элементы федерации"""
        fed_id = self._federation(name).fed_id
        return {
            element_id
            for (fid, element_id) in self.ledger.promotions
            if fid == fed_id and (fid, element_id) not in self.ledger.retracted
        }


def _create(name: str, style: str) -> CreateFederation:
    return CreateFederation(name, FederationStyle.parse(style))


def build_world(config: SimConfig) -> World:
    """Собрать и подготовить прогон"""
    return World(config).setup()
