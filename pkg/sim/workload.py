"""
Генератор случайной нагрузки

Каждый узел периодически выполняет случайное действие: публикует сервис,
объявляет интерес, публикует дополнительный фасет, вступает в федерацию,
выходит из неё, продвигает сервис или свой дополнительный фасет. Недопустимые в текущем состоянии
действия не генерируются (вероятности перенормируются по допустимым).

Калибровка вероятности совпадения интереса с сервисом (~0.75%):
    сервис содержит одну операцию из method_pool, QoS-фасет с вероятностью
    qos_probability (худшее время 0..qos_max_tenths десятых секунды);
    интерес требует операцию и с вероятностью threshold_probability порог
    по худшему времени отклика:
        P = 1/100 · (0.55 + 0.45 · 0.9 · 50/101) ≈ 0.0075
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from components.delivery_manager import (
    AddInfoDraft,
    DeclareInterest,
    JoinFederation,
    LeaveFederation,
    ManagementCommand,
    NodeState,
    Promote,
    PromoteAddInfo,
    ServiceDraft,
    Share,
    ShareAddInfo,
)
from config import ACTION_KINDS, WorkloadSpec
from core.facet_query import AddInfoInterest, ByConstraints, Interest, SubConstraint, eval_path, parse_path
from core.federation_info import FederationInfo
from core.schemas import (
    DESCRIPTION,
    PRICING,
    QOS,
    SLA,
    SOAP_TEST,
    WSDL,
    build_description,
    build_pricing,
    build_qos,
    build_sla,
    build_soap_test,
    build_wsdl,
)
from core.service_model import SchemaDescriptor, XmlElement
from network.simulator import RandomStream

logger = logging.getLogger(__name__)

Document = Tuple[SchemaDescriptor, XmlElement]


def method_name(index: int) -> str:
    return f"method{index:02d}"


@dataclass
class WorkloadStats:
    """Итог оценки вероятности совпадения"""
    pairs: int
    matches: int

    @property
    def match_rate(self) -> float:
        return self.matches / self.pairs if self.pairs else 0.0


class WorkloadGenerator:
    """Случайные сервисы, интересы и команды по WorkloadSpec"""

    def __init__(self, spec: Optional[WorkloadSpec] = None):
        self.spec = spec or WorkloadSpec()
        self._counter = 0

    # -- документы --------------------------------------------------------

    def service_documents(self, rng: RandomStream, name: str) -> List[Document]:
        """WSDL с одной операцией, QoS с вероятностью qos_probability, остальные фасеты до max_facets"""
        spec = self.spec
        method = method_name(rng.randint(spec.method_pool))
        documents: List[Document] = [(WSDL, build_wsdl(name, [method]))]
        if rng.bernoulli(spec.qos_probability):
            worst = rng.randint(spec.qos_max_tenths + 1)
            documents.append((QOS, build_qos(worst * 100)))
        extras = rng.randint(spec.max_facets - len(documents) + 1)
        for _ in range(extras):
            kind = rng.randint(3)
            if kind == 0:
                documents.append((PRICING, build_pricing("basic", rng.randint(1000))))
            elif kind == 1:
                documents.append((SLA, build_sla(name, 0.9 + rng.random() * 0.1)))
            else:
                documents.append((DESCRIPTION, build_description(f"{name} service")))
        return documents

    def service_draft(self, rng: RandomStream, owner: str) -> ServiceDraft:
        self._counter += 1
        name = f"{owner}_svc{self._counter}"
        return ServiceDraft(
            name=name,
            documents=tuple(self.service_documents(rng, name)),
            allow_add_info=rng.bernoulli(self.spec.allow_add_info_probability),
        )

    def service_interest(self, rng: RandomStream) -> ByConstraints:
        """Операция из пула и, с вероятностью threshold_probability, порог по QoS"""
        spec = self.spec
        method = method_name(rng.randint(spec.method_pool))
        conjuncts = [SubConstraint("WSDL", parse_path(f"//operation[@name='{method}']"))]
        if rng.bernoulli(spec.threshold_probability):
            threshold = rng.randint(spec.qos_max_tenths + 1) * 100
            conjuncts.append(
                SubConstraint("QoS", parse_path(f"/QoS/response[case='worst']/time < {threshold}"))
            )
        return ByConstraints(tuple(conjuncts))

    def add_info_draft(self, rng: RandomStream, service_ref) -> AddInfoDraft:
        testcases = rng.randint(self.spec.max_testcases + 1)
        return AddInfoDraft(service_ref, SOAP_TEST, build_soap_test(testcases, rng.random()))

    def add_info_interest(self, rng: RandomStream, service_ref) -> AddInfoInterest:
        threshold = rng.randint(self.spec.max_testcases + 1)
        return AddInfoInterest(service_ref, "SoapTest", parse_path(f"/SoapTest[count(testcase) > {threshold}]"))

    # -- действия ---------------------------------------------------------

    def legal_kinds(self, state: NodeState, federations: Sequence[FederationInfo]) -> Dict[str, bool]:
        joinable = any(f.fed_id not in state.joined for f in federations)
        promotable = bool(state.joined) and bool(state.own_services or state.held_services)
        return {
            "share": True,
            "subscribe": True,
            "share_add_info": bool(state.add_info_targets),
            "subscribe_add_info": bool(state.held_services),
            "join": joinable,
            "leave": bool(state.joined),
            "promote": promotable,
            "promote_add_info": bool(state.joined) and bool(state.own_add_info),
        }

    def draw_kind(self, rng: RandomStream, state: NodeState, federations: Sequence[FederationInfo]) -> str:
        legal = self.legal_kinds(state, federations)
        kinds = [k for k in ACTION_KINDS if legal[k]]
        weights = [self.spec.weights.get(k, 0.0) for k in kinds]
        if sum(weights) <= 0:
            return "share"
        return kinds[rng.weighted(weights)]

    def gen_action(
        self,
        rng: RandomStream,
        state: NodeState,
        federations: Sequence[FederationInfo] = (),
    ) -> ManagementCommand:
        """
        Случайная допустимая команда для узла

        Args:
            rng: Поток случайных чисел симуляции
            state: Снимок состояния узла
            federations: Созданные федерации, доступные для вступления

        Returns:
            ManagementCommand
        """
        kind = self.draw_kind(rng, state, federations)
        if kind == "share":
            return Share(draft=self.service_draft(rng, state.node_id))
        if kind == "subscribe":
            return DeclareInterest(self.service_interest(rng))
        if kind == "share_add_info":
            target = rng.choice(state.add_info_targets)
            return ShareAddInfo(draft=self.add_info_draft(rng, target))
        if kind == "subscribe_add_info":
            target = rng.choice(state.held_services)
            return DeclareInterest(self.add_info_interest(rng, target))
        if kind == "join":
            candidates = [f for f in federations if f.fed_id not in state.joined]
            return JoinFederation(info=rng.choice(candidates))
        if kind == "leave":
            return LeaveFederation(rng.choice(state.joined))
        if kind == "promote_add_info":
            return PromoteAddInfo(rng.choice(state.joined), rng.choice(state.own_add_info))
        elements = state.own_services + state.held_services
        return Promote(rng.choice(state.joined), rng.choice(elements))


def _satisfies(interest: Interest, documents: Sequence[Document]) -> bool:
    if not isinstance(interest, ByConstraints):
        return False
    for conjunct in interest.conjuncts:
        if not any(
            schema.schema_id == conjunct.schema_id and eval_path(conjunct.expr, root)
            for schema, root in documents
        ):
            return False
    return True


def estimate_match_rate(spec: Optional[WorkloadSpec] = None, seed: int = 0, pairs: int = 40000) -> WorkloadStats:
    """
    Оценить вероятность совпадения сгенерированного интереса с сервисом

    Args:
        spec: Параметры нагрузки
        seed: Seed генератора
        pairs: Число независимых пар (сервис, интерес)

    Returns:
        WorkloadStats
    """
    generator = WorkloadGenerator(spec)
    rng = RandomStream(np.random.default_rng(seed))
    matches = 0
    for i in range(pairs):
        documents = generator.service_documents(rng, f"s{i}")
        interest = generator.service_interest(rng)
        if _satisfies(interest, documents):
            matches += 1
    return WorkloadStats(pairs=pairs, matches=matches)


def action_kind(cmd: ManagementCommand) -> str:
    """Вид действия нагрузки для команды"""
    if isinstance(cmd, Share):
        return "share"
    if isinstance(cmd, ShareAddInfo):
        return "share_add_info"
    if isinstance(cmd, DeclareInterest):
        return "subscribe_add_info" if isinstance(cmd.interest, AddInfoInterest) else "subscribe"
    if isinstance(cmd, JoinFederation):
        return "join"
    if isinstance(cmd, LeaveFederation):
        return "leave"
    if isinstance(cmd, PromoteAddInfo):
        return "promote_add_info"
    if isinstance(cmd, Promote):
        return "promote"
    raise ValueError(f"Команда {cmd!r} не является действием нагрузки")
