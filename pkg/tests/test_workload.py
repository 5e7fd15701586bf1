"""
Тесты генератора случайной нагрузки и его калибровки

Запуск:
    pytest tests/test_workload.py
"""
import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from components.delivery_manager import (
    DeclareInterest,
    JoinFederation,
    LeaveFederation,
    NodeState,
    Promote,
    PromoteAddInfo,
    Share,
    ShareAddInfo,
    Withdraw,
)
from config import ACTION_KINDS, WorkloadSpec, load_config
from core.facet_query import AddInfoInterest, ByConstraints, SubConstraint
from core.federation_info import FederationInfo, FederationStyle
from core.service_model import ElementId
from network.simulator import RandomStream
from sim.oracles import CHI2_CRITICAL_DF7, action_chi_square
from sim.runner import run_world
from sim.workload import WorkloadGenerator, WorkloadStats, action_kind, estimate_match_rate

SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")


def fresh_state(**overrides):
    state = dict(
        node_id="n1", role="full", own_services=[], own_add_info=[], held_services=[],
        add_info_targets=[], shared=set(), joined=[], interests=0,
    )
    state.update(overrides)
    return NodeState(**state)


def federation(counter):
    return FederationInfo(ElementId(f"m:{counter}"), f"F{counter}", FederationStyle.PS, {"topic": f"F{counter}"}, "m")


class TestGenerator:
    """Случайные документы и команды"""

    def setup_method(self):
        self.generator = WorkloadGenerator(WorkloadSpec())
        self.rng = RandomStream(np.random.default_rng(7))

    def test_service_documents(self):
        """Первый фасет - WSDL, всего не больше max_facets"""
        for i in range(200):
            documents = self.generator.service_documents(self.rng, f"s{i}")
            assert documents[0][0].schema_id == "WSDL"
            assert 1 <= len(documents) <= 5
            assert sum(schema.schema_id == "QoS" for schema, _ in documents) <= 1

    def test_service_names_unique(self):
        names = {self.generator.service_draft(self.rng, "n1").name for _ in range(50)}
        assert len(names) == 50

    def test_interest_shape(self):
        for _ in range(100):
            interest = self.generator.service_interest(self.rng)
            assert isinstance(interest, ByConstraints)
            assert [c.schema_id for c in interest.conjuncts][0] == "WSDL"
            assert len(interest.conjuncts) in (1, 2)

    def test_fresh_node_actions(self):
        """Без федераций и полученных сервисов допустимы только share и subscribe"""
        state = fresh_state()
        legal = self.generator.legal_kinds(state, [])
        assert {k for k, ok in legal.items() if ok} == {"share", "subscribe"}
        kinds = {action_kind(self.generator.gen_action(self.rng, state)) for _ in range(500)}
        assert kinds == {"share", "subscribe"}

    def test_join_only_unjoined(self):
        joined, other = federation(1), federation(2)
        state = fresh_state(joined=[joined.fed_id])
        assert self.generator.legal_kinds(state, [joined])["join"] is False
        assert self.generator.legal_kinds(state, [joined, other])["join"] is True
        for _ in range(300):
            cmd = self.generator.gen_action(self.rng, state, [joined, other])
            if isinstance(cmd, JoinFederation):
                assert cmd.info is other

    def test_promote_needs_membership_and_elements(self):
        state = fresh_state(joined=[ElementId("m:1")])
        assert self.generator.legal_kinds(state, [])["promote"] is False
        state = fresh_state(joined=[ElementId("m:1")], own_services=[ElementId("n1:1")])
        assert self.generator.legal_kinds(state, [])["promote"] is True

    def test_promote_add_info_needs_own_facet(self):
        """Продвигается только собственный дополнительный фасет"""
        joined, facet = ElementId("m:1"), ElementId("n1:5")
        state = fresh_state(joined=[joined], own_services=[ElementId("n1:1")])
        assert self.generator.legal_kinds(state, [])["promote_add_info"] is False
        state = fresh_state(joined=[joined], own_add_info=[facet])
        assert self.generator.legal_kinds(state, [])["promote_add_info"] is True
        drawn = [self.generator.gen_action(self.rng, state) for _ in range(300)]
        facets = [cmd for cmd in drawn if isinstance(cmd, PromoteAddInfo)]
        assert facets
        assert all(cmd.element_id == facet and cmd.fed_id == joined for cmd in facets)
        assert all(action_kind(cmd) != "promote" for cmd in drawn)

    def test_add_info_targets(self):
        """Дополнительные фасеты только к полученным сервисам с allow_add_info"""
        held = ElementId("p:1")
        state = fresh_state(held_services=[held])
        legal = self.generator.legal_kinds(state, [])
        assert legal["subscribe_add_info"] is True
        assert legal["share_add_info"] is False
        for _ in range(300):
            cmd = self.generator.gen_action(self.rng, state)
            if isinstance(cmd, DeclareInterest) and isinstance(cmd.interest, AddInfoInterest):
                assert cmd.interest.service_id == held


class TestActionKind:
    """Классификация команд нагрузки"""

    def test_kinds(self):
        interest = ByConstraints((SubConstraint.parse("WSDL", "//operation[@name='getQuote']"),))
        assert action_kind(Share(service_id=ElementId("a:1"))) == "share"
        assert action_kind(ShareAddInfo(facet_id=ElementId("a:2"))) == "share_add_info"
        assert action_kind(DeclareInterest(interest)) == "subscribe"
        assert action_kind(LeaveFederation(ElementId("m:1"))) == "leave"
        assert action_kind(Promote(ElementId("m:1"), ElementId("a:1"))) == "promote"
        assert action_kind(PromoteAddInfo(ElementId("m:1"), ElementId("a:2"))) == "promote_add_info"

    def test_not_workload(self):
        with pytest.raises(ValueError):
            action_kind(Withdraw(ElementId("a:1")))


class TestCalibration:
    """Статистика нагрузки"""

    def test_match_rate(self):
        """Вероятность совпадения интереса с сервисом около 0.75%"""
        stats = estimate_match_rate(WorkloadSpec(), seed=0, pairs=40000)
        assert stats.pairs == 40000
        assert abs(stats.match_rate - 0.0075) < 0.0015

    def test_empty_stats(self):
        assert WorkloadStats(pairs=0, matches=0).match_rate == 0.0

    def test_action_frequencies(self):
        """Частоты действий согласуются с весами (χ², 7 степеней свободы)"""
        statistic, table = action_chi_square(WorkloadSpec(), seed=0, draws=100000)
        assert list(table["action"]) == list(ACTION_KINDS)
        assert table["observed"].sum() == 100000
        assert table["expected"].sum() == pytest.approx(100000)
        assert statistic < CHI2_CRITICAL_DF7

    def test_custom_weights(self):
        """Действие с нулевым весом не выбирается"""
        weights = dict(WorkloadSpec().weights, leave=0.0, promote=0.20)
        _, table = action_chi_square(WorkloadSpec(weights=weights), seed=1, draws=20000)
        assert table.set_index("action").loc["leave", "observed"] == 0


@pytest.mark.slow
class TestWorkloadScenarios:
    """Прогоны со случайной нагрузкой"""

    def test_marketplace_star(self):
        """Один брокер: все сообщения доставляются без переходов"""
        world, report = run_world(load_config(os.path.join(SCENARIOS, "marketplace_star.json")))
        assert sum(world.action_counts.values()) > 0
        assert set(world.action_counts) <= set(ACTION_KINDS)
        assert report.summary["zero_hop_share"] == 1.0
        assert report.summary["rejected_unauthorized"] == 0
        tiny = report.nodes[report.nodes["role"] == "tiny"]
        assert (tiny["services"] <= tiny["shared"]).all()

    def test_tree25_hop_fit(self):
        """На дереве брокеров гистограмма переходов аппроксимируется логарифмом"""
        _, report = run_world(load_config(os.path.join(SCENARIOS, "tree25.json")))
        assert len(report.hops) >= 2
        assert "hop_fit_slope" in report.summary
        assert report.summary["zero_hop_share"] < 1.0
