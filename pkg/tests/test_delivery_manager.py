"""
Тесты delivery manager: маркетплейс, лизы, проверка авторства,
дополнительные фасеты и управление федерациями

Запуск:
    pytest tests/test_delivery_manager.py
"""
import sys
import os
from dataclasses import replace

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import DAY, HOUR, WEEK, SimConfig
from core.errors import (
    AlreadyJoined,
    NotAMember,
    NotCreator,
    NotManager,
    UnknownFacet,
    UnknownFederation,
    UnknownService,
)
from core.federation_info import FederationStyle
from core.messages import AddInfoMessage, ServiceMessage
from core.schemas import QOS, SOAP_TEST, WSDL, build_qos, build_soap_test, build_wsdl
from core.service_model import ElementId, Facet, FacetKind, FacetXML, IdGenerator, Signature
from core.wire import encode_facet
from network.channels import ChannelClass
from sim.world import World

TRADE_FEED = [
    ["WSDL", "//operation[@name='getLastTrade']"],
    ["QoS", "/QoS/response[case='worst']/time[@format='ms'] < 100"],
]


def market(make_config, qos_ms=80, allow_add_info=True, extra_nodes=(), script=(), **overrides):
    """Узлы a (владелец quotes), b (подписчик), c; a публикует quotes в t=20"""
    nodes = [
        {"node_id": "a", "services": [{
            "name": "quotes", "operations": ["getLastTrade"],
            "qos_worst_ms": qos_ms, "allow_add_info": allow_add_info,
        }]},
        {"node_id": "b"},
        {"node_id": "c"},
    ] + list(extra_nodes)
    data = {
        "name": "market",
        "seed": 1,
        "duration": "10D",
        "nodes": nodes,
        "script": [
            {"at": 10, "node": "b", "command": "subscribe", "args": {"label": "feed", "constraints": TRADE_FEED}},
            {"at": 20, "node": "a", "command": "share", "args": {"service": "quotes"}},
        ] + list(script),
    }
    data.update(overrides)
    return World(make_config(**data)).setup()


class TestMarketplace:
    """Публикация и подписка по содержимому"""

    def test_matching_subscriber_receives(self, make_config):
        """Подходящий интерес получает сервис, остальные узлы - нет"""
        world = market(make_config)
        world.run(HOUR)
        quotes = world.elements["quotes"]
        assert quotes in world.managers["b"].registry
        assert quotes not in world.managers["c"].registry
        assert world.managers["b"].holdings()[quotes].kind == "service"

    def test_slow_service_filtered(self, make_config):
        """Сервис с худшим временем 150 мс не проходит порог интереса"""
        world = market(make_config, qos_ms=150)
        world.run(HOUR)
        assert world.elements["quotes"] not in world.managers["b"].registry
        assert world.dispatcher.traces[0].discarded

    def test_renewal_refreshes_lease(self, make_config):
        """Каждое продление обновляет момент последнего получения"""
        world = market(make_config)
        world.run(2 * DAY + HOUR)
        holding = world.managers["b"].holdings()[world.elements["quotes"]]
        assert holding.last_seen > 2 * DAY
        assert holding.first_seen < HOUR

    def test_withdraw_expires_at_receivers(self, make_config):
        """После отзыва элемент удаляется у получателей по истечении лиза"""
        world = market(make_config, script=[
            {"at": "2D", "node": "a", "command": "withdraw", "args": {"service": "quotes"}},
        ])
        quotes = world.elements["quotes"]
        world.run(8 * DAY)
        assert quotes in world.managers["b"].registry
        world.run(8 * DAY + 2 * HOUR)
        assert quotes not in world.managers["b"].registry
        assert quotes in world.managers["a"].registry

    def test_revoked_interest(self, make_config):
        """После отзыва интереса сервис не доставляется"""
        world = market(make_config, script=[
            {"at": 15, "node": "b", "command": "revoke", "args": {"label": "feed"}},
        ])
        world.run(HOUR)
        assert world.managers["b"].interests == []
        assert world.elements["quotes"] not in world.managers["b"].registry
        assert world.command_errors == []

    def test_tiny_node_does_not_store(self, make_config):
        """Tiny-узел получает сервис, но не хранит его"""
        world = market(make_config, extra_nodes=[{"node_id": "t", "role": "tiny"}], script=[
            {"at": 10, "node": "t", "command": "subscribe", "args": {"constraints": TRADE_FEED}},
        ])
        world.run(HOUR)
        tiny = world.managers["t"]
        assert tiny.received == 1
        assert world.elements["quotes"] not in tiny.registry


class TestLeaseOutage:
    """Поведение лизов при отключении связи"""

    OUTAGE = {"a": "b-a", "b": "hub", "start": "1D"}

    def test_short_outage_keeps_element(self, make_config):
        """Отключение короче лиза не приводит к удалению"""
        world = market(make_config, network={"outages": [dict(self.OUTAGE, end="4D")]})
        world.run(8 * DAY + 12 * HOUR)
        assert world.elements["quotes"] in world.managers["b"].registry

    def test_long_outage_expires_and_recovers(self, make_config):
        """Отключение дольше лиза удаляет элемент; после восстановления он возвращается"""
        world = market(make_config, network={"outages": [dict(self.OUTAGE, end="9D")]})
        quotes = world.elements["quotes"]
        world.run(8 * DAY + 12 * HOUR)
        assert quotes not in world.managers["b"].registry
        world.run(9 * DAY + 12 * HOUR)
        assert quotes in world.managers["b"].registry
        counters = world.network.counters[ChannelClass.MARKETPLACE]
        assert counters.lost >= 7

    def test_bulk_expiry(self, make_config):
        """Тысяча элементов с коротким лизом удаляется одним проходом"""
        world = market(make_config, script=[
            {"at": 10, "node": "b", "command": "subscribe", "args": {"constraints": [TRADE_FEED[0]]}},
        ])
        world.run(100)
        a = world.managers["a"]
        bulk = []
        for i in range(1000):
            entry = a.create_service(f"bulk{i}", [(WSDL, build_wsdl(f"bulk{i}", ["getLastTrade"]))])
            world.dispatcher.publish("a", ServiceMessage.from_entry(entry, HOUR, 600), ChannelClass.MARKETPLACE)
            bulk.append(entry.id)
        world.run(HOUR)
        b = world.managers["b"]
        assert all(element_id in b.registry for element_id in bulk)
        world.run(3 * HOUR)
        assert not any(element_id in b.registry for element_id in bulk)
        assert set(b.holdings()) == {world.elements["quotes"]}
        assert all(element_id in a.registry for element_id in bulk)


class TestAuthority:
    """Отклонение подделанных элементов"""

    def forge(self, world, author_override=None, signature_override=None):
        m_key = world.managers["m"].key
        service_id = ElementId("a:77")
        facet = Facet.create(
            m_key, IdGenerator("m"), FacetKind.SPECIFICATION, WSDL, build_wsdl("quotes", ["getLastTrade"]), service_id
        )
        if author_override:
            facet = replace(facet, author=author_override)
        if signature_override:
            facet = replace(facet, signature=signature_override(facet))
        return ServiceMessage(
            service_id=service_id, name="quotes", creator="a", allow_add_info=False,
            facets=(encode_facet(facet),), lease_duration=WEEK, renew_period=DAY,
        )

    def deliver(self, make_config, msg):
        world = market(make_config, extra_nodes=[{"node_id": "m"}], script=[
            {"at": 10, "node": "b", "command": "subscribe", "args": {"constraints": [TRADE_FEED[0]]}},
        ])
        world.run(100)
        world.dispatcher.publish("m", msg(world), ChannelClass.MARKETPLACE)
        world.run(200)
        return world

    def test_foreign_spec_facet(self, make_config):
        """Фасет спецификации, подписанный не создателем, отклоняется"""
        world = self.deliver(make_config, lambda w: self.forge(w))
        b = world.managers["b"]
        assert b.rejected_unauthorized == 1
        assert ElementId("a:77") not in b.registry

    def test_author_claim_with_foreign_signature(self, make_config):
        """Заявленный автор a при подписи m отклоняется"""
        world = self.deliver(make_config, lambda w: self.forge(w, author_override="a"))
        assert world.managers["b"].rejected_unauthorized == 1
        assert ElementId("a:77") not in world.managers["b"].registry

    def test_spoofed_signer(self, make_config):
        """Подпись m, выданная за подпись a, не проходит проверку"""
        world = self.deliver(make_config, lambda w: self.forge(
            w, author_override="a", signature_override=lambda f: Signature("a", f.signature.digest),
        ))
        assert world.managers["b"].rejected_unauthorized == 1

    def test_genuine_accepted(self, make_config):
        world = market(make_config)
        world.run(HOUR)
        assert world.managers["b"].rejected_unauthorized == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_random_tamper_corpus(self, make_config, seed):
        """Смесь подлинных и подделанных сервисов: отклоняются ровно подделки"""
        rng = np.random.default_rng(seed)
        world = market(make_config, extra_nodes=[{"node_id": "m"}], script=[
            {"at": 10, "node": "b", "command": "subscribe", "args": {"constraints": [TRADE_FEED[0]]}},
        ])
        world.run(100)
        a_key, m_key = world.managers["a"].key, world.managers["m"].key
        kinds = ("genuine", "foreign", "claimed", "spoofed", "content", "wrong_service")
        corpus = {}
        for i in range(30):
            kind = kinds[int(rng.integers(len(kinds)))]
            service_id = ElementId(f"a:{500 + i}")
            key = m_key if kind in ("foreign", "claimed", "spoofed") else a_key
            facet_ref = ElementId("a:999") if kind == "wrong_service" else service_id
            facet = Facet.create(
                key, IdGenerator(key.node_id, start=1000 + 10 * i), FacetKind.SPECIFICATION,
                WSDL, build_wsdl("quotes", ["getLastTrade"]), facet_ref,
            )
            if kind in ("claimed", "spoofed"):
                facet = replace(facet, author="a")
            if kind == "spoofed":
                facet = replace(facet, signature=Signature("a", facet.signature.digest))
            if kind == "content":
                facet = replace(facet, content=FacetXML(facet.id, WSDL, build_wsdl("quotes", ["getLastTrade", "sell"])))
            corpus[service_id] = kind
            world.dispatcher.publish("m", ServiceMessage(
                service_id=service_id, name="quotes", creator="a", allow_add_info=False,
                facets=(encode_facet(facet),), lease_duration=WEEK, renew_period=DAY,
            ), ChannelClass.MARKETPLACE)
        world.run(200)
        b = world.managers["b"]
        tampered = [sid for sid, kind in corpus.items() if kind != "genuine"]
        assert b.rejected_unauthorized == len(tampered)
        for service_id, kind in corpus.items():
            assert (service_id in b.registry) == (kind == "genuine")


class TestAddInfo:
    """Дополнительные фасеты"""

    SCRIPT = [
        {"at": 100, "node": "c", "command": "subscribe_add_info", "args": {
            "service": "quotes", "schema": "SoapTest", "expr": "/SoapTest[count(testcase) > 10]"}},
        {"at": 120, "node": "b", "command": "share_add_info", "args": {
            "service": "quotes", "testcases": 11, "completeness": 0.9, "name": "report"}},
    ]

    def test_add_info_delivered(self, make_config):
        """Дополнительный фасет доходит до подписчика; сервиса у него нет"""
        world = market(make_config, script=self.SCRIPT)
        world.run(HOUR)
        c = world.managers["c"]
        quotes = world.elements["quotes"]
        assert [f.id for f in c.registry.add_info_for(quotes)] == [world.elements["report"]]
        assert c.get_stats()["orphan_add_info"] == 1
        assert world.command_errors == []

    def test_below_threshold_not_delivered(self, make_config):
        script = [dict(self.SCRIPT[0]), dict(self.SCRIPT[1], args=dict(self.SCRIPT[1]["args"], testcases=10))]
        world = market(make_config, script=script)
        world.run(HOUR)
        assert world.managers["c"].registry.add_info_facets() == []

    def test_linked_on_read(self, make_config):
        """Сервис и полученный отдельно фасет связываются при чтении из реестра"""
        world = market(make_config, script=[
            {"at": 5, "node": "c", "command": "subscribe", "args": {"service": "quotes"}},
            {"at": 5, "node": "c", "command": "subscribe_add_info", "args": {
                "service": "quotes", "expr": "/SoapTest/completeness > 0.5"}},
            {"at": "1h", "node": "b", "command": "share_add_info", "args": {"service": "quotes", "testcases": 3}},
        ])
        world.run(2 * HOUR)
        c = world.managers["c"]
        entry = c.registry.get(world.elements["quotes"])
        assert len(entry.add_info_facets) == 1
        assert entry.add_info_facets[0].author == "b"
        assert c.get_stats()["orphan_add_info"] == 0

    def test_forbidden(self, make_config):
        """Сервис без allow_add_info не принимает дополнительные фасеты"""
        world = market(make_config, allow_add_info=False, script=self.SCRIPT)
        world.run(HOUR)
        assert len(world.command_errors) == 1
        assert "AddInfoForbidden" in world.command_errors[0]["error"]

    def test_forbidden_over_network(self, make_config):
        """Полученный по сети фасет к сервису без allow_add_info отклоняется держателем сервиса"""
        world = market(make_config, allow_add_info=False, script=[
            {"at": 5, "node": "c", "command": "subscribe", "args": {"service": "quotes"}},
            {"at": 5, "node": "c", "command": "subscribe_add_info", "args": {
                "service": "quotes", "expr": "/SoapTest[count(testcase) > 10]"}},
        ])
        world.run(HOUR)
        quotes = world.elements["quotes"]
        c = world.managers["c"]
        assert quotes in c.registry
        facet = Facet.create(
            world.managers["b"].key, IdGenerator("b", start=900), FacetKind.ADDITIONAL_INFO,
            SOAP_TEST, build_soap_test(11, 0.9), quotes,
        )
        world.dispatcher.publish("b", AddInfoMessage.from_facet(facet, WEEK, DAY), ChannelClass.MARKETPLACE)
        world.run(2 * HOUR)
        assert c.rejected_unauthorized == 1
        assert c.registry.add_info_for(quotes) == []
        assert facet.id not in c.registry

    def test_withdraw_add_info(self, make_config):
        world = market(make_config, script=self.SCRIPT)
        world.run(HOUR)
        b = world.managers["b"]
        assert b.withdraw_add_info(world.elements["report"])
        assert world.elements["report"] not in b.shared
        with pytest.raises(UnknownFacet):
            b.withdraw_add_info(world.elements["quotes"])


class TestManagerErrors:
    """Ошибки интерфейса управления"""

    def setup_method(self):
        self.world = World(SimConfig.from_dict({"nodes": [{"node_id": "a"}, {"node_id": "b"}]})).setup()
        self.a = self.world.managers["a"]
        self.b = self.world.managers["b"]
        self.entry = self.a.create_service("quotes", [(WSDL, build_wsdl("quotes", ["getQuote"]))])

    def test_share_unknown(self):
        with pytest.raises(UnknownService):
            self.a.share_service(ElementId("a:999"))

    def test_spec_facet_by_non_creator(self):
        """Чужой сервис нельзя дополнять фасетами спецификации"""
        self.b.registry.put(self.entry)
        with pytest.raises(NotCreator):
            self.b.add_spec_facet(self.entry.id, QOS, build_qos(10))

    def test_add_spec_facet(self):
        updated = self.a.add_spec_facet(self.entry.id, QOS, build_qos(10))
        assert [f.schema_id for f in updated.spec_facets] == ["WSDL", "QoS"]

    def test_share_twice_is_idempotent(self):
        self.a.share_service(self.entry.id)
        self.a.share_service(self.entry.id)
        assert self.a.shared == {self.entry.id}
        assert self.a.withdraw(self.entry.id)
        assert not self.a.withdraw(self.entry.id)

    def test_federation_errors(self):
        info = self.a.create_federation("F", FederationStyle.PS)
        with pytest.raises(AlreadyJoined):
            self.a.join_federation(info=info)
        with pytest.raises(NotAMember):
            self.b.promote(info.fed_id, self.entry.id)
        with pytest.raises(NotAMember):
            self.b.leave_federation(info.fed_id)
        self.b.join_federation(info=info)
        with pytest.raises(NotManager):
            self.b.dismiss_federation(info.fed_id)
        with pytest.raises(UnknownFederation):
            self.b.dismiss_federation(ElementId("x:1"))


class TestFederationLifecycle:
    """Вступление, продвижение, отзыв, выход и роспуск"""

    def lifecycle(self, make_config, style, script=()):
        data = {
            "name": "lifecycle",
            "duration": "2D",
            "gossip": {"resubscription_period": "365D"},
            "nodes": [
                {"node_id": "m", "services": [{"name": "svc", "operations": ["op"]}]},
                {"node_id": "x"},
                {"node_id": "y"},
            ],
            "script": [
                {"at": 0, "node": "m", "command": "create_federation", "args": {"name": "F", "style": style}},
                {"at": 5, "node": "x", "command": "join", "args": {"federation": "F"}},
                {"at": 6, "node": "y", "command": "join", "args": {"federation": "F"}},
                {"at": 300, "node": "m", "command": "promote", "args": {"federation": "F", "service": "svc"}},
            ] + list(script),
        }
        return World(make_config(**data)).setup()

    @pytest.mark.parametrize("style", ["ps", "psr", "gossip"])
    def test_promotion_reaches_members(self, make_config, style):
        world = self.lifecycle(make_config, style)
        world.run(HOUR)
        svc = world.elements["svc"]
        state = world.federation_state("F")
        assert set(state) == {"m", "x", "y"}
        assert all(elements == {svc} for elements in state.values())
        assert svc in world.managers["x"].registry

    @pytest.mark.parametrize("style", ["ps", "psr", "gossip"])
    def test_retraction(self, make_config, style):
        world = self.lifecycle(make_config, style, script=[
            {"at": 1800, "node": "m", "command": "retract", "args": {"federation": "F", "service": "svc"}},
        ])
        world.run(HOUR)
        assert len(world.federation_state("F")) == 3
        assert all(elements == frozenset() for elements in world.federation_state("F").values())
        assert world.elements["svc"] not in world.managers["y"].registry
        assert world.elements["svc"] in world.managers["m"].registry

    @pytest.mark.parametrize("style", ["ps", "psr", "gossip"])
    def test_leave_drops_elements(self, make_config, style):
        """Вышедший член теряет элементы, полученные только через федерацию"""
        world = self.lifecycle(make_config, style, script=[
            {"at": 1800, "node": "x", "command": "leave", "args": {"federation": "F"}},
        ])
        world.run(HOUR)
        assert "x" not in world.federation_state("F")
        assert world.elements["svc"] not in world.managers["x"].registry
        assert world.elements["svc"] in world.managers["y"].registry

    @pytest.mark.parametrize("style", ["ps", "psr", "gossip"])
    def test_dismiss(self, make_config, style):
        """После роспуска в федерации не остаётся членов"""
        world = self.lifecycle(make_config, style, script=[
            {"at": 1800, "node": "m", "command": "dismiss", "args": {"federation": "F"}},
        ])
        world.run(2 * HOUR)
        fed_id = world.federations["F"].fed_id
        assert world.ledger.members(fed_id) == []
        assert all(world.managers[n].membership(fed_id) is None for n in ("m", "x", "y"))

    def test_psr_late_member_catches_up(self, make_config):
        """Поздний член PSR получает ранее продвинутые элементы ответами"""
        world = self.lifecycle(make_config, "psr")
        world.run(HOUR)
        fed_id = world.federations["F"].fed_id
        x = world.managers["x"]
        x.leave_federation(fed_id)
        assert world.elements["svc"] not in x.registry
        x.join_federation(info=world.federations["F"])
        world.run(2 * HOUR)
        assert world.elements["svc"] in x.registry
        assert x.membership(fed_id).style.catchup_complete

    def test_ps_late_member_waits_for_renewal(self, make_config):
        """Поздний член PS получает элемент только на следующем продлении"""
        world = self.lifecycle(make_config, "ps")
        world.run(HOUR)
        fed_id = world.federations["F"].fed_id
        x = world.managers["x"]
        x.leave_federation(fed_id)
        x.join_federation(info=world.federations["F"])
        world.run(2 * HOUR)
        assert world.elements["svc"] not in x.registry
        world.run(DAY + HOUR)
        assert world.elements["svc"] in x.registry
