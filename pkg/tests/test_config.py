"""
Тесты загрузки и проверки конфигурации сценария

Запуск:
    pytest tests/test_config.py
"""
import sys
import os
import json

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import DAY, HOUR, MINUTE, WEEK, NodeGroup, SimConfig, expand_members, load_config, parse_duration
from core.errors import ConfigInvalid, IoFailure

SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")


def diagnostics_of(data):
    with pytest.raises(ConfigInvalid) as exc_info:
        SimConfig.from_dict(data)
    return dict(exc_info.value.diagnostics)


class TestParseDuration:
    """Длительности: секунды или строки pandas"""

    def test_numbers(self):
        assert parse_duration(30) == 30.0
        assert parse_duration(1.5) == 1.5

    def test_strings(self):
        assert parse_duration("5min") == 5 * MINUTE
        assert parse_duration("20h") == 20 * HOUR
        assert parse_duration("7D") == WEEK

    @pytest.mark.parametrize("value", [True, "soon", None, [1]])
    def test_invalid(self, value):
        with pytest.raises(ValueError):
            parse_duration(value)


class TestSimConfig:
    """Построение конфигурации из словаря"""

    def test_defaults(self):
        config = SimConfig.from_dict({})
        assert config.duration == DAY
        assert config.lease.duration == WEEK
        assert config.lease.renew_period == DAY
        assert config.directory.discovery_timeout == 10.0
        assert config.gossip.c == 2
        assert config.topology.kind == "star"
        assert config.nodes == []

    def test_nested_durations(self):
        config = SimConfig.from_dict({
            "duration": "10D",
            "lease": {"renew_period": "12h"},
            "gossip": {"exchange_period": 30},
            "network": {"outages": [{"a": "b-a", "b": "hub", "start": "1D", "end": "2D"}]},
        })
        assert config.duration == 10 * DAY
        assert config.lease.renew_period == 12 * HOUR
        assert config.gossip.exchange_period == 30.0
        assert config.network.outages[0].end == 2 * DAY

    def test_node_groups(self):
        """Группы раскрываются в узлы после явно заданных"""
        config = SimConfig.from_dict({
            "nodes": [{"node_id": "a"}],
            "node_groups": [{"prefix": "g", "count": 12, "role": "tiny"}],
        })
        ids = config.node_ids()
        assert ids[:3] == ["a", "g01", "g02"]
        assert ids[-1] == "g12"
        assert config.nodes[-1].role == "tiny"

    def test_group_ids_width(self):
        assert NodeGroup("n", 5).node_ids() == ["n1", "n2", "n3", "n4", "n5"]
        assert NodeGroup("g", 500).node_ids()[0] == "g001"
        assert NodeGroup("g", 0).node_ids() == []

    def test_expand_members(self):
        ids = ["a", "g1", "g2", "h1"]
        assert expand_members(["g*", "a", "g1"], ids) == ["g1", "g2", "a"]
        assert expand_members(["zz", "x*"], ids) == []


class TestDiagnostics:
    """Все ошибки конфигурации собираются в одно исключение"""

    def test_unknown_field(self):
        found = diagnostics_of({"nodes": [{"node_id": "a", "colour": "red"}]})
        assert found == {"nodes[0].colour": "неизвестное поле"}

    def test_bool_is_not_int(self):
        found = diagnostics_of({"seed": True})
        assert "seed" in found

    def test_bad_duration(self):
        found = diagnostics_of({"lease": {"duration": "forever"}})
        assert "lease.duration" in found

    def test_collects_all(self):
        found = diagnostics_of({"duration": 0, "log_base": "3", "network": {"loss_rate": 2}})
        assert {"duration", "log_base", "network.loss_rate"} <= set(found)

    def test_renew_longer_than_lease(self):
        found = diagnostics_of({"lease": {"duration": "1D", "renew_period": "2D"}})
        assert "lease.renew_period" in found

    def test_federation_references(self):
        found = diagnostics_of({
            "nodes": [{"node_id": "a"}],
            "federations": [{"name": "F", "style": "flood", "manager": "q", "members": ["x*"]}],
        })
        assert {"federations[0].style", "federations[0].manager", "federations[0].members"} <= set(found)

    def test_duplicate_nodes(self):
        found = diagnostics_of({"nodes": [{"node_id": "a"}, {"node_id": "a"}]})
        assert found["nodes[1].node_id"] == "повтор id a"

    def test_script_node(self):
        found = diagnostics_of({
            "nodes": [{"node_id": "a"}],
            "script": [{"at": 5, "node": "b", "command": "share"}],
        })
        assert "script[0].node" in found

    def test_workload_weights(self):
        found = diagnostics_of({"workload": {"weights": {"share": 1.0, "subscribe": 0.5}}})
        assert "workload.weights" in found
        found = diagnostics_of({"workload": {"weights": {"share": 0.5, "fly": 0.5}}})
        assert "неизвестные действия" in found["workload.weights"]

    def test_message_lists_paths(self):
        with pytest.raises(ConfigInvalid) as exc_info:
            SimConfig.from_dict({"duration": -1})
        assert "duration: должна быть положительной" in str(exc_info.value)


class TestLoadConfig:
    """Чтение сценариев из файлов"""

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            load_config(str(tmp_path / "missing.json"))

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ nodes: ", encoding="utf-8")
        with pytest.raises(ConfigInvalid) as exc_info:
            load_config(str(path))
        assert exc_info.value.diagnostics[0][0] == "<file>"

    def test_topology_file(self, tmp_path):
        """Файл топологии ищется рядом со сценарием"""
        (tmp_path / "topo.json").write_text(
            json.dumps({"links": [["b1", "b2"]], "attachments": {"a": "b1"}}), encoding="utf-8"
        )
        (tmp_path / "scenario.json").write_text(
            json.dumps({"nodes": [{"node_id": "a"}], "topology": {"file": "topo.json"}}), encoding="utf-8"
        )
        config = load_config(str(tmp_path / "scenario.json"))
        assert config.topology.kind == "explicit"
        assert config.topology.links == [["b1", "b2"]]
        assert config.topology.attachments == {"a": "b1"}

    def test_missing_topology_file(self, tmp_path):
        (tmp_path / "scenario.json").write_text(json.dumps({"topology": {"file": "nope.json"}}), encoding="utf-8")
        with pytest.raises(ConfigInvalid) as exc_info:
            load_config(str(tmp_path / "scenario.json"))
        assert exc_info.value.diagnostics[0][0] == "topology.file"

    @pytest.mark.parametrize("name", sorted(os.listdir(SCENARIOS)))
    def test_bundled_scenarios(self, name):
        config = load_config(os.path.join(SCENARIOS, name))
        assert config.name
        assert config.nodes
