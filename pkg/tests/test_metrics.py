"""
Тесты метрик прогона, записи отчётов и форматтеров

Запуск:
    pytest tests/test_metrics.py
"""
import sys
import os
import json
import math

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.errors import IoFailure
from core.facet_query import MATCH_KINDS
from export import JSONFormatter, TextFormatter, emit_report, emit_table, get_formatter, load_report
from sim.metrics import FEDERATION_COLUMNS, NODE_COLUMNS, TABLES, fit_hops, hop_histogram
from sim.runner import run_world

TRADE_FEED = [["WSDL", "//operation[@name='getLastTrade']"]]


def market_config(make_config, seed=1):
    return make_config(
        name="metrics",
        seed=seed,
        duration="2h",
        nodes=[
            {"node_id": "a", "services": [{"name": "quotes", "operations": ["getLastTrade"], "qos_worst_ms": 80}]},
            {"node_id": "b"},
            {"node_id": "c"},
        ],
        script=[
            {"at": 10, "node": "b", "command": "subscribe", "args": {"constraints": TRADE_FEED}},
            {"at": 20, "node": "a", "command": "share", "args": {"service": "quotes"}},
        ],
    )


@pytest.fixture
def market_report(make_config):
    return run_world(market_config(make_config))[1]


class TestHopHistogram:
    """Гистограмма переходов и её аппроксимация"""

    def test_counts_and_reached(self):
        df = hop_histogram([0, 0, 1, 3])
        assert df["hops"].tolist() == [0, 1, 2, 3]
        assert df["messages"].tolist() == [2, 1, 0, 1]
        assert df["reached"].tolist() == [4, 2, 1, 1]

    def test_empty(self):
        df = hop_histogram([])
        assert list(df.columns) == ["hops", "messages", "reached"]
        assert df.empty

    def test_fit_needs_two_points(self):
        assert fit_hops(hop_histogram([1, 1])) is not None
        assert fit_hops(hop_histogram([0])) is None

    def test_exact_log_fit(self):
        hops = np.arange(5)
        df = pd.DataFrame({"hops": hops, "messages": 5.0 + 3.0 * np.log(hops + 1.0)})
        fit = fit_hops(df)
        assert fit.slope == pytest.approx(3.0)
        assert fit.intercept == pytest.approx(5.0)
        assert fit.r2 == pytest.approx(1.0)


class TestCollectMetrics:
    """Отчёт по выполненному прогону"""

    def test_tables(self, market_report):
        assert set(market_report.tables) == set(TABLES)
        assert list(market_report.nodes.columns) == NODE_COLUMNS
        assert list(market_report.federations.columns) == FEDERATION_COLUMNS
        assert market_report.federations.empty

    def test_star_hops(self, market_report):
        """Публикация a -> b через центральный брокер: два перехода"""
        assert market_report.summary["messages"] == 1
        assert market_report.summary["zero_hop_share"] == 0.0
        assert market_report.hops["messages"].tolist() == [0, 0, 1]
        assert market_report.messages.iloc[0]["reached"] == 1

    def test_node_stats(self, market_report):
        nodes = market_report.nodes.set_index("node_id")
        assert nodes.loc["b", "received"] == 1
        assert nodes.loc["c", "received"] == 0
        assert nodes.loc["a", "shared"] == 1

    def test_channel_conservation(self, market_report):
        for _, row in market_report.channels.iterrows():
            assert row["sends"] == row["delivered"] + row["lost"] + row["discarded"]

    def test_matching(self, market_report):
        matching = market_report.matching.set_index("kind")
        assert list(matching.index) == list(MATCH_KINDS)
        assert matching.loc["service", "positive"] >= 1
        assert market_report.summary["parses"] >= 1

    def test_fingerprint(self, make_config, market_report):
        """Одинаковые конфигурация и seed дают одинаковый отпечаток"""
        again = run_world(market_config(make_config))[1]
        other = run_world(market_config(make_config, seed=2))[1]
        assert again.fingerprint() == market_report.fingerprint()
        assert other.fingerprint() != market_report.fingerprint()

    def test_unknown_federation(self, market_report):
        with pytest.raises(KeyError):
            market_report.federation("missing")


class TestReportFiles:
    """Запись и чтение отчёта"""

    def test_emit_and_load(self, market_report, tmp_path):
        written = emit_report(market_report, str(tmp_path))
        assert len(written) == len(TABLES) + 1
        with open(tmp_path / "summary.json", encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["fingerprint"] == market_report.fingerprint()
        loaded = load_report(str(tmp_path))
        assert loaded.name == "metrics"
        assert loaded.summary == market_report.summary
        assert len(loaded.nodes) == 3

    def test_empty_tables_keep_header(self, make_config, tmp_path):
        """Пустые таблицы записываются с заголовком"""
        _, report = run_world(make_config(name="idle", duration="1h", nodes=[{"node_id": "a"}]))
        emit_report(report, str(tmp_path))
        with open(tmp_path / "federations.csv", encoding="utf-8") as f:
            assert f.readline().strip() == ",".join(FEDERATION_COLUMNS)
        loaded = load_report(str(tmp_path))
        assert list(loaded.federations.columns) == FEDERATION_COLUMNS
        assert loaded.federations.empty

    def test_missing_summary(self, tmp_path):
        with pytest.raises(IoFailure):
            load_report(str(tmp_path / "nowhere"))

    def test_emit_table(self, tmp_path):
        df = pd.DataFrame({"style": ["ps"], "msg_per_promotion": [1.0 / 3.0]})
        path = emit_table(df, str(tmp_path / "out"), "comparison")
        assert os.path.basename(path) == "comparison.csv"
        with open(path, encoding="utf-8") as f:
            assert f.read().splitlines()[1] == "ps,0.333333"


class TestFormatters:
    """JSON и текстовый форматтеры"""

    def test_factory(self):
        assert isinstance(get_formatter("json"), JSONFormatter)
        assert isinstance(get_formatter("text", max_rows=5), TextFormatter)
        with pytest.raises(ValueError):
            get_formatter("xml")

    def test_json_summary(self, market_report):
        result = get_formatter("json").format(market_report)
        data = json.loads(result.content)
        assert result.content_type == "json"
        assert data["messages"] == 1
        assert data["fingerprint"] == market_report.fingerprint()

    def test_json_table_nan(self):
        """NaN в таблице выводится как null"""
        df = pd.DataFrame({"style": ["ps", "psr"], "catchup_time": [math.nan, 1.5]})
        data = json.loads(JSONFormatter(pretty=False).format_table(df, "cmp").content)
        assert data["title"] == "cmp"
        assert data["rows"][0]["catchup_time"] is None
        assert data["rows"][1]["catchup_time"] == 1.5

    def test_text_summary(self, market_report):
        content = TextFormatter().format(market_report).content
        assert "Сценарий: metrics (seed=1)" in content
        assert "Федерации: нет данных" in content
        assert f"Отпечаток: {market_report.fingerprint()[:16]}" in content

    def test_text_table_truncated(self):
        df = pd.DataFrame({"x": range(30)})
        content = TextFormatter(max_rows=10).format_table(df).content
        assert "... ещё 20 строк" in content
