"""
Тесты командной строки и сквозного финансового сценария

Запуск:
    pytest tests/test_app.py
"""
import sys
import os
import json

import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from config import load_config
from sim.runner import run_world

SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")

SMALL = {
    "name": "small",
    "seed": 3,
    "duration": "1D",
    "node_groups": [{"prefix": "e", "count": 3}],
    "federations": [{
        "name": "F", "style": "ps", "manager": "e1", "members": ["e*"],
        "promotions": 2, "promote_start": "1h", "promote_end": "2h",
    }],
}


def write_scenario(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestCommands:
    """Команды dire-sim и коды возврата"""

    def test_run(self, tmp_path, capsys):
        out = tmp_path / "report"
        code = main(["-q", "run", "--config", write_scenario(tmp_path, SMALL), "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "summary.json").exists()
        assert (out / "federations.csv").exists()
        assert "Сценарий: small (seed=3)" in capsys.readouterr().out

    def test_seed_override(self, tmp_path):
        out = tmp_path / "report"
        main(["-q", "run", "--config", write_scenario(tmp_path, SMALL), "--seed", "11", "--out", str(out)])
        with open(out / "summary.json", encoding="utf-8") as f:
            assert json.load(f)["seed"] == 11

    def test_check_without_models(self, tmp_path, capsys):
        """Отчёт без федераций с oracle=true проверять нечего"""
        out = tmp_path / "report"
        main(["-q", "run", "--config", write_scenario(tmp_path, SMALL), "--out", str(out)])
        capsys.readouterr()
        assert main(["-q", "check", "--report", str(out)]) == EXIT_OK
        assert "нет федераций" in capsys.readouterr().out

    def test_check_formulas(self, tmp_path):
        out = tmp_path / "report"
        assert main(["-q", "run", "--config", os.path.join(SCENARIOS, "ps_formula.json"), "--out", str(out)]) == 0
        assert main(["-q", "check", "--report", str(out)]) == EXIT_OK
        formulas = pd.read_csv(out / "formulas.csv")
        assert formulas["passed"].all()

    def test_check_detects_mismatch(self, tmp_path):
        """Искажённый трафик не проходит проверку"""
        out = tmp_path / "report"
        main(["-q", "run", "--config", os.path.join(SCENARIOS, "ps_formula.json"), "--out", str(out)])
        federations = pd.read_csv(out / "federations.csv")
        federations["messages"] = federations["messages"] * 2
        federations.to_csv(out / "federations.csv", index=False)
        assert main(["-q", "check", "--report", str(out)]) == EXIT_CHECK_FAILED

    def test_invalid_config(self, tmp_path, capsys):
        path = write_scenario(tmp_path, dict(SMALL, duration=0, colour="red"))
        assert main(["-q", "run", "--config", path, "--out", str(tmp_path / "r")]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "duration" in err
        assert "colour: неизвестное поле" in err

    def test_missing_config(self, tmp_path):
        code = main(["-q", "run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "r")])
        assert code == EXIT_IO

    def test_missing_report(self, tmp_path):
        assert main(["-q", "check", "--report", str(tmp_path / "none")]) == EXIT_IO

    def test_workload_stats(self, tmp_path, capsys):
        path = write_scenario(tmp_path, SMALL)
        assert main(["-q", "workload-stats", "--config", path, "--pairs", "2000", "--draws", "5000"]) == EXIT_OK
        output = capsys.readouterr().out
        assert "Вероятность совпадения интереса" in output
        assert "χ²" in output

    def test_compare(self, tmp_path):
        out = tmp_path / "cmp"
        assert main(["-q", "compare", "--config", write_scenario(tmp_path, SMALL), "--out", str(out)]) == EXIT_OK
        table = pd.read_csv(out / "comparison.csv")
        assert list(table["style"]) == ["ps", "psr", "gossip"]

    def test_command_required(self):
        with pytest.raises(SystemExit):
            main([])


@pytest.mark.integration
class TestFinancialScenario:
    """Центральный банк, банки и информационный брокер"""

    @pytest.fixture(scope="class")
    def financial(self):
        return run_world(load_config(os.path.join(SCENARIOS, "financial.json")))

    def test_no_errors(self, financial):
        world, report = financial
        assert world.command_errors == []
        assert report.summary["rejected_unauthorized"] == 0

    def test_trade_feed(self, financial):
        """bank_a получает InformationBroker по интересу trade-feed"""
        world, _ = financial
        service = world.elements["InformationBroker"]
        assert service in world.managers["bank_a"].registry
        assert service not in world.managers["bank_b"].registry

    def test_add_info_delivered(self, financial):
        """Фасет с 11 тест-кейсами доходит до bank_c"""
        world, _ = financial
        assert world.managers["bank_c"].get_stats()["orphan_add_info"] == 1

    @pytest.mark.parametrize("name", ["PrimaryMarket", "CommercialBank"])
    def test_federation_state(self, financial, name):
        world, _ = financial
        expected = world.expected_elements(name)
        assert len(expected) == 1
        for node, elements in world.federation_state(name).items():
            assert elements == expected, node

    def test_dismissed_federation(self, financial):
        world, _ = financial
        assert world.ledger.members(world.federations["SecondaryMarket"].fed_id) == []
