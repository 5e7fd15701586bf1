"""
Проверки прогона по аналитическим моделям и статистике нагрузки
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from components.delivery_manager import NodeState
from config import ACTION_KINDS, WorkloadSpec
from core.federation_info import FederationInfo, FederationStyle
from core.service_model import ElementId
from network.simulator import RandomStream
from sim.workload import WorkloadGenerator
from styles.traffic import GOSSIP_TOLERANCES, TrafficModel, expected_maintenance, expected_traffic, within

logger = logging.getLogger(__name__)

# Критическое значение χ² для 7 степеней свободы при α = 0.01
CHI2_CRITICAL_DF7 = 18.48

# PS/PSR сравниваются с формулой точно
EXACT_TOLERANCE = 1e-9


def _model_from_row(row: Dict) -> TrafficModel:
    return TrafficModel(
        promotions=int(row["promotions"]),
        members=int(row["members"]),
        duration=float(row["duration"]),
        renew_period=float(row["renew_period"]),
        heartbeat_period=float(row["heartbeat_period"]),
        resubscription_period=float(row["resubscription_period"]),
        c=int(row["c"]),
    )


def check_formulas(federations: pd.DataFrame, models: pd.DataFrame) -> pd.DataFrame:
    """
    Сравнить измеренный трафик федераций с формулами

    Args:
        federations: Таблица federations отчёта
        models: Таблица models отчёта (параметры формул)

    Returns:
        DataFrame [federation, style, metric, measured, expected, tolerance, passed]
    """
    rows = []
    measured_by_name = federations.set_index("name") if not federations.empty else pd.DataFrame()
    for _, model_row in models.iterrows():
        name = model_row["federation"]
        style = FederationStyle.parse(model_row["style"])
        log_base = str(model_row.get("log_base", "e"))
        model = _model_from_row(model_row)
        if name not in measured_by_name.index:
            logger.warning(f"Федерация {name} отсутствует в таблице federations")
            continue
        measured = measured_by_name.loc[name]
        checks = []
        if style is FederationStyle.GOSSIP:
            checks.append(("promotion", measured["messages"], expected_traffic(model, style, log_base)))
            for kind in ("heartbeat", "resubscription"):
                checks.append((kind, measured[f"{kind}_messages"], expected_maintenance(model, kind, log_base)))
        else:
            checks.append(("promotion", measured["messages"], expected_traffic(model, style)))
        for metric, value, expected in checks:
            tolerance = GOSSIP_TOLERANCES[metric] if style is FederationStyle.GOSSIP else EXACT_TOLERANCE
            rows.append({
                "federation": name,
                "style": style.value,
                "metric": metric,
                "measured": float(value),
                "expected": float(expected),
                "tolerance": tolerance,
                "passed": within(float(value), float(expected), tolerance),
            })
    columns = ["federation", "style", "metric", "measured", "expected", "tolerance", "passed"]
    result = pd.DataFrame(rows, columns=columns)
    failed = result[~result["passed"]] if not result.empty else result
    for _, row in failed.iterrows():
        logger.warning(
            f"{row['federation']} ({row['style']}) {row['metric']}: "
            f"измерено {row['measured']:.1f}, ожидалось {row['expected']:.1f}"
        )
    return result


def _saturated_state() -> Tuple[NodeState, Tuple[FederationInfo, ...]]:
    """Состояние, в котором допустимы все виды действий"""
    joined = ElementId("m:1")
    spare = FederationInfo(ElementId("m:2"), "spare", FederationStyle.PS, (("topic", "spare"),), "m")
    state = NodeState(
        node_id="sample",
        role="full",
        own_services=[ElementId("sample:1")],
        own_add_info=[ElementId("sample:2")],
        held_services=[ElementId("peer:1")],
        add_info_targets=[ElementId("peer:1")],
        shared=set(),
        joined=[joined],
        interests=0,
    )
    return state, (spare,)


def action_chi_square(
    spec: Optional[WorkloadSpec] = None, seed: int = 0, draws: int = 100000
) -> Tuple[float, pd.DataFrame]:
    """
    χ²-статистика частот действий генератора против весов WorkloadSpec

    Args:
        spec: Параметры нагрузки
        seed: Seed генератора
        draws: Число розыгрышей

    Returns:
        (статистика, DataFrame [action, observed, expected])
    """
    spec = spec or WorkloadSpec()
    generator = WorkloadGenerator(spec)
    rng = RandomStream(np.random.default_rng(seed))
    state, federations = _saturated_state()
    observed = {kind: 0 for kind in ACTION_KINDS}
    for _ in range(draws):
        observed[generator.draw_kind(rng, state, federations)] += 1
    total_weight = sum(spec.weights.get(k, 0.0) for k in ACTION_KINDS)
    table = pd.DataFrame(
        {
            "action": list(ACTION_KINDS),
            "observed": [observed[k] for k in ACTION_KINDS],
            "expected": [draws * spec.weights.get(k, 0.0) / total_weight for k in ACTION_KINDS],
        }
    )
    nonzero = table[table["expected"] > 0]
    statistic = float((((nonzero["observed"] - nonzero["expected"]) ** 2) / nonzero["expected"]).sum())
    return statistic, table
