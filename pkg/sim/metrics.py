"""
Метрики прогона: гистограмма переходов, трафик федераций, каналы,
задержки передачи, статистика сопоставления
"""
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from core.facet_query import MATCH_KINDS
from styles.base import MAINTENANCE_KINDS
from styles.gossip import GossipStyle
from styles.traffic import TrafficModel

logger = logging.getLogger(__name__)

PERCENTILES = (50, 90, 99)

# Таблицы отчёта в порядке записи
TABLES = (
    "hops",
    "messages",
    "federations",
    "channels",
    "latency",
    "latency_summary",
    "matching",
    "interests",
    "nodes",
    "models",
    "actions",
)


@dataclass
class HopFit:
    """Аппроксимация messages ≈ a + b·ln(hops + 1)"""
    intercept: float
    slope: float
    r2: float

    def to_dict(self) -> Dict[str, float]:
        return {"hop_fit_intercept": self.intercept, "hop_fit_slope": self.slope, "hop_fit_r2": self.r2}


@dataclass
class MetricsReport:
    """Итог прогона: таблицы pandas и сводка"""
    name: str
    seed: int
    duration: float
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, item: str) -> pd.DataFrame:
        tables = self.__dict__.get("tables", {})
        if item in tables:
            return tables[item]
        raise AttributeError(item)

    def federation(self, name: str) -> Dict[str, Any]:
        """Строка таблицы federations по имени федерации"""
        df = self.tables["federations"]
        rows = df[df["name"] == name]
        if rows.empty:
            raise KeyError(f"Федерация {name!r} отсутствует в отчёте")
        return rows.iloc[0].to_dict()

    def fingerprint(self) -> str:
        """Хеш всех таблиц: одинаковая конфигурация и seed дают одинаковый отпечаток"""
        digest = hashlib.sha256()
        for name in TABLES:
            df = self.tables.get(name)
            if df is None:
                continue
            digest.update(name.encode())
            digest.update(df.to_csv(index=False, float_format="%.9f").encode())
        for key in sorted(self.summary):
            digest.update(f"{key}={self.summary[key]}".encode())
        return digest.hexdigest()


# ---------------------------------------------------------------------------
# Гистограмма переходов
# ---------------------------------------------------------------------------

def hop_histogram(hops: List[int]) -> pd.DataFrame:
    """
    Распределение сообщений по числу межброкерных переходов

    Args:
        hops: Число переходов каждого сообщения

    Returns:
        DataFrame [hops, messages, reached]: messages - сообщений ровно с
        таким числом переходов, reached - сообщений, прошедших не меньше
    """
    if not hops:
        return pd.DataFrame({"hops": pd.Series(dtype=int), "messages": pd.Series(dtype=int),
                             "reached": pd.Series(dtype=int)})
    counts = np.bincount(np.asarray(hops, dtype=int))
    reached = counts[::-1].cumsum()[::-1]
    return pd.DataFrame({"hops": np.arange(len(counts)), "messages": counts, "reached": reached})


def fit_hops(histogram: pd.DataFrame) -> Optional[HopFit]:
    """Логарифмическая аппроксимация гистограммы (нужно не меньше двух точек)"""
    if len(histogram) < 2:
        return None
    x = np.log(histogram["hops"].to_numpy(dtype=float) + 1.0)
    y = histogram["messages"].to_numpy(dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    predicted = intercept + slope * x
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return HopFit(float(intercept), float(slope), r2)


# ---------------------------------------------------------------------------
# Сбор
# ---------------------------------------------------------------------------

def _messages_table(world) -> pd.DataFrame:
    rows = [
        {
            "msg_id": str(t.msg_id),
            "kind": t.kind,
            "channel": t.channel.value,
            "sender": t.sender,
            "published_at": t.published_at,
            "hops": t.hops,
            "hosts": t.hosts,
            "expected": len(t.expected),
            "reached": len(t.recipients),
            "lost": t.lost,
            "discarded": t.discarded,
            "size": t.size,
        }
        for t in world.dispatcher.traces
    ]
    columns = ["msg_id", "kind", "channel", "sender", "published_at", "hops", "hosts",
               "expected", "reached", "lost", "discarded", "size"]
    return pd.DataFrame(rows, columns=columns)


def _latency_table(world) -> pd.DataFrame:
    """Задержка первого получения: receipt - max(продвижение, вступление)"""
    ledger = world.ledger
    rows = []
    for (fed_id, node, element_id), received_at in ledger.receipts.items():
        promoted = ledger.promotions.get((fed_id, element_id))
        if promoted is None:
            continue
        joined_at = ledger.joins.get(fed_id, {}).get(node, 0.0)
        start = max(promoted[1], joined_at)
        counters = ledger.get(fed_id)
        rows.append({
            "fed_id": str(fed_id),
            "federation": counters.name if counters else "",
            "style": counters.style if counters else "",
            "node": node,
            "element_id": str(element_id),
            "latency": max(0.0, received_at - start),
            "catchup": joined_at > promoted[1],
        })
    columns = ["fed_id", "federation", "style", "node", "element_id", "latency", "catchup"]
    return pd.DataFrame(rows, columns=columns)


def _latency_summary(latency: pd.DataFrame) -> pd.DataFrame:
    rows = []
    if not latency.empty:
        for (name, style), group in latency.groupby(["federation", "style"], sort=True):
            values = group["latency"].to_numpy()
            row = {"federation": name, "style": style, "samples": len(values), "mean": float(values.mean())}
            for p in PERCENTILES:
                row[f"p{p}"] = float(np.percentile(values, p))
            catchup = group.loc[group["catchup"], "latency"]
            row["catchup_mean"] = float(catchup.mean()) if len(catchup) else float("nan")
            rows.append(row)
    columns = ["federation", "style", "samples", "mean"] + [f"p{p}" for p in PERCENTILES] + ["catchup_mean"]
    return pd.DataFrame(rows, columns=columns)


def _delivery_rate(world, fed_id) -> float:
    """Доля (член, элемент), получивших продвинутый и не отозванный элемент"""
    ledger = world.ledger
    members = ledger.members(fed_id)
    expected = 0
    reached = 0
    for (fid, element_id), (promoter, _) in ledger.promotions.items():
        if fid != fed_id or (fid, element_id) in ledger.retracted:
            continue
        for node in members:
            if node == promoter:
                continue
            expected += 1
            if (fed_id, node, element_id) in ledger.receipts:
                reached += 1
    return reached / expected if expected else 1.0


def _mean_view(world, fed_id) -> float:
    sizes = []
    for node in world.ledger.members(fed_id):
        membership = world.managers[node].membership(fed_id)
        if membership is not None and isinstance(membership.style, GossipStyle):
            sizes.append(len(membership.style.view))
    return float(np.mean(sizes)) if sizes else float("nan")


FEDERATION_COLUMNS = (
    ["fed_id", "name", "style", "events", "messages", "msg_per_event", "control_messages",
     "retractions", "duplicates"]
    + [f"{kind}_messages" for kind in MAINTENANCE_KINDS]
    + ["members", "delivery_rate", "mean_view", "mean_latency", "catchup_time"]
)


def _federations_table(world, latency_summary: pd.DataFrame) -> pd.DataFrame:
    by_name = latency_summary.set_index("federation") if not latency_summary.empty else None
    rows = []
    for counters in world.ledger.values():
        row = counters.to_dict()
        members = world.ledger.members(counters.fed_id)
        row["members"] = len(members)
        row["delivery_rate"] = _delivery_rate(world, counters.fed_id)
        row["mean_view"] = _mean_view(world, counters.fed_id)
        if by_name is not None and counters.name in by_name.index:
            row["mean_latency"] = float(by_name.loc[counters.name, "mean"])
            row["catchup_time"] = float(by_name.loc[counters.name, "catchup_mean"])
        else:
            row["mean_latency"] = float("nan")
            row["catchup_time"] = float("nan")
        rows.append(row)
    return pd.DataFrame(rows, columns=FEDERATION_COLUMNS)


def _channels_table(world) -> pd.DataFrame:
    rows = [{"channel": name, **values} for name, values in world.network.totals().items()]
    return pd.DataFrame(rows)


def _matching_tables(world):
    stats = world.dispatcher.stats
    rows = []
    for kind in MATCH_KINDS:
        positive, negative = stats.outcomes[kind]
        evaluations = positive + negative
        conjuncts = stats.conjuncts_by_kind[kind]
        rows.append({
            "kind": kind,
            "positive": positive,
            "negative": negative,
            "evaluations": evaluations,
            "positive_share": positive / evaluations if evaluations else 0.0,
            "conjuncts": conjuncts,
            "conjuncts_per_evaluation": conjuncts / evaluations if evaluations else 0.0,
        })
    matching = pd.DataFrame(rows)
    interests = pd.DataFrame(
        [
            {"interest": key, "positive": v[0], "negative": v[1], "conjuncts": v[2]}
            for key, v in sorted(stats.per_interest.items())
        ],
        columns=["interest", "positive", "negative", "conjuncts"],
    )
    return matching, interests


NODE_COLUMNS = [
    "node_id", "role", "received", "rejected_unauthorized", "errors", "shared", "interests",
    "federations", "holdings", "services", "add_info_facets", "orphan_add_info", "tombstones",
    "entries", "requests",
]


def _nodes_table(world) -> pd.DataFrame:
    rows = [dm.get_stats() for dm in world.managers.values()]
    for node_id, directory in world.directories.items():
        rows.append({"node_id": node_id, "role": "directory", **directory.get_stats()})
    return pd.DataFrame(rows, columns=NODE_COLUMNS)


def traffic_models(world) -> Dict[str, TrafficModel]:
    """Параметры формул для сценарных федераций с oracle=true"""
    config = world.config
    models = {}
    for name, fed in world.scenarios.items():
        if not fed.oracle:
            continue
        info = world.federations[name]
        members = len(world.ledger.joins.get(info.fed_id, {}))
        models[name] = TrafficModel(
            promotions=fed.promotions,
            members=members,
            duration=config.duration,
            renew_period=config.lease.renew_period,
            heartbeat_period=config.gossip.heartbeat_period,
            resubscription_period=config.gossip.resubscription_period,
            c=config.gossip.c,
        )
    return models


def _models_table(world) -> pd.DataFrame:
    rows = []
    for name, model in traffic_models(world).items():
        rows.append({
            "federation": name,
            "style": world.federations[name].style.value,
            "promotions": model.promotions,
            "members": model.members,
            "duration": model.duration,
            "renew_period": model.renew_period,
            "heartbeat_period": model.heartbeat_period,
            "resubscription_period": model.resubscription_period,
            "c": model.c,
            "log_base": world.config.log_base,
        })
    columns = ["federation", "style", "promotions", "members", "duration", "renew_period",
               "heartbeat_period", "resubscription_period", "c", "log_base"]
    return pd.DataFrame(rows, columns=columns)


def collect_metrics(world) -> MetricsReport:
    """
    Собрать отчёт по завершённому прогону

    Args:
        world: Выполненный World

    Returns:
        MetricsReport
    """
    config = world.config
    messages = _messages_table(world)
    hops = hop_histogram(messages["hops"].tolist())
    latency = _latency_table(world)
    latency_summary = _latency_summary(latency)
    matching, interests = _matching_tables(world)
    actions = pd.DataFrame(
        [{"action": kind, "count": world.action_counts.get(kind, 0)} for kind in sorted(world.action_counts)],
        columns=["action", "count"],
    )
    report = MetricsReport(
        name=config.name,
        seed=config.seed,
        duration=config.duration,
        tables={
            "hops": hops,
            "messages": messages,
            "federations": _federations_table(world, latency_summary),
            "channels": _channels_table(world),
            "latency": latency,
            "latency_summary": latency_summary,
            "matching": matching,
            "interests": interests,
            "nodes": _nodes_table(world),
            "models": _models_table(world),
            "actions": actions,
        },
    )
    total = int(hops["messages"].sum()) if not hops.empty else 0
    zero = int(hops.loc[hops["hops"] == 0, "messages"].sum()) if not hops.empty else 0
    summary: Dict[str, Any] = {
        "name": config.name,
        "seed": config.seed,
        "duration": config.duration,
        "events_processed": world.sim.events_processed,
        "messages": total,
        "zero_hop_share": zero / total if total else 0.0,
        "control_messages": world.dispatcher.control_messages,
        "rejected_unauthorized": int(sum(dm.rejected_unauthorized for dm in world.managers.values())),
        "command_errors": len(world.command_errors),
        "parses": world.dispatcher.stats.parses,
        "path_evaluations": world.dispatcher.stats.path_evaluations,
    }
    fit = fit_hops(hops)
    if fit is not None:
        summary.update(fit.to_dict())
    report.summary = summary
    logger.info(
        f"Отчёт {config.name}: сообщений {total}, без переходов {summary['zero_hop_share']:.1%}, "
        f"событий {summary['events_processed']}"
    )
    return report
