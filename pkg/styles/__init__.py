"""
Стили кооперации федераций: PS, PSR, Gossip
"""
from typing import Dict, Type

from core.federation_info import FederationInfo, FederationStyle
from styles.base import CooperationStyle, FederationCounters, FederationLedger
from styles.gossip import GossipStyle
from styles.publish_subscribe import PublishSubscribeReplyStyle, PublishSubscribeStyle
from styles.traffic import GOSSIP_TOLERANCES, TrafficModel, expected_maintenance, expected_traffic

STYLE_CLASSES: Dict[FederationStyle, Type[CooperationStyle]] = {
    FederationStyle.PS: PublishSubscribeStyle,
    FederationStyle.PSR: PublishSubscribeReplyStyle,
    FederationStyle.GOSSIP: GossipStyle,
}


def create_style(host, info: FederationInfo) -> CooperationStyle:
    """Экземпляр стиля федерации для узла host"""
    return STYLE_CLASSES[info.style](host, info)


__all__ = [
    'CooperationStyle',
    'FederationCounters',
    'FederationLedger',
    'GossipStyle',
    'PublishSubscribeStyle',
    'PublishSubscribeReplyStyle',
    'TrafficModel',
    'GOSSIP_TOLERANCES',
    'STYLE_CLASSES',
    'create_style',
    'expected_maintenance',
    'expected_traffic',
]
