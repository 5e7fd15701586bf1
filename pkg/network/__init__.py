"""
Симуляция сети: планировщик событий, каналы, оверлей брокеров, диспетчер
"""
from .simulator import Simulator, RandomStream
from .channels import ChannelClass, NetworkModel
from .topology import OverlayTopology, build_topology, route_table_check
from .dispatcher import ContentFilter, Dispatcher, TopicFilter

__all__ = [
    "Simulator",
    "RandomStream",
    "ChannelClass",
    "NetworkModel",
    "OverlayTopology",
    "build_topology",
    "route_table_check",
    "ContentFilter",
    "Dispatcher",
    "TopicFilter",
]
