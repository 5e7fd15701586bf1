"""
Компоненты узла: локальный реестр, каталог федераций, delivery manager
"""
from .registry import InMemoryRegistry, LocalRegistry, NullRegistry
from .directory import DirectoryClient, FederationDirectory, Liveness
from .delivery_manager import DeliveryManager, NodeState

__all__ = [
    "InMemoryRegistry",
    "LocalRegistry",
    "NullRegistry",
    "DirectoryClient",
    "FederationDirectory",
    "Liveness",
    "DeliveryManager",
    "NodeState",
]
