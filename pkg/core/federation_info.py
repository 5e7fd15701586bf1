"""
Описание федерации, хранимое в каталоге
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple

from core.lease import LeaseState
from core.service_model import ElementId, NodeId


class FederationStyle(Enum):
    """Стиль кооперации федерации"""
    PS = "ps"
    PSR = "psr"
    GOSSIP = "gossip"

    @classmethod
    def parse(cls, value: Any) -> "FederationStyle":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"Неизвестный стиль федерации: {value!r}") from None


# Обязательные параметры подключения по стилю
REQUIRED_JOIN_PARAMS: Dict[FederationStyle, Tuple[str, ...]] = {
    FederationStyle.PS: ("topic",),
    FederationStyle.PSR: ("topic",),
    FederationStyle.GOSSIP: ("contact",),
}


def _freeze(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class FederationInfo:
    """Запись каталога: имя, стиль, параметры подключения, менеджер, лиз"""
    fed_id: ElementId
    name: str
    style: FederationStyle
    join_params: Tuple[Tuple[str, Any], ...]
    manager: NodeId
    lease: Optional[LeaseState] = None

    def __post_init__(self):
        params = self.join_params
        if isinstance(params, Mapping):
            params = params.items()
        normalized = tuple(sorted((str(k), _freeze(v)) for k, v in params))
        object.__setattr__(self, "join_params", normalized)
        object.__setattr__(self, "style", FederationStyle.parse(self.style))
        keys = {k for k, _ in normalized}
        missing = [k for k in REQUIRED_JOIN_PARAMS[self.style] if k not in keys]
        if missing:
            raise ValueError(
                f"Федерация {self.name}: для стиля {self.style.value} нужны параметры {missing}"
            )
        if not self.name:
            raise ValueError("Имя федерации не может быть пустым")

    def param(self, key: str, default: Any = None) -> Any:
        for k, v in self.join_params:
            if k == key:
                return v
        return default

    @property
    def topic(self) -> Optional[str]:
        return self.param("topic")

    def with_lease(self, lease: Optional[LeaseState]) -> "FederationInfo":
        return replace(self, lease=lease)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fed_id": str(self.fed_id),
            "name": self.name,
            "style": self.style.value,
            "join_params": {k: v for k, v in self.join_params},
            "manager": self.manager,
            "lease": self.lease.to_dict() if self.lease else None,
        }
