"""
Лиз-контракты: ограниченная по времени валидность переданной информации
"""
from dataclasses import dataclass
from typing import Any, Dict


@dataclass(frozen=True)
class LeaseState:
    """Состояние лиза (время симуляции в секундах)"""
    issued_at: float
    duration: float
    renew_period: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"Длительность лиза должна быть положительной: {self.duration}")
        if self.renew_period <= 0 or self.renew_period > self.duration:
            raise ValueError(
                f"Период продления {self.renew_period} должен быть в (0, {self.duration}]"
            )

    @property
    def expires_at(self) -> float:
        return self.issued_at + self.duration

    def expired(self, now: float) -> bool:
        """Лиз истёк строго после issued_at + duration"""
        return now > self.expires_at

    def renewed(self, now: float) -> "LeaseState":
        """Новый лиз с тем же контрактом, выданный в момент now"""
        return LeaseState(issued_at=now, duration=self.duration, renew_period=self.renew_period)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "issued_at": self.issued_at,
            "duration": self.duration,
            "renew_period": self.renew_period,
        }
