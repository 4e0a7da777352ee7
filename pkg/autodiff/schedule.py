"""
学习率调度
"""

import enum
import math
from dataclasses import dataclass

from core.errors import ConfigError
from models.base import BaseModel


class ScheduleKind(enum.Enum):
    COSINE = 'cosine'
    POLYNOMIAL = 'polynomial'
    CONSTANT = 'constant'


@dataclass(frozen=True)
class LrSchedule(BaseModel):
    kind: ScheduleKind
    initial: float
    total_steps: int
    final: float = 0.0
    power: float = 0.9
    warmup_steps: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'kind', ScheduleKind(self.kind))
        if not self.initial >= self.final >= 0:
            raise ConfigError("Schedule needs initial >= final >= 0",
                              details={'initial': self.initial, 'final': self.final})
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ConfigError("warmup_steps must lie in [0, total_steps)")

    @classmethod
    def cosine(cls, initial, final, total_steps, warmup_steps=0):
        return cls(ScheduleKind.COSINE, initial, total_steps, final=final, warmup_steps=warmup_steps)

    @classmethod
    def polynomial(cls, initial, total_steps, power=0.9, warmup_steps=0):
        return cls(ScheduleKind.POLYNOMIAL, initial, total_steps, power=power, warmup_steps=warmup_steps)


def lr_at(schedule: LrSchedule, step: int) -> float:
    """
    Learning rate at ``step`` in [0, total_steps].

    Linear warmup from 0 to ``initial``; afterwards t is the progress over
    the remaining steps.
    """
    if not 0 <= step <= schedule.total_steps:
        raise ConfigError(f"Step {step} outside [0, {schedule.total_steps}]")
    if step < schedule.warmup_steps:
        return schedule.initial * step / schedule.warmup_steps
    t = (step - schedule.warmup_steps) / (schedule.total_steps - schedule.warmup_steps)
    if schedule.kind is ScheduleKind.COSINE:
        return schedule.final + (schedule.initial - schedule.final) * (1 + math.cos(math.pi * t)) / 2
    if schedule.kind is ScheduleKind.POLYNOMIAL:
        return schedule.initial * (1 - t) ** schedule.power
    return schedule.initial
