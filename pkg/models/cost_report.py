"""
效率指标报告
"""

from dataclasses import dataclass, field
from typing import List

from .base import BaseModel


@dataclass(frozen=True)
class LayerCost(BaseModel):
    name: str
    params: int = 0
    flops: int = 0
    madd: int = 0
    memory_bytes: int = 0
    mem_rw_bytes: int = 0


@dataclass(frozen=True)
class CostReport(BaseModel):
    """Totals are sums over per_layer by construction."""
    per_layer: List[LayerCost] = field(default_factory=list)
    input_hw: tuple = (1024, 1024)
    bytes_per_elem: int = 4

    @property
    def params(self) -> int:
        return sum(item.params for item in self.per_layer)

    @property
    def flops(self) -> int:
        return sum(item.flops for item in self.per_layer)

    @property
    def madd(self) -> int:
        return sum(item.madd for item in self.per_layer)

    @property
    def memory_bytes(self) -> int:
        return sum(item.memory_bytes for item in self.per_layer)

    @property
    def mem_rw_bytes(self) -> int:
        return sum(item.mem_rw_bytes for item in self.per_layer)

    def totals(self) -> dict:
        return {
            'params': self.params,
            'flops': self.flops,
            'madd': self.madd,
            'memory_bytes': self.memory_bytes,
            'mem_rw_bytes': self.mem_rw_bytes,
        }

    def to_dict(self, exclude=None):
        totals = self.totals()
        return {
            'input_hw': list(self.input_hw),
            'bytes_per_elem': self.bytes_per_elem,
            **totals,
            'table': {
                'Params (M)': round(totals['params'] / 1e6, 4),
                'FLOPs (G)': round(totals['flops'] / 1e9, 4),
                'Memory (GB)': round(totals['memory_bytes'] / 1e9, 4),
                'MAdd (T)': round(totals['madd'] / 1e12, 4),
                'MemR+W (GB)': round(totals['mem_rw_bytes'] / 1e9, 4),
            },
            'per_layer': [item.to_dict() for item in self.per_layer],
        }

    def to_table(self) -> str:
        table = self.to_dict()['table']
        header = ' | '.join(f"{key:>12}" for key in table)
        values = ' | '.join(f"{value:>12}" for value in table.values())
        return f"{header}\n{values}"
