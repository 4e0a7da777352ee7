"""
AutoLC - 领域模型包

Genotypes, run configurations, the derived-network description and the cost
report shared by every package.
"""

from .base import BaseModel
from .genotype import (
    OperatorKind, OPERATORS, NUM_OPERATORS, NULL_INDEX, STEM_RATE,
    BlockGenotype, CellGenotype, PathGenotype, level_of,
)
from .configs import (
    DEFAULT_RESOLUTIONS, SearchConfig, SearchRunConfig, TrainConfig, DatasetConfig, NetworkConfig,
)
from .network_spec import DerivedNetworkSpec, select_pyramid_inputs
from .cost_report import CostReport, LayerCost

__all__ = [
    'BaseModel',
    'OperatorKind', 'OPERATORS', 'NUM_OPERATORS', 'NULL_INDEX', 'STEM_RATE',
    'BlockGenotype', 'CellGenotype', 'PathGenotype', 'level_of',
    'DEFAULT_RESOLUTIONS', 'SearchConfig', 'SearchRunConfig', 'TrainConfig', 'DatasetConfig', 'NetworkConfig',
    'DerivedNetworkSpec', 'select_pyramid_inputs',
    'CostReport', 'LayerCost',
]
