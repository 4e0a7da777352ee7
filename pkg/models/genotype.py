"""
架构基因型 (cell and path genotypes)
"""

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from core.errors import GenotypeError
from .base import BaseModel


class OperatorKind(enum.Enum):
    """候选算子枚举, in candidate-table order"""
    SEP_CONV_3X3 = 'sep_conv_3x3'
    ATROUS_CONV_3X3 = 'atrous_conv_3x3'
    SEP_CONV_5X5 = 'sep_conv_5x5'
    ATROUS_CONV_5X5 = 'atrous_conv_5x5'
    AVG_POOL_3X3 = 'avg_pool_3x3'
    MAX_POOL_3X3 = 'max_pool_3x3'
    SKIP = 'skip_connect'
    NULL = 'null'

    @property
    def index(self) -> int:
        return OPERATORS.index(self)

    @classmethod
    def from_index(cls, index: int) -> 'OperatorKind':
        return OPERATORS[index]

    @classmethod
    def parse(cls, value) -> 'OperatorKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise GenotypeError(f"Unknown operator: {value}", details={'allowed': [op.value for op in cls]})


OPERATORS: List[OperatorKind] = list(OperatorKind)
NUM_OPERATORS = len(OPERATORS)
NULL_INDEX = OPERATORS.index(OperatorKind.NULL)
STEM_RATE = 4


@dataclass(frozen=True)
class BlockGenotype(BaseModel):
    """A block 4-tuple (I_1, I_2, O_1, O_2).

    Input index 0 is H^{l-2}, 1 is H^{l-1}, 2 + j is the output of block j.
    """
    input1: int
    input2: int
    op1: OperatorKind
    op2: OperatorKind

    def validate(self, block_number: int, allow_null: bool = False):
        """block_number is 1-based; block i may read indices < i + 1."""
        for value in (self.input1, self.input2):
            if not 0 <= value < block_number + 1:
                raise GenotypeError(
                    f"Block {block_number} input index {value} outside [0, {block_number + 1})",
                    details={'block': block_number},
                )
        if (self.input1, self.op1) == (self.input2, self.op2):
            raise GenotypeError(f"Block {block_number} selects the same (input, op) pair twice")
        if not allow_null and OperatorKind.NULL in (self.op1, self.op2):
            raise GenotypeError(f"Block {block_number} uses the null operator")

    def to_list(self) -> list:
        return [self.input1, self.input2, self.op1.value, self.op2.value]

    @classmethod
    def from_list(cls, item) -> 'BlockGenotype':
        if len(item) != 4:
            raise GenotypeError(f"Block entry must have 4 fields, got {item}")
        return cls(int(item[0]), int(item[1]), OperatorKind.parse(item[2]), OperatorKind.parse(item[3]))


@dataclass(frozen=True)
class CellGenotype(BaseModel):
    blocks: Tuple[BlockGenotype, ...]

    def __post_init__(self):
        object.__setattr__(self, 'blocks', tuple(self.blocks))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def validate(self, allow_null: bool = False):
        if not self.blocks:
            raise GenotypeError("Cell genotype has no blocks")
        for number, block in enumerate(self.blocks, start=1):
            block.validate(number, allow_null=allow_null)
        return self

    def to_list(self) -> list:
        return [block.to_list() for block in self.blocks]

    @classmethod
    def from_list(cls, items) -> 'CellGenotype':
        return cls(tuple(BlockGenotype.from_list(item) for item in items))


@dataclass(frozen=True)
class PathGenotype(BaseModel):
    """Layer-resolution path s_1..s_L; log_prob is set by the decoders."""
    path: Tuple[int, ...]
    log_prob: Optional[float] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'path', tuple(int(s) for s in self.path))

    @property
    def num_layers(self) -> int:
        return len(self.path)

    def rate_at(self, layer: int) -> int:
        """1-based layer; layer 0 is the stem output."""
        return STEM_RATE if layer == 0 else self.path[layer - 1]

    def to_list(self) -> list:
        return list(self.path)


def level_of(rate: int) -> int:
    """log2(rate / 4)"""
    return int(round(math.log2(rate / STEM_RATE)))
