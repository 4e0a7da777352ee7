"""
离散编码器

The searched cell instantiated once per layer along the searched path.
Transitions and second cell inputs follow the supernet exactly so that a
supernet restricted to the path with one-hot weights computes the same
states.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from autodiff.tensor import Tensor
from core.errors import DataError, GenotypeError
from models.genotype import STEM_RATE, CellGenotype
from models.network_spec import DerivedNetworkSpec
from nn.module import Module, ModuleDict, ModuleList
from nn.operations import make_op
from search.components import Stem, make_adapter, make_stem_chain
from search.space import channels_for, edge_offset, validate_path

logger = logging.getLogger(__name__)


class DiscreteCell(Module):
    """Block b computes op1(states[in1]) + op2(states[in2]); the cell returns the sum of blocks."""

    def __init__(self, genotype: CellGenotype, channels: int):
        super().__init__()
        self.genotype = genotype
        self.channels = channels
        self.ops = ModuleList()
        for block in genotype.blocks:
            self.ops.append(make_op(block.op1, channels))
            self.ops.append(make_op(block.op2, channels))

    def forward(self, prev1: Tensor, prev2: Tensor) -> Tensor:
        states = [prev2, prev1]
        out = None
        for b, block in enumerate(self.genotype.blocks):
            h = self.ops[2 * b](states[block.input1]) + self.ops[2 * b + 1](states[block.input2])
            states.append(h)
            out = h if out is None else out + h
        return out


class Encoder(Module):
    """
    编码器

    ``forward`` returns every layer state (index 0 is the rate-4 stem output)
    so the decoder can tap the pyramid inputs.
    """

    def __init__(self, spec: DerivedNetworkSpec, in_channels: int = 3):
        super().__init__()
        self.spec = spec
        self.config = spec.search_config()
        violations = validate_path(self.config, spec.path)
        if violations:
            raise GenotypeError("Invalid path genotype", details={'violations': violations})
        spec.cell.validate(allow_null=True)

        path = spec.path.path
        self.stem = Stem(self.config, in_channels)
        self.stem_chain = make_stem_chain(self.config, path[0])
        self.cells = ModuleList()
        self.adapters = ModuleDict()
        previous = STEM_RATE
        for layer, rate in enumerate(path, start=1):
            self.cells.append(DiscreteCell(spec.cell, channels_for(self.config, rate)))
            adapter = make_adapter(self.config, previous, rate)
            if adapter is not None:
                self.adapters[layer] = adapter
            previous = rate

    def tapped_channels(self) -> Dict[int, int]:
        return {rate: channels_for(self.config, rate) for rate in self.spec.pyramid_inputs}

    def forward(self, image: Tensor) -> List[Tensor]:
        path = self.spec.path
        stem1, stem0 = self.stem(image)
        states = [stem0]
        for layer in range(1, path.num_layers + 1):
            rate = path.rate_at(layer)
            prev1 = states[layer - 1]
            if layer in self.adapters:
                prev1 = self.adapters[layer](prev1)
            if layer == 1:
                prev2 = self.stem_chain(stem1)
            elif path.rate_at(layer - 2) == rate:
                prev2 = states[layer - 2]
            else:
                prev2 = prev1
            states.append(self.cells[layer - 1](prev1, prev2))
        return states

    def taps(self, states: List[Tensor]) -> Dict[int, Tensor]:
        return {rate: states[layer] for rate, layer in self.spec.pyramid_inputs.items()}


def build_encoder(spec: DerivedNetworkSpec) -> Encoder:
    return Encoder(spec)


def _prefix_map(encoder: Encoder, supernet) -> List[Tuple[str, str]]:
    """(encoder prefix, supernet prefix) pairs."""
    path = encoder.spec.path.path
    pairs = [('stem.', 'stem.'), ('stem_chain.', f'stem_chains.{path[0]}.')]
    previous = STEM_RATE
    for layer, rate in enumerate(path, start=1):
        for b, block in enumerate(encoder.spec.cell.blocks):
            for i, (slot, op) in enumerate(((block.input1, block.op1), (block.input2, block.op2))):
                edge = edge_offset(b) + slot
                pairs.append((f'cells.{layer - 1}.ops.{2 * b + i}.',
                              f'cells.{layer}_{rate}.edges.{edge}.ops.{op.index}.'))
        if previous != rate:
            k = (rate // 2, rate, rate * 2).index(previous)
            pairs.append((f'adapters.{layer}.', f'adapters.{layer}_{rate}_{k}.'))
        previous = rate
    return pairs


def inherit_supernet_weights(encoder: Encoder, supernet) -> int:
    """Copies the path's weights and BN statistics from ``supernet``; returns the tensor count."""
    if supernet.config.blocks != encoder.config.blocks or \
            supernet.config.filter_multiplier != encoder.config.filter_multiplier:
        raise DataError("Supernet and encoder differ in blocks or filter multiplier")
    source = supernet.state_dict()
    pairs = _prefix_map(encoder, supernet)
    copied = 0
    for name, target in encoder.state_dict().items():
        match = next(((mine, theirs) for mine, theirs in pairs if name.startswith(mine)), None)
        key = match[1] + name[len(match[0]):] if match else None
        if key not in source:
            raise DataError(f"No supernet tensor for '{name}'", details={'looked_up': key})
        np.copyto(target, source[key].astype(target.dtype))
        copied += 1
    logger.info(f"[WEIGHTS_INHERITED] tensors={copied}")
    return copied
