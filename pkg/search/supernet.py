"""
连续松弛超网络

Stem, mixed operators, cells, the architecture-level update over the
resolution trellis and a light multi-scale head used during search.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.tensor import Parameter, Tensor
from core.errors import SearchSpaceError, ShapeError
from models.configs import SearchConfig
from models.genotype import NULL_INDEX, OPERATORS, STEM_RATE, CellGenotype, PathGenotype
from nn import functional as F
from nn.layers import Conv2d
from nn.module import Module, ModuleDict, ModuleList
from nn.operations import candidate_forward, make_op
from .components import Stem, crop_to, make_adapter, make_stem_chain, pad_to_multiple
from .space import (
    AlphaParams, BetaParams, channels_for, edge_offset, init_relaxation, num_edges,
    reachable_rates, source_rates, validate_path,
)

logger = logging.getLogger(__name__)

PLANTED_LOGIT = 1e4


@dataclass
class HiddenStateGrid:
    """^sH^l keyed by (layer, rate); layer 0 is the rate-4 stem output."""
    states: Dict[Tuple[int, int], Tensor] = field(default_factory=dict)
    stem_aux: Optional[Tensor] = None

    def __contains__(self, key) -> bool:
        return key in self.states

    def __getitem__(self, key) -> Tensor:
        return self.states[key]

    def __setitem__(self, key, value: Tensor):
        self.states[key] = value

    def get(self, layer: int, rate: int) -> Optional[Tensor]:
        return self.states.get((layer, rate))

    def layer(self, layer: int) -> Dict[int, Tensor]:
        return {s: t for (l, s), t in self.states.items() if l == layer}

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(sorted(self.states))


class MixedOp(Module):
    """All eight candidates on one edge, weighted by that edge's normalized alpha row."""

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.ops = ModuleList([make_op(kind, channels) for kind in OPERATORS])

    def forward(self, x: Tensor, weights: Tensor) -> Tensor:
        out = None
        for k, op in enumerate(self.ops):
            term = weights[k] * candidate_forward(op, x)
            out = term if out is None else out + term
        return out


def mixed_op(inputs: Sequence[Tensor], alpha_group: Tensor, edges: Sequence[MixedOp]) -> Tensor:
    """H_i = sum over inputs j and operators k of alpha[j, k] * O_k(inputs[j])."""
    if len(inputs) != len(edges) or alpha_group.shape[0] != len(inputs):
        raise ShapeError(f"{len(inputs)} inputs for {len(edges)} edges and {alpha_group.shape[0]} alpha rows")
    shape = inputs[0].shape
    for x in inputs[1:]:
        if x.shape != shape:
            raise ShapeError(f"Mixed op inputs differ in shape: {shape} vs {x.shape}")
    out = None
    for j, (x, edge) in enumerate(zip(inputs, edges)):
        term = edge(x, alpha_group[j])
        out = term if out is None else out + term
    return out


class SearchCell(Module):
    """One cell at a fixed rate; its edges share the global alpha."""

    def __init__(self, config: SearchConfig, rate: int):
        super().__init__()
        self.rate = rate
        self.blocks = config.blocks
        self.channels = channels_for(config, rate)
        self.edges = ModuleList([MixedOp(self.channels) for _ in range(num_edges(config.blocks))])

    def forward(self, prev1: Tensor, prev2: Tensor, alpha_norm: Tensor) -> Tensor:
        states = [prev2, prev1]
        out = None
        for b in range(self.blocks):
            start = edge_offset(b)
            rows = slice(start, start + b + 2)
            h = mixed_op(states, alpha_norm[rows], [self.edges[e] for e in range(rows.start, rows.stop)])
            states.append(h)
            out = h if out is None else out + h
        return out


def cell_forward(cell: SearchCell, prev1: Tensor, prev2: Tensor, alpha_norm: Tensor) -> Tensor:
    for x in (prev1, prev2):
        if x.ndim != 4 or x.shape[1] != cell.channels:
            raise ShapeError(f"Cell at rate {cell.rate} expects {cell.channels} channels, got {x.shape}")
    return cell(prev1, prev2, alpha_norm)


def _path_rates(active_path) -> Optional[Tuple[int, ...]]:
    if active_path is None:
        return None
    if isinstance(active_path, PathGenotype):
        return active_path.path
    return tuple(int(s) for s in active_path)


class Supernet(Module):
    """
    搜索超网络

    Owns one cell per reachable (layer, rate), the transition adapters of
    every existing source branch, the stem chains feeding the first layer's
    second cell input, and one 1x1 classifier per final-layer rate. The
    alpha/beta logits live beside the modules, not among the weights.
    """

    def __init__(self, config: SearchConfig, seed: int = 0, in_channels: int = 3):
        super().__init__()
        self.config = config
        self.stem = Stem(config, in_channels)
        self.stem_chains = ModuleDict({s: make_stem_chain(config, s) for s in reachable_rates(1, config.resolutions)})
        self.cells = ModuleDict()
        self.adapters = ModuleDict()
        for l in range(1, config.layers + 1):
            previous = reachable_rates(l - 1, config.resolutions)
            for s in reachable_rates(l, config.resolutions):
                self.cells[f'{l}_{s}'] = SearchCell(config, s)
                for k, src in enumerate(source_rates(s)):
                    if src not in previous:
                        continue
                    adapter = make_adapter(config, src, s)
                    if adapter is not None:
                        self.adapters[f'{l}_{s}_{k}'] = adapter
        self.head = ModuleDict({
            s: Conv2d(channels_for(config, s), config.num_classes, 1, bias=True)
            for s in reachable_rates(config.layers, config.resolutions)
        })
        self.alpha, self.beta = init_relaxation(config, seed)
        logger.info(f"[SUPERNET] L={config.layers} B={config.blocks} F={config.filter_multiplier} "
                    f"cells={len(self.cells)} weights={self.num_parameters()}")

    def weight_parameters(self) -> List[Parameter]:
        return self.parameters()

    def arch_parameters(self) -> List[Parameter]:
        return [self.alpha.logits, self.beta.logits]

    def set_relaxation(self, alpha: AlphaParams, beta: BetaParams):
        self.alpha, self.beta = alpha, beta

    def _adapt(self, layer: int, rate: int, k: int, x: Tensor) -> Tensor:
        key = f'{layer}_{rate}_{k}'
        return self.adapters[key](x) if key in self.adapters else x

    def layer_update(self, grid: HiddenStateGrid, layer: int, rate: int,
                     alpha_norm: Tensor, beta_norm: Tensor) -> Tensor:
        """Beta-weighted sum of the cell over every source present in ``grid`` at layer - 1."""
        r = self.config.resolutions.index(rate)
        mask = self.beta.mask[layer - 1, r]
        branches = [(k, src) for k, src in enumerate(source_rates(rate))
                    if mask[k] and (layer - 1, src) in grid]
        if not branches:
            raise SearchSpaceError(f"Layer {layer} rate {rate} has no existing source state")
        if layer == 1:
            second = self.stem_chains[rate](grid.stem_aux)
        else:
            second = grid.get(layer - 2, rate)
        cell = self.cells[f'{layer}_{rate}']
        out = None
        for k, src in branches:
            prev1 = self._adapt(layer, rate, k, grid[(layer - 1, src)])
            prev2 = second if second is not None else prev1
            term = beta_norm[layer - 1, r, k] * cell_forward(cell, prev1, prev2, alpha_norm)
            out = term if out is None else out + term
        return out

    def forward_states(self, image: Tensor, alpha_norm: Tensor = None, beta_norm: Tensor = None,
                       active_path=None) -> HiddenStateGrid:
        """
        Runs the stem and every reachable state. With ``active_path`` only the
        path's states exist, so branches and second inputs off the path are
        treated as absent, exactly as in the discrete encoder.
        """
        alpha_norm = self.alpha.normalized() if alpha_norm is None else alpha_norm
        beta_norm = self.beta.normalized() if beta_norm is None else beta_norm
        path = _path_rates(active_path)
        if path is not None:
            violations = validate_path(self.config, PathGenotype(path))
            if violations:
                raise SearchSpaceError("Invalid active path", details={'violations': violations})

        stem1, stem0 = self.stem(image)
        grid = HiddenStateGrid({(0, STEM_RATE): stem0}, stem_aux=stem1)
        for layer in range(1, self.config.layers + 1):
            rates = (path[layer - 1],) if path is not None else reachable_rates(layer, self.config.resolutions)
            for rate in rates:
                grid[(layer, rate)] = self.layer_update(grid, layer, rate, alpha_norm, beta_norm)
        return grid

    def classify(self, grid: HiddenStateGrid, size: Tuple[int, int]) -> Tensor:
        """1x1 classifier per final-layer state, upsampled to ``size`` and summed."""
        logits = None
        for rate, state in sorted(grid.layer(self.config.layers).items()):
            term = F.bilinear_resize(self.head[rate](state), size=size)
            logits = term if logits is None else logits + term
        return logits

    def forward(self, image: Tensor, alpha_norm: Tensor = None, beta_norm: Tensor = None,
                active_path=None) -> Tensor:
        """Logits with the input's extent; inputs not divisible by the largest rate are padded, then cropped back."""
        size = image.shape[2:]
        image = pad_to_multiple(image, self.config.max_rate)
        grid = self.forward_states(image, alpha_norm, beta_norm, active_path)
        return crop_to(self.classify(grid, image.shape[2:]), size)


def planted_relaxation(config: SearchConfig, cell: CellGenotype, path,
                       scale: float = PLANTED_LOGIT) -> Tuple[np.ndarray, np.ndarray]:
    """
    Alpha/beta logits whose normalized weights are one-hot on ``cell`` and ``path``.

    Edges a block does not read put their mass on the null operator. A block
    reading the same input twice cannot be planted.
    """
    alpha = np.zeros((num_edges(config.blocks), len(OPERATORS)))
    alpha[:, NULL_INDEX] = scale
    for b, block in enumerate(cell.blocks):
        if block.input1 == block.input2:
            raise SearchSpaceError(f"Block {b + 1} reads input {block.input1} twice; not expressible one-hot")
        for slot, op in ((block.input1, block.op1), (block.input2, block.op2)):
            row = edge_offset(b) + slot
            alpha[row] = 0.0
            alpha[row, op.index] = scale

    rates = _path_rates(path)
    beta = np.zeros((config.layers, len(config.resolutions), 3))
    previous = STEM_RATE
    for layer, rate in enumerate(rates, start=1):
        r = config.resolutions.index(rate)
        beta[layer - 1, r, source_rates(rate).index(previous)] = scale
        previous = rate
    return alpha, beta
