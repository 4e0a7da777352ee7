"""
AutoLC - 可微架构搜索

Search space, continuously relaxed supernet, bi-level search engine and
the genotype decoder.
"""

from .space import (
    AlphaParams, BetaParams, channels_for, edge_offset, num_edges, reachable_rates, source_rates,
    target_mask, beta_masks, init_relaxation, normalize_alpha, normalize_beta, validate_path,
    alpha_entropy, beta_entropy, check_relaxation,
)
from .components import Stem, UpAdapter, DownAdapter, make_adapter, make_stem_chain, stem_channels
from .supernet import (
    HiddenStateGrid, MixedOp, SearchCell, Supernet, mixed_op, cell_forward, planted_relaxation,
)
from .decoder import (
    decode, decode_cell, brute_force_cell, decode_path_dp, brute_force_path, emit_genotype,
    load_genotype, parse_genotype, write_arch_logits, read_arch_logits,
)
from .engine import (
    SearchHistory, EpochRecord, SearchResult, StepLosses, split_train, search_step, weight_step,
    arch_step, run_search, latest_checkpoint,
)

__all__ = [
    'AlphaParams', 'BetaParams', 'channels_for', 'edge_offset', 'num_edges', 'reachable_rates', 'source_rates',
    'target_mask', 'beta_masks', 'init_relaxation', 'normalize_alpha', 'normalize_beta', 'validate_path',
    'alpha_entropy', 'beta_entropy', 'check_relaxation',
    'Stem', 'UpAdapter', 'DownAdapter', 'make_adapter', 'make_stem_chain', 'stem_channels',
    'HiddenStateGrid', 'MixedOp', 'SearchCell', 'Supernet', 'mixed_op', 'cell_forward', 'planted_relaxation',
    'decode', 'decode_cell', 'brute_force_cell', 'decode_path_dp', 'brute_force_path', 'emit_genotype',
    'load_genotype', 'parse_genotype', 'write_arch_logits', 'read_arch_logits',
    'SearchHistory', 'EpochRecord', 'SearchResult', 'StepLosses', 'split_train', 'search_step', 'weight_step',
    'arch_step', 'run_search', 'latest_checkpoint',
]
