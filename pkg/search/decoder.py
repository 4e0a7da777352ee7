"""
架构解码

Turns converged alpha/beta into a discrete cell genotype (two strongest
predecessors per block, most likely operator on each) and a path genotype
(maximum-probability trellis path by dynamic programming), and reads/writes
the genotype and arch-logit documents.
"""

import itertools
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np

from autodiff.tensor import get_default_dtype, no_grad
from core.checkpoint import read_json, write_json
from core.errors import DataError, GenotypeError, SearchSpaceError
from models.configs import SearchConfig
from models.genotype import (
    NULL_INDEX, NUM_OPERATORS, STEM_RATE, BlockGenotype, CellGenotype, OperatorKind, PathGenotype,
)
from models.schemas import ArchLogitsSchema, GenotypeSchema
from .space import AlphaParams, BetaParams, beta_masks, edge_offset, num_edges, reachable_rates, source_rates

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_LAYERS = 12


def _operator_columns(allow_null: bool) -> List[int]:
    return [k for k in range(NUM_OPERATORS) if allow_null or k != NULL_INDEX]


def decode_cell(alpha_norm: np.ndarray, allow_null: bool = False) -> CellGenotype:
    """
    For each block keep the two slots with the largest candidate weight and
    the argmax operator on each. Ties go to the lower slot, then the lower
    operator index. The stronger slot is listed first.
    """
    alpha_norm = np.asarray(alpha_norm)
    edges = alpha_norm.shape[0]
    blocks = int(round((-3 + np.sqrt(9 + 8 * edges)) / 2))
    if num_edges(blocks) != edges or alpha_norm.shape[1:] != (NUM_OPERATORS,):
        raise SearchSpaceError(f"Alpha of shape {alpha_norm.shape} does not describe a cell")
    columns = _operator_columns(allow_null)

    decoded = []
    for b in range(blocks):
        rows = alpha_norm[edge_offset(b):edge_offset(b) + b + 2][:, columns]
        scores = rows.max(axis=1)
        ranked = sorted(range(b + 2), key=lambda j: (-scores[j], j))
        (slot1, slot2) = ranked[:2]
        op1 = OperatorKind.from_index(columns[int(np.argmax(rows[slot1]))])
        op2 = OperatorKind.from_index(columns[int(np.argmax(rows[slot2]))])
        decoded.append(BlockGenotype(slot1, slot2, op1, op2))
    return CellGenotype(tuple(decoded)).validate(allow_null=allow_null)


def brute_force_cell(alpha_norm: np.ndarray, allow_null: bool = False) -> CellGenotype:
    """Best (slot pair, operator pair) by summed weight over every candidate, stronger slot first."""
    alpha_norm = np.asarray(alpha_norm)
    blocks = int(round((-3 + np.sqrt(9 + 8 * alpha_norm.shape[0])) / 2))
    columns = _operator_columns(allow_null)
    decoded = []
    for b in range(blocks):
        rows = alpha_norm[edge_offset(b):edge_offset(b) + b + 2]
        best, best_total = None, None
        for j1, j2 in itertools.combinations(range(b + 2), 2):
            for k1, k2 in itertools.product(columns, repeat=2):
                total = rows[j1, k1] + rows[j2, k2]
                if best_total is None or total > best_total:
                    best, best_total = (j1, j2, k1, k2), total
        j1, j2, k1, k2 = best
        if rows[j2, k2] > rows[j1, k1]:
            j1, j2, k1, k2 = j2, j1, k2, k1
        decoded.append(BlockGenotype(j1, j2, OperatorKind.from_index(k1), OperatorKind.from_index(k2)))
    return CellGenotype(tuple(decoded))


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return np.log(np.asarray(values, dtype=np.float64))


def decode_path_dp(beta_norm: np.ndarray, config: SearchConfig) -> PathGenotype:
    """
    Viterbi pass over the trellis in log space.

    Each state keeps the best incoming source, scanning sources in the order
    (s/2, s, 2s) and replacing only on a strictly larger score; the terminal
    state is the best final-layer rate, smaller rates first.
    """
    beta_norm = np.asarray(beta_norm)
    expected = (config.layers, len(config.resolutions), 3)
    if beta_norm.shape != expected:
        raise SearchSpaceError(f"Beta must have shape {expected}, got {beta_norm.shape}")
    mask = beta_masks(config)
    log_beta = _log(beta_norm)

    scores: Dict[int, float] = {STEM_RATE: 0.0}
    pointers: List[Dict[int, int]] = []
    for layer in range(1, config.layers + 1):
        current, back = {}, {}
        for rate in reachable_rates(layer, config.resolutions):
            r = config.resolutions.index(rate)
            for k, src in enumerate(source_rates(rate)):
                if not mask[layer - 1, r, k] or src not in scores:
                    continue
                value = scores[src] + log_beta[layer - 1, r, k]
                if rate not in current or value > current[rate]:
                    current[rate], back[rate] = value, src
        scores = current
        pointers.append(back)

    final = None
    for rate in sorted(scores):
        if final is None or scores[rate] > scores[final]:
            final = rate
    path = [final]
    for back in reversed(pointers[1:]):
        path.append(back[path[-1]])
    path.reverse()
    logger.debug(f"[PATH_DECODED] path={path} log_prob={scores[final]:.6f}")
    return PathGenotype(tuple(path), log_prob=float(scores[final]))


def brute_force_path(beta_norm: np.ndarray, config: SearchConfig) -> PathGenotype:
    """Enumerates every valid path; ties resolve like decode_path_dp."""
    if config.layers > BRUTE_FORCE_MAX_LAYERS:
        raise SearchSpaceError(f"Brute force is limited to {BRUTE_FORCE_MAX_LAYERS} layers, got {config.layers}")
    beta_norm = np.asarray(beta_norm)
    log_beta = _log(beta_norm)
    best_path, best_score = None, None

    def visit(layer, previous, path, score):
        nonlocal best_path, best_score
        if layer > config.layers:
            key = tuple(reversed(path))
            if best_score is None or score > best_score or (score == best_score and key < tuple(reversed(best_path))):
                best_path, best_score = list(path), score
            return
        for rate in reachable_rates(layer, config.resolutions):
            if previous not in source_rates(rate):
                continue
            r = config.resolutions.index(rate)
            k = source_rates(rate).index(previous)
            visit(layer + 1, rate, path + [rate], score + log_beta[layer - 1, r, k])

    visit(1, STEM_RATE, [], 0.0)
    return PathGenotype(tuple(best_path), log_prob=float(best_score))


def decode(alpha: AlphaParams, beta: BetaParams, allow_null: bool = False) -> Tuple[CellGenotype, PathGenotype]:
    with no_grad():
        alpha_norm = alpha.normalized().numpy()
        beta_norm = beta.normalized().numpy()
    cell = decode_cell(alpha_norm, allow_null=allow_null)
    path = decode_path_dp(beta_norm, beta.config)
    logger.info(f"[GENOTYPE_DECODED] cell={cell.to_list()} path={list(path.path)}",
                extra={'log_prob': path.log_prob})
    return cell, path


def genotype_document(cell: CellGenotype, path: PathGenotype, config: SearchConfig) -> dict:
    return {
        'cell': cell.to_list(),
        'path': path.to_list(),
        'config': {
            'L': config.layers,
            'B': config.blocks,
            'F': config.filter_multiplier,
            'num_classes': config.num_classes,
        },
    }


def cell_dot(cell: CellGenotype) -> str:
    lines = ['digraph cell {', '  rankdir=LR;',
             '  prev2 [label="H^{l-2}", shape=box];', '  prev1 [label="H^{l-1}", shape=box];',
             '  output [label="H^l", shape=box];']
    slot_names = ['prev2', 'prev1']
    for number, block in enumerate(cell.blocks, start=1):
        name = f'block_{number}'
        lines.append(f'  {name} [label="block {number}", shape=circle];')
        for slot, op in ((block.input1, block.op1), (block.input2, block.op2)):
            lines.append(f'  {slot_names[slot]} -> {name} [label="{op.value}"];')
        lines.append(f'  {name} -> output;')
        slot_names.append(name)
    lines.append('}')
    return '\n'.join(lines) + '\n'


def trellis_dot(path: PathGenotype) -> str:
    lines = ['digraph trellis {', '  rankdir=LR;', f'  stem [label="stem x{STEM_RATE}", shape=box];']
    previous = 'stem'
    for layer, rate in enumerate(path.path, start=1):
        name = f'layer_{layer}'
        lines.append(f'  {name} [label="L{layer} x{rate}"];')
        lines.append(f'  {previous} -> {name};')
        previous = name
    lines.append('}')
    return '\n'.join(lines) + '\n'


def emit_genotype(cell: CellGenotype, path: PathGenotype, config: SearchConfig, out_dir: str) -> Dict[str, str]:
    """Writes genotype.json, cell.dot and trellis.dot under ``out_dir``."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        files = {'genotype': write_json(os.path.join(out_dir, 'genotype.json'),
                                        genotype_document(cell, path, config))}
        for name, text in (('cell', cell_dot(cell)), ('trellis', trellis_dot(path))):
            target = os.path.join(out_dir, f'{name}.dot')
            with open(target, 'w', encoding='utf-8') as f:
                f.write(text)
            files[name] = target
    except OSError as e:
        raise DataError(f"Cannot write genotype to {out_dir}: {e}", error_code='UNWRITABLE_PATH')
    logger.info(f"[GENOTYPE_WRITTEN] {files['genotype']}")
    return files


def parse_genotype(document: dict, allow_null: bool = False) -> Tuple[CellGenotype, PathGenotype, dict]:
    if not isinstance(document, dict):
        raise GenotypeError("Genotype document must be a JSON object")
    loaded = GenotypeSchema().load({**document, 'allow_null': allow_null})
    return loaded['cell'], loaded['path'], loaded['config']


def load_genotype(path: str, allow_null: bool = False) -> Tuple[CellGenotype, PathGenotype, dict]:
    return parse_genotype(read_json(path), allow_null=allow_null)


def write_arch_logits(path: str, alpha: AlphaParams, beta: BetaParams, epoch: Optional[int] = None) -> str:
    config = alpha.config
    return write_json(path, {
        'alpha': np.asarray(alpha.logits.numpy(), dtype=np.float64).tolist(),
        'beta': np.asarray(beta.logits.numpy(), dtype=np.float64).tolist(),
        'config': {
            'L': config.layers,
            'B': config.blocks,
            'F': config.filter_multiplier,
            'num_classes': config.num_classes,
            'resolutions': list(config.resolutions),
        },
        'epoch': epoch,
    })


def read_arch_logits(path: str, dtype=None) -> Tuple[AlphaParams, BetaParams, Optional[int]]:
    document = read_json(path)
    if not isinstance(document, dict):
        raise GenotypeError(f"Arch logits in {path} must be a JSON object")
    loaded = ArchLogitsSchema().load(document)
    config = loaded['config']
    dtype = dtype or get_default_dtype()
    alpha = AlphaParams(config, np.asarray(loaded['alpha'], dtype=dtype))
    beta = BetaParams(config, np.asarray(loaded['beta'], dtype=dtype))
    return alpha, beta, loaded.get('epoch')
