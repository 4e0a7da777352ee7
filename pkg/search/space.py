"""
搜索空间

Cell level: block b (0-based) reads slots 0 = H^{l-2}, 1 = H^{l-1} and
2 + j for the blocks j < b, so it owns b + 2 edges and the cell owns
B(B+3)/2 edges of 8 operator logits each.

Trellis level: layer l admits rate s when log2(s/4) <= l; layer 0 is the
stem at rate 4. Every (layer, target rate) has up to three sources ordered
(s/2, s, 2s) at layer l-1.
"""

import logging
from typing import List, Tuple

import numpy as np

from autodiff.ops import softmax
from autodiff.tensor import Parameter, Tensor, get_default_dtype
from core.errors import NumericalError, SearchSpaceError
from models.configs import SearchConfig
from models.genotype import NUM_OPERATORS, STEM_RATE, PathGenotype, level_of

logger = logging.getLogger(__name__)

ALPHA_INIT_SCALE = 1e-3


def channels_for(config: SearchConfig, rate: int) -> int:
    """B * F * s / 4"""
    if rate not in config.resolutions:
        raise SearchSpaceError(f"Rate {rate} is not one of {list(config.resolutions)}")
    return config.blocks * config.filter_multiplier * rate // STEM_RATE


def edge_offset(block: int) -> int:
    """First alpha row of 0-based ``block``."""
    return block * (block + 3) // 2


def num_edges(blocks: int) -> int:
    return blocks * (blocks + 3) // 2


def reachable_rates(layer: int, resolutions) -> Tuple[int, ...]:
    """Rates present at ``layer`` (0 = stem output)."""
    if layer == 0:
        return (STEM_RATE,)
    return tuple(s for s in resolutions if level_of(s) <= layer)


def source_rates(rate: int) -> Tuple[int, int, int]:
    return rate // 2, rate, rate * 2


def target_mask(config: SearchConfig) -> np.ndarray:
    """(L, R) bool: rate index r exists at layer l + 1."""
    mask = np.zeros((config.layers, len(config.resolutions)), dtype=bool)
    for l in range(1, config.layers + 1):
        for r, s in enumerate(config.resolutions):
            mask[l - 1, r] = s in reachable_rates(l, config.resolutions)
    return mask


def beta_masks(config: SearchConfig) -> np.ndarray:
    """(L, R, 3) bool: source k of (l, s) exists and is reachable at layer l - 1."""
    targets = target_mask(config)
    mask = np.zeros((config.layers, len(config.resolutions), 3), dtype=bool)
    for l in range(1, config.layers + 1):
        previous = reachable_rates(l - 1, config.resolutions)
        for r, s in enumerate(config.resolutions):
            if not targets[l - 1, r]:
                continue
            for k, src in enumerate(source_rates(s)):
                mask[l - 1, r, k] = src in previous
    return mask


class AlphaParams:
    """One (E, 8) logit matrix shared by every cell."""

    def __init__(self, config: SearchConfig, logits: np.ndarray):
        expected = (num_edges(config.blocks), NUM_OPERATORS)
        if logits.shape != expected:
            raise SearchSpaceError(f"Alpha logits must have shape {expected}, got {logits.shape}")
        self.config = config
        self.logits = Parameter(logits, name='alpha')

    def edge_rows(self, block: int) -> slice:
        start = edge_offset(block)
        return slice(start, start + block + 2)

    def normalized(self) -> Tensor:
        return normalize_alpha(self)


class BetaParams:
    """(L, R, 3) logits over sources (s/2, s, 2s); masked where no source exists."""

    def __init__(self, config: SearchConfig, logits: np.ndarray):
        expected = (config.layers, len(config.resolutions), 3)
        if logits.shape != expected:
            raise SearchSpaceError(f"Beta logits must have shape {expected}, got {logits.shape}")
        self.config = config
        self.logits = Parameter(logits, name='beta')
        self.mask = beta_masks(config)
        self.targets = target_mask(config)

    def normalized(self) -> Tensor:
        return normalize_beta(self)


def init_relaxation(config: SearchConfig, seed: int = 0) -> Tuple[AlphaParams, BetaParams]:
    """All logits i.i.d. N(0, 1) * 0.001, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dtype = get_default_dtype()
    alpha = rng.standard_normal((num_edges(config.blocks), NUM_OPERATORS)) * ALPHA_INIT_SCALE
    beta = rng.standard_normal((config.layers, len(config.resolutions), 3)) * ALPHA_INIT_SCALE
    return AlphaParams(config, alpha.astype(dtype)), BetaParams(config, beta.astype(dtype))


def _check_finite(name, values):
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{name} logits contain non-finite values")


def normalize_alpha(alpha: AlphaParams) -> Tensor:
    """Softmax over the operator axis of every edge."""
    if not alpha.logits.is_meta:
        _check_finite('Alpha', alpha.logits.data)
    return softmax(alpha.logits, axis=-1)


def normalize_beta(beta: BetaParams) -> Tensor:
    """Masked softmax over the incoming sources of every reachable (l, s)."""
    if not beta.logits.is_meta:
        _check_finite('Beta', beta.logits.data)
    empty = beta.targets & ~beta.mask.any(axis=-1)
    if empty.any():
        l, r = np.argwhere(empty)[0]
        raise SearchSpaceError(f"Layer {l + 1} rate {beta.config.resolutions[r]} has no source")
    return softmax(beta.logits, axis=-1, mask=beta.mask)


def validate_path(config: SearchConfig, path: PathGenotype) -> List[str]:
    """Violations of the trellis transitions; empty when the path is valid."""
    violations = []
    rates = list(path.path)
    if len(rates) != config.layers:
        violations.append(f"path has {len(rates)} layers, expected {config.layers}")
    previous = STEM_RATE
    for layer, rate in enumerate(rates, start=1):
        if rate not in config.resolutions:
            violations.append(f"layer {layer}: rate {rate} not in {list(config.resolutions)}")
        elif rate not in (previous // 2, previous, previous * 2):
            violations.append(f"layer {layer}: transition {previous}->{rate} is not x2 up, identity or x2 down")
        elif level_of(rate) > layer:
            violations.append(f"layer {layer}: rate {rate} unreachable from the stem")
        previous = rate
    return violations


def alpha_entropy(normalized: np.ndarray) -> float:
    """Mean Shannon entropy of the per-edge operator distributions."""
    p = np.clip(normalized, 1e-12, 1.0)
    return float(-(normalized * np.log(p)).sum(axis=-1).mean())


def beta_entropy(normalized: np.ndarray, targets: np.ndarray) -> float:
    p = np.clip(normalized, 1e-12, 1.0)
    per_group = -(normalized * np.log(p)).sum(axis=-1)
    return float(per_group[targets].mean()) if targets.any() else 0.0


def check_relaxation(alpha_norm: np.ndarray, beta_norm: np.ndarray, beta_mask: np.ndarray,
                     tol: float = 1e-6):
    """Normalized weights are nonnegative and sum to 1 per group; masked beta entries are 0."""
    if (alpha_norm < 0).any() or np.abs(alpha_norm.sum(axis=-1) - 1).max() > tol:
        raise NumericalError("Normalized alpha violates sum-to-one or nonnegativity")
    groups = beta_mask.any(axis=-1)
    sums = beta_norm.sum(axis=-1)
    if (beta_norm < 0).any() or (groups.any() and np.abs(sums[groups] - 1).max() > tol):
        raise NumericalError("Normalized beta violates sum-to-one or nonnegativity")
    if np.abs(beta_norm[~beta_mask]).max(initial=0.0) > 0:
        raise NumericalError("Masked beta entries must be exactly zero")
