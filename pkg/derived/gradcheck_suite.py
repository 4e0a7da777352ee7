"""
梯度检查套件

Finite-difference checks over the candidate operators, the supernet
building blocks and the decoder heads, in double precision on tiny shapes.
Every case reduces its output to a scalar through a fixed random
projection and checks the gradient of every trainable input. BatchNorm
layers run in eval mode.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.gradcheck import finite_diff_check
from autodiff.tensor import Parameter, Tensor, default_dtype
from core.errors import ConfigError
from models.configs import SearchConfig
from models.genotype import OPERATORS
from nn import init
from nn.module import Module
from nn.operations import candidate_forward, make_op
from search.components import Stem
from search.space import channels_for, init_relaxation
from search.supernet import MixedOp, SearchCell, Supernet, cell_forward, mixed_op
from .decoder import ASPP, FPN, FeatureFusion, SemanticAggregation

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
EPS = 1e-5

# builder(rng) -> (scalar function, parameters to check)
CaseBuilder = Callable[[np.random.Generator], Tuple[Callable[[], Tensor], List[Parameter]]]


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    max_error: float
    num_scalars: int
    passed: bool

    def to_dict(self) -> dict:
        return {'name': self.name, 'max_error': self.max_error, 'num_scalars': self.num_scalars,
                'passed': self.passed}


def _projected(out: Tensor, projection: Tensor) -> Tensor:
    return (out * projection).sum()


def _projection(rng, shape) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _input(rng, shape) -> Parameter:
    return Parameter(rng.standard_normal(shape), name='input')


def _module_params(*modules: Module) -> List[Parameter]:
    params = []
    for module in modules:
        module.eval()
        params.extend(module.parameters())
    return params


def _operator_case(kind) -> CaseBuilder:
    def build(rng):
        op = make_op(kind, 4)
        x = _input(rng, (1, 4, 6, 6))
        projection = _projection(rng, (1, 4, 6, 6))
        return (lambda: _projected(candidate_forward(op, x), projection)), [x] + _module_params(op)
    return build


def _tiny_config(layers=2, blocks=1, filter_multiplier=2, resolutions=(4, 8)) -> SearchConfig:
    return SearchConfig(layers=layers, blocks=blocks, filter_multiplier=filter_multiplier,
                        num_classes=2, resolutions=resolutions)


def _stem_case(rng):
    stem = Stem(_tiny_config())
    image = _input(rng, (1, 3, 8, 8))
    proj1, proj0 = _projection(rng, (1, 1, 4, 4)), _projection(rng, (1, 2, 2, 2))

    def function():
        stem1, stem0 = stem(image)
        return _projected(stem1, proj1) + _projected(stem0, proj0)
    return function, [image] + _module_params(stem)


def _mixed_op_case(rng):
    edges = [MixedOp(2), MixedOp(2)]
    inputs = [_input(rng, (1, 2, 4, 4)), _input(rng, (1, 2, 4, 4))]
    alpha = Parameter(rng.standard_normal((2, len(OPERATORS))), name='alpha')
    projection = _projection(rng, (1, 2, 4, 4))
    return (lambda: _projected(mixed_op(inputs, alpha, edges), projection)), \
        inputs + [alpha] + _module_params(*edges)


def _cell_case(rng):
    config = _tiny_config(blocks=2)
    cell = SearchCell(config, 4)
    channels = channels_for(config, 4)
    prev1, prev2 = _input(rng, (1, channels, 4, 4)), _input(rng, (1, channels, 4, 4))
    alpha, _ = init_relaxation(config, seed=int(rng.integers(1 << 16)))
    projection = _projection(rng, (1, channels, 4, 4))
    return (lambda: _projected(cell_forward(cell, prev1, prev2, alpha.normalized()), projection)), \
        [prev1, prev2, alpha.logits] + _module_params(cell)


def _layer_update_case(rng):
    supernet = Supernet(_tiny_config(), seed=int(rng.integers(1 << 16)))
    supernet.eval()
    image = Tensor(rng.standard_normal((1, 3, 8, 8)))
    projection = _projection(rng, (1, 4, 1, 1))

    def function():
        alpha_norm, beta_norm = supernet.alpha.normalized(), supernet.beta.normalized()
        grid = supernet.forward_states(image, alpha_norm, beta_norm)
        return _projected(supernet.layer_update(grid, 2, 8, alpha_norm, beta_norm), projection)
    return function, supernet.arch_parameters()


def _fpn_case(rng):
    fpn = FPN({4: 3, 8: 4}, dim=2)
    taps = {4: _input(rng, (1, 3, 4, 4)), 8: _input(rng, (1, 4, 2, 2))}
    projections = {4: _projection(rng, (1, 2, 4, 4)), 8: _projection(rng, (1, 2, 2, 2))}

    def function():
        levels = fpn(taps)
        return _projected(levels[4], projections[4]) + _projected(levels[8], projections[8])
    return function, list(taps.values()) + _module_params(fpn)


def _fusion_case(rng):
    fusion = FeatureFusion((4, 8), dim=2)
    levels = {4: _input(rng, (1, 2, 4, 4)), 8: _input(rng, (1, 2, 2, 2))}
    projection = _projection(rng, (1, 2, 4, 4))
    return (lambda: _projected(fusion(levels), projection)), list(levels.values()) + _module_params(fusion)


def _aspp_case(rng):
    aspp = ASPP(3, 2, rates=(1, 2, 3))
    x = _input(rng, (1, 3, 4, 4))
    projection = _projection(rng, (1, 2, 4, 4))
    return (lambda: _projected(aspp(x), projection)), [x] + _module_params(aspp)


def _aggregation_case(rng):
    head = SemanticAggregation(2, 3, mode='concat')
    fusion, context = _input(rng, (1, 2, 4, 4)), _input(rng, (1, 2, 2, 2))
    projection = _projection(rng, (1, 3, 8, 8))
    return (lambda: _projected(head(fusion, context, (8, 8)), projection)), \
        [fusion, context] + _module_params(head)


GRADCHECK_CASES: Dict[str, CaseBuilder] = {
    **{f'op:{kind.value}': _operator_case(kind) for kind in OPERATORS},
    'stem': _stem_case,
    'mixed_op': _mixed_op_case,
    'cell_forward': _cell_case,
    'layer_update': _layer_update_case,
    'fpn': _fpn_case,
    'feature_fusion': _fusion_case,
    'aspp': _aspp_case,
    'semantic_aggregation': _aggregation_case,
}


def run_case(name: str, seed: int = 0, eps: float = EPS, tolerance: float = TOLERANCE) -> GradCheckResult:
    if name not in GRADCHECK_CASES:
        raise ConfigError(f"Unknown gradient check case: {name}", details={'allowed': sorted(GRADCHECK_CASES)})
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        init.manual_seed(seed)
        function, params = GRADCHECK_CASES[name](rng)
        error = finite_diff_check(function, params, eps=eps)
    result = GradCheckResult(name, float(error), sum(p.size for p in params), error < tolerance)
    level = logging.INFO if result.passed else logging.WARNING
    logger.log(level, f"[GRADCHECK_CASE] {name} max_error={error:.3e} passed={result.passed}")
    return result


def run_gradcheck_suite(names: Optional[Sequence[str]] = None, seed: int = 0, eps: float = EPS,
                        tolerance: float = TOLERANCE) -> List[GradCheckResult]:
    return [run_case(name, seed, eps, tolerance) for name in (names or list(GRADCHECK_CASES))]
