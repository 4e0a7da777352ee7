"""
优化器

Functional update rules over numpy arrays plus thin stateful wrappers that
read ``Parameter.grad``. Updates are in place and deterministic.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import AutodiffError
from .tensor import Parameter

logger = logging.getLogger(__name__)


def _check_shapes(params, grads, *states):
    if len(params) != len(grads):
        raise AutodiffError(f"Got {len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise AutodiffError(f"Shape mismatch at parameter {i}: {p.shape} vs gradient {g.shape}")
        for state in states:
            if state[i].shape != p.shape:
                raise AutodiffError(f"Optimizer state shape mismatch at parameter {i}")


def sgd_momentum_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                      velocities: Sequence[np.ndarray], lr: float, momentum: float,
                      weight_decay: float = 0.0) -> Sequence[np.ndarray]:
    """v <- momentum * v + (g + wd * p);  p <- p - lr * v"""
    if lr <= 0:
        raise AutodiffError(f"lr must be positive, got {lr}")
    _check_shapes(params, grads, velocities)
    for p, g, v in zip(params, grads, velocities):
        v *= momentum
        v += g + weight_decay * p
        p -= lr * v
    return params


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              first_moments: Sequence[np.ndarray], second_moments: Sequence[np.ndarray],
              step: int, lr: float, betas: Tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8, weight_decay: float = 0.0) -> Sequence[np.ndarray]:
    """
    Bias-corrected Adam with coupled weight decay (wd * p is added to the
    gradient). ``step`` is the 1-based update count after this call.
    """
    beta1, beta2 = betas
    if lr <= 0:
        raise AutodiffError(f"lr must be positive, got {lr}")
    if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
        raise AutodiffError(f"betas must lie in [0, 1), got {betas}")
    _check_shapes(params, grads, first_moments, second_moments)
    correction1 = 1 - beta1 ** step
    correction2 = 1 - beta2 ** step
    for p, g, m, v in zip(params, grads, first_moments, second_moments):
        g = g + weight_decay * p
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params


class Optimizer:
    """Holds per-parameter state keyed by position; ``lr`` may change per step."""

    state_names: Tuple[str, ...] = ()

    def __init__(self, parameters: Sequence[Parameter], lr: float):
        self.parameters: List[Parameter] = list(parameters)
        if not self.parameters:
            raise AutodiffError("Optimizer got an empty parameter list")
        self.lr = lr
        self.steps = 0
        self.state: Dict[str, List[np.ndarray]] = {
            name: [np.zeros_like(p.data) for p in self.parameters] for name in self.state_names
        }

    def zero_grad(self):
        for p in self.parameters:
            p.grad = None

    def _grads(self) -> List[np.ndarray]:
        return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.parameters]

    def _key(self, index: int) -> str:
        return self.parameters[index].name or str(index)

    def state_dict(self) -> Tuple[Dict[str, np.ndarray], Dict]:
        tensors = {}
        for name, values in self.state.items():
            for i, value in enumerate(values):
                tensors[f'{self._key(i)}.{name}'] = value
        return tensors, {'steps': self.steps, 'lr': self.lr, 'optimizer': self.__class__.__name__}

    def load_state_dict(self, tensors: Dict[str, np.ndarray], meta: Dict):
        for name, values in self.state.items():
            for i in range(len(values)):
                key = f'{self._key(i)}.{name}'
                if key not in tensors:
                    raise AutodiffError(f"Optimizer state is missing '{key}'")
                values[i] = np.array(tensors[key], dtype=self.parameters[i].dtype)
        self.steps = int(meta.get('steps', 0))


class SGD(Optimizer):
    state_names = ('velocity',)

    def __init__(self, parameters, lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
        super().__init__(parameters, lr)
        self.momentum = momentum
        self.weight_decay = weight_decay

    def step(self, lr: Optional[float] = None):
        if lr is not None:
            self.lr = lr
        self.steps += 1
        sgd_momentum_step([p.data for p in self.parameters], self._grads(), self.state['velocity'],
                          lr=self.lr, momentum=self.momentum, weight_decay=self.weight_decay)


class Adam(Optimizer):
    state_names = ('exp_avg', 'exp_avg_sq')

    def __init__(self, parameters, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__(parameters, lr)
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay

    def step(self, lr: Optional[float] = None):
        if lr is not None:
            self.lr = lr
        self.steps += 1
        adam_step([p.data for p in self.parameters], self._grads(),
                  self.state['exp_avg'], self.state['exp_avg_sq'], step=self.steps,
                  lr=self.lr, betas=self.betas, eps=self.eps, weight_decay=self.weight_decay)
