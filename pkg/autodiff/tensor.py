"""
张量与反向传播

A numpy-backed Tensor records the Function that produced it in ``_ctx``;
``backward`` walks that tape in reverse topological order. A Tensor may hold
a MetaArray (shape and dtype only) instead of data, in which case every
Function infers its output shape without computing, which is how the cost
tracer walks full-size networks.
"""

import contextlib
import contextvars
import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import AutodiffError

logger = logging.getLogger(__name__)

_default_dtype = contextvars.ContextVar('default_dtype', default=np.float32)
_grad_enabled = contextvars.ContextVar('grad_enabled', default=True)
_trace_hook = contextvars.ContextVar('trace_hook', default=None)
_name_scope = contextvars.ContextVar('name_scope', default=())


def get_default_dtype():
    return _default_dtype.get()


@contextlib.contextmanager
def default_dtype(dtype):
    """Parameters and constants created inside use ``dtype``."""
    token = _default_dtype.set(np.dtype(dtype).type)
    try:
        yield
    finally:
        _default_dtype.reset(token)


@contextlib.contextmanager
def no_grad():
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextlib.contextmanager
def trace_hook(hook: Callable):
    """hook(function_cls, inputs, output, kwargs) is called after every Function.apply."""
    token = _trace_hook.set(hook)
    try:
        yield
    finally:
        _trace_hook.reset(token)


@contextlib.contextmanager
def name_scope(name: str):
    token = _name_scope.set(_name_scope.get() + (name,))
    try:
        yield
    finally:
        _name_scope.reset(token)


def current_scope() -> str:
    return '.'.join(part for part in _name_scope.get() if part)


class MetaArray:
    """Shape-only stand-in for an ndarray"""

    __slots__ = ('shape', 'dtype')

    def __init__(self, shape, dtype=None):
        self.shape = tuple(int(d) for d in shape)
        self.dtype = np.dtype(dtype or get_default_dtype())

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def __repr__(self):
        return f'MetaArray(shape={self.shape}, dtype={self.dtype})'


class Tensor:
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, MetaArray):
            self.data = data
        else:
            target = dtype
            if target is None and not (isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating)):
                target = get_default_dtype()
            self.data = np.asarray(data, dtype=target)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx: Optional['Context'] = None

    @classmethod
    def meta(cls, shape, dtype=None) -> 'Tensor':
        return cls(MetaArray(shape, dtype))

    @property
    def is_meta(self) -> bool:
        return isinstance(self.data, MetaArray)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        if self.is_meta:
            raise AutodiffError("Meta tensor holds no values")
        return self.data

    def item(self) -> float:
        return float(self.numpy().reshape(-1)[0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f'Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})'

    def _lift(self, other) -> 'Tensor':
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other):
        from . import ops
        return ops.Add.apply(self, self._lift(other))

    def __radd__(self, other):
        from . import ops
        return ops.Add.apply(self._lift(other), self)

    def __sub__(self, other):
        from . import ops
        return ops.Add.apply(self, ops.Neg.apply(self._lift(other)))

    def __rsub__(self, other):
        from . import ops
        return ops.Add.apply(self._lift(other), ops.Neg.apply(self))

    def __mul__(self, other):
        from . import ops
        return ops.Mul.apply(self, self._lift(other))

    def __rmul__(self, other):
        from . import ops
        return ops.Mul.apply(self._lift(other), self)

    def __truediv__(self, other):
        from . import ops
        return ops.Div.apply(self, self._lift(other))

    def __neg__(self):
        from . import ops
        return ops.Neg.apply(self)

    def __pow__(self, exponent):
        from . import ops
        return ops.Pow.apply(self, exponent=float(exponent))

    def __getitem__(self, index):
        from . import ops
        return ops.GetItem.apply(self, index=index)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.Mean.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.Reshape.apply(self, shape=tuple(shape))


class Parameter(Tensor):
    """Trainable leaf; ``name`` is assigned by the owning Module."""

    def __init__(self, data, name: str = '', dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype or get_default_dtype())
        self.name = name

    def __repr__(self):
        return f'Parameter(name={self.name!r}, shape={self.shape}, dtype={self.dtype})'


@contextlib.contextmanager
def frozen(parameters: Iterable[Parameter]):
    """Treat ``parameters`` as constants inside the block."""
    parameters = list(parameters)
    previous = [p.requires_grad for p in parameters]
    for p in parameters:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, flag in zip(parameters, previous):
            p.requires_grad = flag


class Context:
    def __init__(self, fn, inputs: Sequence[Tensor]):
        self.fn = fn
        self.inputs = tuple(inputs)
        self.needs_input_grad = tuple(t.requires_grad for t in inputs)
        self.saved: Tuple = ()
        self.kwargs: Dict = {}

    def save_for_backward(self, *values):
        self.saved = values


class Function:
    """
    Subclasses implement ``forward(ctx, *arrays, **kwargs) -> ndarray`` and
    ``backward(ctx, grad) -> tuple`` with one entry (or None) per tensor input.
    ``infer`` gives the output shape for meta tensors; ``cost`` gives
    (flops, madd). View functions are skipped by the cost tracer.
    """
    view = False

    @staticmethod
    def forward(ctx, *arrays, **kwargs):
        raise NotImplementedError

    @staticmethod
    def backward(ctx, grad):
        raise NotImplementedError

    @staticmethod
    def infer(ctx, *shapes, **kwargs):
        return tuple(np.broadcast_shapes(*shapes))

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return 0, 0

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs) -> Tensor:
        for t in inputs:
            if not isinstance(t, Tensor):
                raise AutodiffError(f"{cls.__name__} expects Tensor inputs, got {type(t).__name__}")
        ctx = Context(cls, inputs)
        ctx.kwargs = kwargs
        if any(t.is_meta for t in inputs):
            dtype = next((t.dtype for t in inputs if t.is_meta), None)
            out = Tensor(MetaArray(cls.infer(ctx, *[t.shape for t in inputs], **kwargs), dtype))
        else:
            out = Tensor(cls.forward(ctx, *[t.data for t in inputs], **kwargs))
            if out.dtype != inputs[0].dtype and np.issubdtype(inputs[0].dtype, np.floating):
                out.data = out.data.astype(inputs[0].dtype)
        if _grad_enabled.get() and any(ctx.needs_input_grad):
            out.requires_grad = True
            out._ctx = ctx
        hook = _trace_hook.get()
        if hook is not None:
            hook(cls, inputs, out, kwargs)
        return out


def _topological_order(root: Tensor) -> List[Tensor]:
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.inputs:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor, parameters: Optional[Iterable[Parameter]] = None) -> Dict[Parameter, np.ndarray]:
    """
    反向传播

    Accumulates d(loss)/d(leaf) into ``.grad`` of every reachable leaf that
    requires grad. Returns a map over ``parameters``; unreachable ones get zeros.
    """
    if not isinstance(loss, Tensor) or loss.is_meta:
        raise AutodiffError("backward needs a computed Tensor")
    if loss.size != 1:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._ctx is None and not loss.requires_grad:
        raise AutodiffError("Loss is not on the tape (no recorded computation requires grad)")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        ctx = node._ctx
        if ctx is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        input_grads = ctx.fn.backward(ctx, grad)
        if not isinstance(input_grads, tuple):
            input_grads = (input_grads,)
        for parent, needs, g in zip(ctx.inputs, ctx.needs_input_grad, input_grads):
            if not needs or g is None:
                continue
            if g.shape != parent.shape:
                raise AutodiffError(
                    f"{ctx.fn.__name__} produced gradient of shape {g.shape} for input {parent.shape}"
                )
            key = id(parent)
            grads[key] = g if key not in grads else grads[key] + g

    result = {}
    for p in parameters or ():
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        result[p] = p.grad
    return result


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad
