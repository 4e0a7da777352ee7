"""
基础可微算子 (elementwise, reductions, views, softmax)
"""

import numpy as np

from .tensor import Function, Tensor, unbroadcast


def _numel(shape) -> int:
    return int(np.prod(shape, dtype=np.int64))


class Add(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a.shape, b.shape)
        return a + b

    @staticmethod
    def backward(ctx, grad):
        a_shape, b_shape = ctx.saved
        return unbroadcast(grad, a_shape), unbroadcast(grad, b_shape)

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(out_shape), 0


class Mul(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return a * b

    @staticmethod
    def backward(ctx, grad):
        a, b = ctx.saved
        return unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(out_shape), 0


class Div(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return a / b

    @staticmethod
    def backward(ctx, grad):
        a, b = ctx.saved
        return unbroadcast(grad / b, a.shape), unbroadcast(-grad * a / (b * b), b.shape)

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(out_shape), 0


class Neg(Function):
    @staticmethod
    def forward(ctx, a):
        return -a

    @staticmethod
    def backward(ctx, grad):
        return -grad

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(out_shape), 0


class Pow(Function):
    @staticmethod
    def forward(ctx, a, exponent):
        ctx.save_for_backward(a)
        return a ** exponent

    @staticmethod
    def backward(ctx, grad):
        a, = ctx.saved
        exponent = ctx.kwargs['exponent']
        return grad * exponent * a ** (exponent - 1)

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(out_shape), 0


def _reduced_shape(shape, axis, keepdims):
    if axis is None:
        return tuple(1 for _ in shape) if keepdims else ()
    axes = {a % len(shape) for a in np.atleast_1d(axis)}
    if keepdims:
        return tuple(1 if i in axes else d for i, d in enumerate(shape))
    return tuple(d for i, d in enumerate(shape) if i not in axes)


def _expand_grad(grad, shape, axis, keepdims):
    if axis is not None and not keepdims:
        axes = sorted(a % len(shape) for a in np.atleast_1d(axis))
        for a in axes:
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape)


class Sum(Function):
    @staticmethod
    def forward(ctx, a, axis=None, keepdims=False):
        ctx.save_for_backward(a.shape)
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    @staticmethod
    def backward(ctx, grad):
        shape, = ctx.saved
        return np.array(_expand_grad(grad, shape, ctx.kwargs.get('axis'), ctx.kwargs.get('keepdims', False)))

    @staticmethod
    def infer(ctx, shape, axis=None, keepdims=False):
        return _reduced_shape(shape, axis, keepdims)

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(in_shapes[0]), 0


class Mean(Function):
    @staticmethod
    def forward(ctx, a, axis=None, keepdims=False):
        ctx.save_for_backward(a.shape)
        return np.asarray(a.mean(axis=axis, keepdims=keepdims))

    @staticmethod
    def backward(ctx, grad):
        shape, = ctx.saved
        axis = ctx.kwargs.get('axis')
        count = _numel(shape) // max(1, _numel(_reduced_shape(shape, axis, False)))
        return np.array(_expand_grad(grad, shape, axis, ctx.kwargs.get('keepdims', False))) / count

    @staticmethod
    def infer(ctx, shape, axis=None, keepdims=False):
        return _reduced_shape(shape, axis, keepdims)

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(in_shapes[0]), 0


class Reshape(Function):
    view = True

    @staticmethod
    def forward(ctx, a, shape):
        ctx.save_for_backward(a.shape)
        return a.reshape(shape)

    @staticmethod
    def backward(ctx, grad):
        shape, = ctx.saved
        return grad.reshape(shape)

    @staticmethod
    def infer(ctx, in_shape, shape):
        target = list(shape)
        if -1 in target:
            known = _numel([d for d in target if d != -1])
            target[target.index(-1)] = _numel(in_shape) // known
        return tuple(target)


class GetItem(Function):
    view = True

    @staticmethod
    def forward(ctx, a, index):
        ctx.save_for_backward(a.shape, a.dtype)
        return np.array(a[index])

    @staticmethod
    def backward(ctx, grad):
        shape, dtype = ctx.saved
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, ctx.kwargs['index'], grad)
        return out

    @staticmethod
    def infer(ctx, shape, index):
        return np.broadcast_to(np.empty((), dtype=np.bool_), shape)[index].shape


class Identity(Function):
    """Skip connection; recorded so the cost tracer sees the read and write."""

    @staticmethod
    def forward(ctx, a):
        return a.copy()

    @staticmethod
    def backward(ctx, grad):
        return grad


class ZerosLike(Function):
    """Null connection: constant zero output, zero gradient."""

    @staticmethod
    def forward(ctx, a):
        return np.zeros_like(a)

    @staticmethod
    def backward(ctx, grad):
        return np.zeros_like(grad)


class Concat(Function):
    @staticmethod
    def forward(ctx, *arrays, axis=1):
        ctx.save_for_backward([a.shape[axis] for a in arrays])
        return np.concatenate(arrays, axis=axis)

    @staticmethod
    def backward(ctx, grad):
        sizes, = ctx.saved
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(grad, splits, axis=ctx.kwargs.get('axis', 1)))

    @staticmethod
    def infer(ctx, *shapes, axis=1):
        out = list(shapes[0])
        out[axis] = sum(s[axis] for s in shapes)
        return tuple(out)


class BroadcastTo(Function):
    @staticmethod
    def forward(ctx, a, shape):
        ctx.save_for_backward(a.shape)
        return np.array(np.broadcast_to(a, shape))

    @staticmethod
    def backward(ctx, grad):
        shape, = ctx.saved
        return unbroadcast(grad, shape)

    @staticmethod
    def infer(ctx, in_shape, shape):
        return tuple(shape)


class Softmax(Function):
    """
    Softmax along ``axis``. With a boolean ``mask`` (broadcastable to the
    input) masked entries are exactly 0 and do not take part; a fully
    masked group yields all zeros.
    """

    @staticmethod
    def forward(ctx, a, axis=-1, mask=None):
        if mask is None:
            shifted = a - a.max(axis=axis, keepdims=True)
            e = np.exp(shifted)
        else:
            mask = np.broadcast_to(mask, a.shape)
            filled = np.where(mask, a, -np.inf)
            peak = filled.max(axis=axis, keepdims=True)
            peak = np.where(np.isfinite(peak), peak, 0.0)
            e = np.where(mask, np.exp(np.where(mask, a, 0.0) - peak), 0.0)
        total = e.sum(axis=axis, keepdims=True)
        out = np.divide(e, total, out=np.zeros_like(e), where=total > 0)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx, grad):
        out, = ctx.saved
        axis = ctx.kwargs.get('axis', -1)
        return out * (grad - (grad * out).sum(axis=axis, keepdims=True))

    @staticmethod
    def infer(ctx, shape, **kwargs):
        return shape

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return 3 * _numel(out_shape), 0


def concat(tensors, axis=1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def softmax(x: Tensor, axis=-1, mask=None) -> Tensor:
    return Softmax.apply(x, axis=axis, mask=mask)


def broadcast_to(x: Tensor, shape) -> Tensor:
    return BroadcastTo.apply(x, shape=tuple(shape))


def identity(x: Tensor) -> Tensor:
    return Identity.apply(x)


def zeros_like(x: Tensor) -> Tensor:
    return ZerosLike.apply(x)
