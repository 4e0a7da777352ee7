"""
神经网络函数式算子

Convolution is computed by gathering the k*k kernel taps of the padded
input into a (N, C, K, Ho, Wo) column tensor and contracting it with the
weights; the backward pass scatters the column gradient back into the
padded input. All kernels keep the dtype of their input.
"""

import math
from typing import Optional, Tuple

import numpy as np

from autodiff.ops import softmax as _softmax
from autodiff.tensor import Function, Tensor
from core.errors import DataError, ShapeError


def _numel(shape) -> int:
    return int(np.prod(shape, dtype=np.int64))


def same_padding(kernel_size: int, dilation: int = 1) -> int:
    return (kernel_size - 1) * dilation // 2


def conv_output_size(size: int, kernel_size: int, stride: int = 1, dilation: int = 1) -> int:
    pad = same_padding(kernel_size, dilation)
    return (size + 2 * pad - dilation * (kernel_size - 1) - 1) // stride + 1


def _tap_slices(kernel_size, dilation, stride, out_h, out_w):
    for i in range(kernel_size):
        for j in range(kernel_size):
            rows = slice(i * dilation, i * dilation + stride * (out_h - 1) + 1, stride)
            cols = slice(j * dilation, j * dilation + stride * (out_w - 1) + 1, stride)
            yield i * kernel_size + j, rows, cols


def _conv_shape(x_shape, w_shape, stride, dilation, groups):
    if len(x_shape) != 4 or len(w_shape) != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x_shape} and {w_shape}")
    n, c, h, w = x_shape
    out_c, c_per_group, kh, kw = w_shape
    if kh != kw:
        raise ShapeError("Only square kernels are supported")
    if c % groups or out_c % groups:
        raise ShapeError(f"Channels {c}->{out_c} not divisible by groups={groups}")
    if c // groups != c_per_group:
        raise ShapeError(f"Weight expects {c_per_group * groups} input channels, got {c}")
    out_h = conv_output_size(h, kh, stride, dilation)
    out_w = conv_output_size(w, kw, stride, dilation)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"conv2d output would be empty for input {x_shape}")
    return n, out_c, out_h, out_w


class Conv2dFunction(Function):
    @staticmethod
    def forward(ctx, x, weight, bias=None, stride=1, dilation=1, groups=1):
        n, out_c, out_h, out_w = _conv_shape(x.shape, weight.shape, stride, dilation, groups)
        c = x.shape[1]
        k = weight.shape[2]
        pad = same_padding(k, dilation)
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        cols = np.empty((n, c, k * k, out_h, out_w), dtype=x.dtype)
        for tap, rows, cols_slice in _tap_slices(k, dilation, stride, out_h, out_w):
            cols[:, :, tap] = xp[:, :, rows, cols_slice]

        if groups == 1:
            w2 = weight.reshape(out_c, c, k * k)
            out = np.tensordot(cols, w2, axes=([1, 2], [1, 2])).transpose(0, 3, 1, 2)
        elif groups == c and out_c == c:
            out = np.einsum('nckhw,ck->nchw', cols, weight.reshape(c, k * k))
        else:
            g = groups
            grouped = cols.reshape(n, g, c // g, k * k, out_h, out_w)
            w2 = weight.reshape(g, out_c // g, c // g, k * k)
            out = np.einsum('ngckhw,gock->ngohw', grouped, w2).reshape(n, out_c, out_h, out_w)
        if bias is not None:
            out = out + bias.reshape(1, -1, 1, 1)
        ctx.save_for_backward(cols, weight, xp.shape, pad)
        return np.ascontiguousarray(out)

    @staticmethod
    def backward(ctx, grad):
        cols, weight, padded_shape, pad = ctx.saved
        stride = ctx.kwargs.get('stride', 1)
        dilation = ctx.kwargs.get('dilation', 1)
        groups = ctx.kwargs.get('groups', 1)
        n, c, kk, out_h, out_w = cols.shape
        out_c, _, k, _ = weight.shape

        if groups == 1:
            w2 = weight.reshape(out_c, c, kk)
            grad_w = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 3, 4])).reshape(weight.shape)
            grad_cols = np.tensordot(grad, w2, axes=([1], [0])).transpose(0, 3, 4, 1, 2)
        elif groups == c and out_c == c:
            w2 = weight.reshape(c, kk)
            grad_w = np.einsum('nchw,nckhw->ck', grad, cols).reshape(weight.shape)
            grad_cols = grad[:, :, None] * w2[None, :, :, None, None]
        else:
            g = groups
            grouped = cols.reshape(n, g, c // g, kk, out_h, out_w)
            grad_g = grad.reshape(n, g, out_c // g, out_h, out_w)
            w2 = weight.reshape(g, out_c // g, c // g, kk)
            grad_w = np.einsum('ngohw,ngckhw->gock', grad_g, grouped).reshape(weight.shape)
            grad_cols = np.einsum('ngohw,gock->ngckhw', grad_g, w2).reshape(cols.shape)

        grad_xp = np.zeros(padded_shape, dtype=grad.dtype)
        for tap, rows, cols_slice in _tap_slices(k, dilation, stride, out_h, out_w):
            grad_xp[:, :, rows, cols_slice] += grad_cols[:, :, tap]
        grad_x = grad_xp[:, :, pad:padded_shape[2] - pad, pad:padded_shape[3] - pad] if pad else grad_xp

        if len(ctx.inputs) == 3:
            return np.ascontiguousarray(grad_x), grad_w, grad.sum(axis=(0, 2, 3))
        return np.ascontiguousarray(grad_x), grad_w

    @staticmethod
    def infer(ctx, x_shape, w_shape, b_shape=None, stride=1, dilation=1, groups=1):
        return _conv_shape(x_shape, w_shape, stride, dilation, groups)

    @staticmethod
    def cost(in_shapes, out_shape, stride=1, dilation=1, groups=1):
        x_shape, w_shape = in_shapes[0], in_shapes[1]
        macs = _numel(out_shape) * w_shape[2] * w_shape[3] * (x_shape[1] // groups)
        bias_adds = _numel(out_shape) if len(in_shapes) == 3 else 0
        return 2 * macs + bias_adds, macs


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1,
           dilation: int = 1, groups: int = 1) -> Tensor:
    """Cross-correlation with same padding floor((k-1)*dilation/2); out = ceil(in/stride)."""
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Conv2dFunction.apply(*inputs, stride=stride, dilation=dilation, groups=groups)


class BatchNormFunction(Function):
    @staticmethod
    def forward(ctx, x, gamma, beta, running_mean=None, running_var=None, training=True,
                momentum=0.1, eps=1e-5):
        if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
            raise ShapeError(f"batch_norm channel mismatch: input {x.shape}, gamma {gamma.shape}")
        if training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            count = x.size // x.shape[1]
            if running_mean is not None:
                running_mean *= 1 - momentum
                running_mean += momentum * mean
            if running_var is not None:
                unbiased = var * count / (count - 1) if count > 1 else var
                running_var *= 1 - momentum
                running_var += momentum * unbiased
        else:
            mean, var = running_mean, running_var
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x - mean.reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
        ctx.save_for_backward(x_hat.astype(x.dtype), inv_std.astype(x.dtype), gamma)
        return gamma.reshape(1, -1, 1, 1) * x_hat + beta.reshape(1, -1, 1, 1)

    @staticmethod
    def backward(ctx, grad):
        x_hat, inv_std, gamma = ctx.saved
        grad_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
        grad_beta = grad.sum(axis=(0, 2, 3))
        g = gamma.reshape(1, -1, 1, 1)
        inv = inv_std.reshape(1, -1, 1, 1)
        if ctx.kwargs.get('training', True):
            count = grad.size // grad.shape[1]
            d_hat = grad * g
            grad_x = inv / count * (
                count * d_hat
                - d_hat.sum(axis=(0, 2, 3), keepdims=True)
                - x_hat * (d_hat * x_hat).sum(axis=(0, 2, 3), keepdims=True)
            )
        else:
            grad_x = grad * g * inv
        return grad_x, grad_gamma, grad_beta

    @staticmethod
    def infer(ctx, x_shape, gamma_shape, beta_shape, **kwargs):
        return x_shape

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return 2 * _numel(out_shape), _numel(out_shape)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: Optional[np.ndarray] = None,
               running_var: Optional[np.ndarray] = None, training: bool = True,
               momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Training mode normalizes by biased batch statistics and updates the running buffers in place."""
    if not training and (running_mean is None or running_var is None):
        raise ShapeError("Eval-mode batch_norm needs running statistics")
    return BatchNormFunction.apply(x, gamma, beta, running_mean=running_mean, running_var=running_var,
                                   training=training, momentum=momentum, eps=eps)


class ReLUFunction(Function):
    @staticmethod
    def forward(ctx, x):
        mask = x > 0
        ctx.save_for_backward(mask)
        return np.where(mask, x, 0).astype(x.dtype)

    @staticmethod
    def backward(ctx, grad):
        mask, = ctx.saved
        return grad * mask

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return _numel(out_shape), 0


def relu(x: Tensor) -> Tensor:
    return ReLUFunction.apply(x)


def _pool_taps(x, kernel_size, stride, fill):
    n, c, h, w = x.shape
    pad = same_padding(kernel_size)
    out_h = conv_output_size(h, kernel_size, stride)
    out_w = conv_output_size(w, kernel_size, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=fill)
    taps = np.stack([xp[:, :, rows, cols] for _, rows, cols in _tap_slices(kernel_size, 1, stride, out_h, out_w)])
    return taps, xp.shape, pad, out_h, out_w


def _pool_infer(x_shape, kernel_size, stride):
    n, c, h, w = x_shape
    return n, c, conv_output_size(h, kernel_size, stride), conv_output_size(w, kernel_size, stride)


class MaxPoolFunction(Function):
    @staticmethod
    def forward(ctx, x, kernel_size=3, stride=1):
        taps, padded_shape, pad, out_h, out_w = _pool_taps(x, kernel_size, stride, -np.inf)
        winner = taps.argmax(axis=0)
        ctx.save_for_backward(winner, padded_shape, pad, out_h, out_w)
        return np.take_along_axis(taps, winner[None], axis=0)[0]

    @staticmethod
    def backward(ctx, grad):
        winner, padded_shape, pad, out_h, out_w = ctx.saved
        k = ctx.kwargs.get('kernel_size', 3)
        grad_xp = np.zeros(padded_shape, dtype=grad.dtype)
        for tap, rows, cols in _tap_slices(k, 1, ctx.kwargs.get('stride', 1), out_h, out_w):
            grad_xp[:, :, rows, cols] += grad * (winner == tap)
        return grad_xp[:, :, pad:padded_shape[2] - pad, pad:padded_shape[3] - pad]

    @staticmethod
    def infer(ctx, x_shape, kernel_size=3, stride=1):
        return _pool_infer(x_shape, kernel_size, stride)

    @staticmethod
    def cost(in_shapes, out_shape, kernel_size=3, **kwargs):
        return kernel_size * kernel_size * _numel(out_shape), 0


class AvgPoolFunction(Function):
    """Average over the valid (unpadded) elements of each window."""

    @staticmethod
    def forward(ctx, x, kernel_size=3, stride=1):
        taps, padded_shape, pad, out_h, out_w = _pool_taps(x, kernel_size, stride, 0.0)
        ones = np.ones((1, 1) + x.shape[2:], dtype=x.dtype)
        count_taps, _, _, _, _ = _pool_taps(ones, kernel_size, stride, 0.0)
        count = count_taps.sum(axis=0)
        ctx.save_for_backward(count, padded_shape, pad, out_h, out_w)
        return taps.sum(axis=0) / count

    @staticmethod
    def backward(ctx, grad):
        count, padded_shape, pad, out_h, out_w = ctx.saved
        k = ctx.kwargs.get('kernel_size', 3)
        scaled = grad / count
        grad_xp = np.zeros(padded_shape, dtype=grad.dtype)
        for _, rows, cols in _tap_slices(k, 1, ctx.kwargs.get('stride', 1), out_h, out_w):
            grad_xp[:, :, rows, cols] += scaled
        return grad_xp[:, :, pad:padded_shape[2] - pad, pad:padded_shape[3] - pad]

    @staticmethod
    def infer(ctx, x_shape, kernel_size=3, stride=1):
        return _pool_infer(x_shape, kernel_size, stride)

    @staticmethod
    def cost(in_shapes, out_shape, kernel_size=3, **kwargs):
        return kernel_size * kernel_size * _numel(out_shape), 0


def max_pool2d(x: Tensor, kernel_size: int = 3, stride: int = 1) -> Tensor:
    return MaxPoolFunction.apply(x, kernel_size=kernel_size, stride=stride)


def avg_pool2d(x: Tensor, kernel_size: int = 3, stride: int = 1) -> Tensor:
    return AvgPoolFunction.apply(x, kernel_size=kernel_size, stride=stride)


def resize_matrix(in_size: int, out_size: int, dtype=np.float64) -> np.ndarray:
    """(out, in) bilinear weights with half-pixel centers (align_corners disabled)."""
    matrix = np.zeros((out_size, in_size), dtype=dtype)
    scale = in_size / out_size
    for o in range(out_size):
        src = max((o + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(math.floor(src)), in_size - 1)
        i1 = min(i0 + 1, in_size - 1)
        frac = src - i0
        matrix[o, i0] += 1.0 - frac
        matrix[o, i1] += frac
    return matrix


def resize_output_size(size: int, factor: float) -> int:
    return int(math.floor(size * factor + 0.5))


class ResizeFunction(Function):
    @staticmethod
    def forward(ctx, x, size):
        rows = resize_matrix(x.shape[2], size[0], x.dtype)
        cols = resize_matrix(x.shape[3], size[1], x.dtype)
        ctx.save_for_backward(rows, cols)
        return np.matmul(np.matmul(rows, x), cols.T)

    @staticmethod
    def backward(ctx, grad):
        rows, cols = ctx.saved
        return np.matmul(np.matmul(rows.T, grad), cols)

    @staticmethod
    def infer(ctx, x_shape, size):
        return x_shape[0], x_shape[1], size[0], size[1]

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return 8 * _numel(out_shape), 4 * _numel(out_shape)


def bilinear_resize(x: Tensor, factor: Optional[float] = None, size: Optional[Tuple[int, int]] = None) -> Tensor:
    """Resize by ``factor`` (output = round(in * factor)) or to an explicit ``size``."""
    if (factor is None) == (size is None):
        raise ShapeError("bilinear_resize needs exactly one of factor or size")
    if size is None:
        if factor <= 0:
            raise ShapeError(f"Resize factor must be positive, got {factor}")
        size = (resize_output_size(x.shape[2], factor), resize_output_size(x.shape[3], factor))
    size = (int(size[0]), int(size[1]))
    if size[0] < 1 or size[1] < 1:
        raise ShapeError(f"Resize of {x.shape} gives an empty output {size}")
    return ResizeFunction.apply(x, size=size)


def softmax(logits: Tensor, axis: int = 1) -> Tensor:
    return _softmax(logits, axis=axis)


class CrossEntropyFunction(Function):
    @staticmethod
    def forward(ctx, logits, labels, ignore_index=255):
        n, c = logits.shape[:2]
        if labels.shape != (n,) + logits.shape[2:]:
            raise ShapeError(f"Labels {labels.shape} do not match logits {logits.shape}")
        valid = labels != ignore_index
        bad = valid & ((labels < 0) | (labels >= c))
        if bad.any():
            raise DataError(f"Label {int(labels[bad][0])} outside [0, {c}) and not ignore_index {ignore_index}")
        count = int(valid.sum())
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_prob = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        safe = np.where(valid, labels, 0).astype(np.int64)
        picked = np.take_along_axis(log_prob, safe[:, None], axis=1)[:, 0]
        ctx.save_for_backward(log_prob, safe, valid, count)
        if count == 0:
            return np.zeros((), dtype=logits.dtype)
        return np.asarray(-(picked * valid).sum() / count, dtype=logits.dtype)

    @staticmethod
    def backward(ctx, grad):
        log_prob, safe, valid, count = ctx.saved
        if count == 0:
            return np.zeros_like(log_prob)
        prob = np.exp(log_prob)
        np.put_along_axis(prob, safe[:, None], np.take_along_axis(prob, safe[:, None], axis=1) - 1, axis=1)
        return prob * valid[:, None] * (grad / count)

    @staticmethod
    def infer(ctx, logits_shape, **kwargs):
        return ()

    @staticmethod
    def cost(in_shapes, out_shape, **kwargs):
        return 3 * _numel(in_shapes[0]), 0


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray, ignore_index: int = 255) -> Tuple[Tensor, bool]:
    """
    Mean negative log-softmax over non-ignored pixels.

    Returns (loss, all_ignored); when every pixel is ignored the loss is 0.
    """
    labels = np.asarray(labels)
    loss = CrossEntropyFunction.apply(logits, labels=labels, ignore_index=ignore_index)
    return loss, not bool((labels != ignore_index).any())
