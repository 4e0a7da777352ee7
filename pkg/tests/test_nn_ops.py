import math

import numpy as np
import pytest

from autodiff import Parameter, Tensor
from core.errors import DataError, ShapeError
from models.genotype import OPERATORS, OperatorKind
from nn import BatchNorm2d, Conv2d, ModuleDict, Sequential, candidate_forward, make_op, op_param_count
from nn import functional as F


def naive_conv(x, weight, bias=None, stride=1, dilation=1, groups=1):
    n, c, h, w = x.shape
    out_c, c_group, k, _ = weight.shape
    pad = (k - 1) * dilation // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out_h = (h + 2 * pad - dilation * (k - 1) - 1) // stride + 1
    out_w = (w + 2 * pad - dilation * (k - 1) - 1) // stride + 1
    out = np.zeros((n, out_c, out_h, out_w))
    per_group = out_c // groups
    for b in range(n):
        for o in range(out_c):
            g = o // per_group
            for i in range(out_h):
                for j in range(out_w):
                    total = 0.0
                    for ci in range(c_group):
                        for ki in range(k):
                            for kj in range(k):
                                total += weight[o, ci, ki, kj] * \
                                    xp[b, g * c_group + ci, i * stride + ki * dilation, j * stride + kj * dilation]
                    out[b, o, i, j] = total + (bias[o] if bias is not None else 0.0)
    return out


def test_null_gives_zeros(rng):
    x = Tensor(rng.standard_normal((1, 4, 5, 5)))
    out = candidate_forward(make_op(OperatorKind.NULL, 4), x)
    np.testing.assert_array_equal(out.numpy(), np.zeros((1, 4, 5, 5)))


def test_skip_is_identity(rng):
    x = Tensor(rng.standard_normal((1, 4, 5, 5)))
    out = candidate_forward(make_op(OperatorKind.SKIP, 4), x)
    np.testing.assert_array_equal(out.numpy(), x.numpy())


def test_avg_pool_of_constant_is_constant():
    x = Tensor(np.full((1, 1, 4, 4), 2.5))
    out = candidate_forward(make_op(OperatorKind.AVG_POOL_3X3, 1), x)
    np.testing.assert_allclose(out.numpy(), np.full((1, 1, 4, 4), 2.5))


def test_avg_pool_counts_only_valid_elements():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    out = F.avg_pool2d(Tensor(x), 3).numpy()
    assert out[0, 0, 0, 0] == pytest.approx(np.mean([0, 1, 4, 5]))
    assert out[0, 0, 1, 1] == pytest.approx(np.mean(x[0, 0, :3, :3]))


def test_max_pool_padding_never_wins():
    x = np.full((1, 1, 3, 3), -5.0)
    out = F.max_pool2d(Tensor(x), 3).numpy()
    np.testing.assert_array_equal(out, x)


@pytest.mark.parametrize('kind', OPERATORS, ids=lambda k: k.value)
def test_candidates_preserve_shape(kind, rng):
    x = Tensor(rng.standard_normal((2, 4, 6, 6)).astype(np.float32))
    assert candidate_forward(make_op(kind, 4), x).shape == (2, 4, 6, 6)


@pytest.mark.parametrize('kind', OPERATORS, ids=lambda k: k.value)
def test_candidate_param_count_closed_form(kind):
    assert make_op(kind, 8).num_parameters() == op_param_count(kind, 8)


def test_candidate_rejects_channel_mismatch(rng):
    with pytest.raises(ShapeError):
        candidate_forward(make_op(OperatorKind.SEP_CONV_3X3, 4), Tensor(rng.standard_normal((1, 3, 5, 5))))


def test_unknown_operator_name():
    with pytest.raises(DataError):
        make_op('dil_conv_7x7', 4)


def test_unit_1x1_conv_is_identity(float64, rng):
    x = rng.standard_normal((1, 1, 5, 5))
    out = F.conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))))
    np.testing.assert_array_equal(out.numpy(), x)


def test_all_ones_kernel_sums_neighbourhood(float64):
    out = F.conv2d(Tensor(np.ones((1, 1, 5, 5))), Tensor(np.ones((1, 1, 3, 3)))).numpy()
    assert out[0, 0, 2, 2] == 9.0
    assert out[0, 0, 0, 0] == 4.0
    assert out[0, 0, 0, 2] == 6.0


@pytest.mark.parametrize('stride, dilation', [(1, 1), (2, 1), (1, 2)])
def test_conv_matches_naive_oracle(float64, rng, stride, dilation):
    x = rng.standard_normal((2, 2, 7, 7))
    weight = rng.standard_normal((3, 2, 3, 3))
    bias = rng.standard_normal(3)
    out = F.conv2d(Tensor(x), Tensor(weight), Tensor(bias), stride=stride, dilation=dilation).numpy()
    np.testing.assert_allclose(out, naive_conv(x, weight, bias, stride, dilation), atol=1e-6)


def test_depthwise_conv_matches_naive_oracle(float64, rng):
    x = rng.standard_normal((1, 3, 6, 6))
    weight = rng.standard_normal((3, 1, 5, 5))
    out = F.conv2d(Tensor(x), Tensor(weight), groups=3, dilation=2).numpy()
    np.testing.assert_allclose(out, naive_conv(x, weight, dilation=2, groups=3), atol=1e-6)


def test_conv_shape_errors():
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.ones((1, 3, 5, 5))), Tensor(np.ones((2, 4, 3, 3))))
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.ones((3, 5, 5))), Tensor(np.ones((2, 3, 3, 3))))


def test_batch_norm_standardizes_in_training(float64, rng):
    bn = BatchNorm2d(2)
    x = rng.standard_normal((4, 2, 3, 3)) * 3.0 + 1.0
    out = bn(Tensor(x)).numpy()
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-7)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-4)


def test_batch_norm_zero_gamma_outputs_shift(float64, rng):
    x = Tensor(rng.standard_normal((2, 2, 3, 3)))
    out = F.batch_norm(x, Tensor(np.zeros(2)), Tensor(np.array([0.5, -1.0]))).numpy()
    np.testing.assert_allclose(out[:, 0], 0.5)
    np.testing.assert_allclose(out[:, 1], -1.0)


def test_batch_norm_two_sample_statistics(float64):
    x = np.array([1.0, 3.0]).reshape(2, 1, 1, 1)
    out = F.batch_norm(Tensor(x), Tensor(np.ones(1)), Tensor(np.zeros(1)), eps=1e-5).numpy()
    expected = (np.array([1.0, 3.0]) - 2.0) / math.sqrt(1.0 + 1e-5)
    np.testing.assert_allclose(out.reshape(-1), expected, atol=1e-6)


def test_batch_norm_running_stats_and_eval(float64, rng):
    bn = BatchNorm2d(1, momentum=0.5)
    x = rng.standard_normal((3, 1, 2, 2))
    bn(Tensor(x))
    unbiased = x.var(ddof=1)
    assert bn.running_mean[0] == pytest.approx(0.5 * x.mean())
    assert bn.running_var[0] == pytest.approx(0.5 + 0.5 * unbiased)

    bn.eval()
    out = bn(Tensor(x)).numpy()
    expected = (x - bn.running_mean[0]) / np.sqrt(bn.running_var[0] + bn.eps)
    np.testing.assert_allclose(out, expected, atol=1e-10)


def test_bilinear_resize_keeps_constants():
    x = Tensor(np.full((1, 2, 3, 5), 4.0))
    np.testing.assert_allclose(F.bilinear_resize(x, factor=2).numpy(), 4.0)
    np.testing.assert_allclose(F.bilinear_resize(x, size=(2, 2)).numpy(), 4.0)


def test_bilinear_upsample_preserves_corners(float64):
    x = Tensor(np.array([[0.0, 1.0], [2.0, 3.0]]).reshape(1, 1, 2, 2))
    out = F.bilinear_resize(x, factor=2).numpy()[0, 0]
    assert out.shape == (4, 4)
    assert (out[0, 0], out[0, 3], out[3, 0], out[3, 3]) == (0.0, 1.0, 2.0, 3.0)
    # half-pixel centers: output row 1 samples input row 0.25
    assert out[1, 0] == pytest.approx(0.5)


def test_bilinear_down_up_on_ramp(float64):
    ramp = np.tile(np.linspace(0.0, 1.0, 16), (16, 1)).reshape(1, 1, 16, 16)
    restored = F.bilinear_resize(F.bilinear_resize(Tensor(ramp), factor=2), factor=0.5).numpy()
    assert np.abs(restored - ramp).max() < 0.15


def test_bilinear_resize_needs_one_target():
    x = Tensor(np.ones((1, 1, 2, 2)))
    with pytest.raises(ShapeError):
        F.bilinear_resize(x)
    with pytest.raises(ShapeError):
        F.bilinear_resize(x, factor=2, size=(4, 4))


def test_cross_entropy_uniform_logits(float64):
    loss, ignored = F.softmax_cross_entropy(Tensor(np.zeros((1, 7, 2, 2))), np.zeros((1, 2, 2), dtype=np.int64))
    assert loss.item() == pytest.approx(math.log(7))
    assert not ignored


def test_cross_entropy_large_margin(float64):
    logits = np.zeros((1, 3, 2, 2))
    logits[:, 1] = 100.0
    loss, _ = F.softmax_cross_entropy(Tensor(logits), np.ones((1, 2, 2), dtype=np.int64))
    assert loss.item() < 1e-6


def test_cross_entropy_ignores_pixels(float64, rng):
    logits = rng.standard_normal((1, 2, 2, 2))
    labels = np.array([[[0, 1], [255, 1]]])
    loss, _ = F.softmax_cross_entropy(Tensor(logits), labels)

    terms = []
    for (i, j) in [(0, 0), (0, 1), (1, 1)]:
        z = logits[0, :, i, j]
        terms.append(-(z[labels[0, i, j]] - math.log(np.exp(z).sum())))
    assert loss.item() == pytest.approx(np.mean(terms), abs=1e-6)


def test_cross_entropy_all_ignored(float64):
    logits = Parameter(np.ones((1, 2, 2, 2)))
    loss, ignored = F.softmax_cross_entropy(logits, np.full((1, 2, 2), 255))
    assert ignored
    assert loss.item() == 0.0


def test_cross_entropy_rejects_out_of_range_label():
    with pytest.raises(DataError):
        F.softmax_cross_entropy(Tensor(np.zeros((1, 3, 1, 1))), np.array([[[5]]]))


def test_module_names_and_state_dict():
    net = Sequential([Conv2d(3, 4, 3), BatchNorm2d(4)])
    names = list(net.state_dict())
    assert names == ['0.weight', '1.weight', '1.bias', '1.running_mean', '1.running_var']
    assert net.num_parameters() == 3 * 4 * 9 + 8


def test_load_state_dict_rejects_mismatch():
    net = ModuleDict({'conv': Conv2d(3, 4, 1)})
    with pytest.raises(DataError):
        net.load_state_dict({'conv.weight': np.zeros((4, 3, 3, 3))})
    with pytest.raises(DataError):
        net.load_state_dict({})
