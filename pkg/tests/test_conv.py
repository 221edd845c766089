import numpy as np
import pytest

from emgan import _pykernels, conv, kernels
from emgan.errors import ShapeMismatch
from emgan.gradcheck import grad_check
from emgan.tensor import Tensor, mul, tsum

from oracles import conv2d_naive, conv3d_naive, conv3d_transposed_naive, maxpool2x2_naive


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_conv3d_matches_naive_with_padding(rng):
    x = rng.standard_normal((2, 4, 5, 6))
    w = rng.standard_normal((3, 2, 2, 3, 3))
    b = rng.standard_normal(3)
    pad = ((1, 0), (1, 1), (0, 2))
    got = conv.conv3d(Tensor(x), Tensor(w), Tensor(b), pad).data
    np.testing.assert_allclose(got, conv3d_naive(x, w, b, pad), rtol=0, atol=1e-12)


def test_conv2d_matches_naive(rng):
    x = rng.standard_normal((3, 9, 7))
    w = rng.standard_normal((4, 3, 5, 5))
    b = rng.standard_normal(4)
    got = conv.conv2d_valid(Tensor(x), Tensor(w), Tensor(b)).data
    np.testing.assert_allclose(got, conv2d_naive(x, w, b), atol=1e-12)


@pytest.mark.parametrize("stride", [(1, 1, 1), (2, 1, 1), (2, 2, 3)])
def test_transposed_matches_scatter_definition(rng, stride):
    x = rng.standard_normal((2, 3, 4, 3))
    w = rng.standard_normal((2, 3, 2, 3, 3))
    got = conv.conv3d_transposed_cropped(Tensor(x), Tensor(w), None, stride).data
    np.testing.assert_allclose(got, conv3d_transposed_naive(x, w, None, stride), atol=1e-12)


def test_transposed_same_mode_extent(rng):
    x = Tensor(rng.standard_normal((2, 4, 5, 6)))
    w = Tensor(rng.standard_normal((2, 3, 2, 3, 3)))
    y = conv.conv3d_transposed(x, w, stride=(2, 1, 1), pad_mode_hw="same")
    assert y.shape == (3, 8, 5, 6)
    full = conv3d_transposed_naive(x.data, w.data, None, (2, 1, 1))
    np.testing.assert_allclose(y.data, full[:, :, 1:-1, 1:-1], atol=1e-12)


def test_adjoint_identity(rng):
    """<conv(x), y> == <x, conv_transposed(y)> for the same kernel."""
    x = rng.standard_normal((3, 5, 6, 7))
    w = rng.standard_normal((4, 3, 2, 3, 3))
    y = rng.standard_normal((4, 4, 4, 5))
    lhs = np.vdot(conv.conv3d(Tensor(x), Tensor(w)).data, y)
    # transposed kernel layout is [C_in_of_transposed, C_out, ...] = [4, 3, ...]
    rhs = np.vdot(x, conv.conv3d_transposed_cropped(Tensor(y), Tensor(w.data), None).data)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_depth_one_kernel_is_per_slice_2d(rng):
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((3, 2, 1, 3, 3))
    y = conv.conv3d(Tensor(x), Tensor(w)).data
    for z in range(3):
        np.testing.assert_allclose(y[:, z], conv2d_naive(x[:, z], w[:, :, 0]), atol=1e-12)


def test_maxpool_matches_naive_and_drops_odd_edge(rng):
    x = rng.standard_normal((2, 7, 9))
    y = conv.maxpool2d(Tensor(x))
    assert y.shape == (2, 3, 4)
    np.testing.assert_array_equal(y.data, maxpool2x2_naive(x))


def test_maxpool_gradient_goes_to_first_max_on_ties():
    x = Tensor(np.ones((1, 2, 2)), requires_grad=True)
    tsum(conv.maxpool2d(x)).backward()
    np.testing.assert_array_equal(x.grad, [[[1, 0], [0, 0]]])


def test_shape_errors(rng):
    with pytest.raises(ShapeMismatch):
        conv.conv3d(Tensor(rng.standard_normal((2, 3, 3, 3))), Tensor(rng.standard_normal((1, 3, 1, 1, 1))))
    with pytest.raises(ShapeMismatch):
        conv.conv3d(Tensor(rng.standard_normal((1, 2, 2, 2))), Tensor(rng.standard_normal((1, 1, 3, 3, 3))))
    with pytest.raises(ShapeMismatch):
        conv.maxpool2d(Tensor(np.zeros((1, 1, 4))))


@pytest.mark.parametrize("pad", [((0, 0), (0, 0), (0, 0)), ((1, 1), (2, 0), (0, 1)), ((3, 0), (0, 4), (2, 2))])
def test_conv3d_gradients(rng, pad):
    x = Tensor(rng.standard_normal((2, 3, 4, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 2, 2, 3, 2)), requires_grad=True)
    b = Tensor(rng.standard_normal(2), requires_grad=True)
    r = Tensor(rng.standard_normal(conv.conv3d(x, w, b, pad).shape))
    assert grad_check(lambda _: tsum(mul(conv.conv3d(x, w, b, pad), r)), [x, w, b]) < 1e-6


def test_transposed_gradients(rng):
    x = Tensor(rng.standard_normal((2, 3, 3, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 2, 2, 3, 3)), requires_grad=True)
    b = Tensor(rng.standard_normal(2), requires_grad=True)
    f = lambda: conv.conv3d_transposed(x, w, b, (2, 1, 1), "same")  # noqa: E731
    r = Tensor(rng.standard_normal(f().shape))
    assert grad_check(lambda _: tsum(mul(f(), r)), [x, w, b]) < 1e-6


def test_chunked_depth_matches_unchunked(rng, monkeypatch):
    x = rng.standard_normal((2, 9, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3, 3))
    whole = conv.conv3d(Tensor(x), Tensor(w)).data
    monkeypatch.setattr(conv, "_CHUNK_BYTES", 1)
    np.testing.assert_allclose(conv.conv3d(Tensor(x), Tensor(w)).data, whole, rtol=0, atol=1e-12)


# -- kernel backends --------------------------------------------------------------

backends = [pytest.param(name, id=name) for name in kernels.available()]


@pytest.mark.parametrize("name", backends)
def test_backend_im2col_col2im_adjoint(name, rng):
    k = kernels.load(name)
    x = rng.standard_normal((2, 3, 7, 8))
    cols = k.im2col(x, (3, 2), (2, 1))
    g = rng.standard_normal(cols.shape)
    back = np.zeros_like(x)
    k.col2im(g, back, (3, 2), (2, 1))
    assert np.vdot(cols, g) == pytest.approx(np.vdot(x, back), rel=1e-12)


@pytest.mark.skipif("cython" not in kernels.available(), reason="compiled kernels not built")
def test_backends_bit_identical(rng):
    c = kernels.load("cython")
    x = rng.standard_normal((3, 4, 9, 10))
    np.testing.assert_array_equal(c.im2col(x, (3, 3), (1, 1)), _pykernels.im2col(x, (3, 3), (1, 1)))
    cols = rng.standard_normal((27, 4 * 7 * 8))
    a, b = np.zeros_like(x), np.zeros_like(x)
    c.col2im(cols, a, (3, 3), (1, 1))
    _pykernels.col2im(cols, b, (3, 3), (1, 1))
    np.testing.assert_array_equal(a, b)
    img = rng.standard_normal((3, 9, 10))
    for u, v in zip(c.maxpool2x2(img), _pykernels.maxpool2x2(img)):
        np.testing.assert_array_equal(u, v)


@pytest.mark.skipif("cython" not in kernels.available(), reason="compiled kernels not built")
def test_network_forward_identical_across_backends(monkeypatch):
    from emgan import nets

    params, _ = nets.build("align", 0)
    x = np.random.default_rng(0).standard_normal((16, 16, 16))
    outs = []
    for name in ("cython", "python"):
        monkeypatch.setattr(kernels, "impl", kernels.load(name))
        outs.append(nets.forward_align(params, x).data)
    np.testing.assert_array_equal(outs[0], outs[1])
