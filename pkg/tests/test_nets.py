import numpy as np
import pytest

from emgan import nets
from emgan.errors import InputTooSmall, ShapeMismatch
from emgan.tensor import Tensor


def test_interp_param_count_recount():
    params, _ = nets.build("interp", 0)
    # lift 1->50 (1,3,3); 4 residual units of two 50->50 (1,3,3) convs;
    # fuse 50->50 (2,3,3); output 50->1 (1,3,3); every conv has a bias
    by_hand = (50 * 9 + 50) + 8 * (50 * 50 * 9 + 50) + (50 * 50 * 18 + 50) + (50 * 9 + 1)
    assert params.n_params() == nets.interp_param_count() == by_hand == 226401


def test_builders_are_seed_deterministic():
    a, _ = nets.build("sr", 3)
    b, _ = nets.build("sr", 3)
    c, _ = nets.build("sr", 4)
    assert a.equal(b) and not a.equal(c)


@pytest.mark.parametrize("kind", ["interp", "align", "sr"])
def test_generators_start_at_zero_output(kind, rng):
    params, _ = nets.build(kind, 0)
    if kind == "interp":
        y = nets.forward_interp(params, rng.standard_normal((30, 30)), rng.standard_normal((30, 30)))
    elif kind == "align":
        y = nets.forward_align(params, rng.standard_normal((14, 14, 14)))
    else:
        y = nets.forward_sr(params, rng.standard_normal((16, 16, 16)))
    assert not y.data.any()


def test_interp_output_shape_and_errors(rng):
    params, _ = nets.build("interp", 0)
    assert nets.forward_interp(params, np.zeros((40, 31)), np.zeros((40, 31))).shape == (18, 9)
    with pytest.raises(InputTooSmall):
        nets.forward_interp(params, np.zeros((22, 40)), np.zeros((22, 40)))
    with pytest.raises(ShapeMismatch):
        nets.forward_interp(params, np.zeros((30, 30)), np.zeros((30, 31)))


def test_output_dims_helpers():
    assert nets.align_output_dims((64, 64, 64)) == (52, 52, 52)
    assert nets.sr_output_dims((64, 64, 64)) == (100, 50, 50)
    assert nets.plan_output_dims(nets.sr_plan(), (20, 30, 17)) == nets.sr_output_dims((20, 30, 17))


@pytest.mark.parametrize("kind,dims,window", [
    ("align", (16, 18, 17), ((0, 4), (2, 5), (3, 4))),
    ("align", (16, 18, 17), ((0, 4), (0, 6), (0, 5))),
    ("sr", (18, 17, 19), ((3, 5), (0, 3), (4, 5))),
    ("sr", (18, 17, 19), ((1, 8), (2, 3), (0, 5))),
])
def test_windowed_forward_equals_crop_of_full(kind, dims, window, rng):
    params, _ = nets.build(kind, 1)
    for t in params.values():  # make the zero-initialized output layer non-trivial
        if not t.data.any():
            t.data = 0.1 * rng.standard_normal(t.shape)
    x = rng.standard_normal(dims)
    fwd = nets.forward_align if kind == "align" else nets.forward_sr
    full = fwd(params, x).data
    part = fwd(params, x, window).data
    idx = tuple(slice(a, b) for a, b in window)
    np.testing.assert_allclose(part, full[idx], rtol=0, atol=1e-12)


def test_window_outside_output_rejected(rng):
    params, _ = nets.build("align", 0)
    with pytest.raises(ShapeMismatch):
        nets.forward_align(params, rng.standard_normal((14, 14, 14)), ((0, 3), (0, 1), (0, 1)))


def test_discriminator_starts_at_one_half_and_checks_inputs(rng):
    params, _ = nets.build_discriminator(2, (40, 40), 0)
    d = nets.forward_discriminator(params, [rng.standard_normal((40, 40))] * 2)
    assert d.shape == () and d.item() == 0.0
    with pytest.raises(ShapeMismatch):
        nets.forward_discriminator(params, [rng.standard_normal((40, 40))])
    with pytest.raises(ShapeMismatch):
        nets.forward_discriminator(params, [np.zeros((40, 40)), np.zeros((40, 41))])
    with pytest.raises(InputTooSmall):
        nets.build_discriminator(1, (35, 40), 0)
    nets.build_discriminator(1, (36, 36), 0)


def test_discriminator_dropout_needs_rng_and_changes_output(rng):
    params, _ = nets.build_discriminator(1, (36, 36), 0)
    params["fc1.w"].data = rng.standard_normal(params["fc1.w"].shape)
    x = rng.standard_normal((36, 36))
    with pytest.raises(ValueError):
        nets.forward_discriminator(params, [x], training=True)
    a = nets.forward_discriminator(params, [x], np.random.default_rng(0), training=True).item()
    b = nets.forward_discriminator(params, [x], np.random.default_rng(1), training=True).item()
    c = nets.forward_discriminator(params, [x]).item()
    assert a != b and c == nets.forward_discriminator(params, [x]).item()


def test_tensor_input_gradient_flows_through_generator(rng):
    params, _ = nets.build("align", 0)
    params["out.w"].data = rng.standard_normal(params["out.w"].shape)
    x = Tensor(rng.standard_normal((14, 14, 14)), requires_grad=True)
    nets.forward_align(params, x).sum().backward()
    assert x.grad.shape == (14, 14, 14) and np.abs(x.grad).sum() > 0
