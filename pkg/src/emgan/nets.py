"""Builders and forward passes for the generators and the discriminator.

Generators are described by a :class:`LayerPlan` of convolution layers and
pre-activation residual modules and executed by one interpreter.  The
interpreter tracks, per spatial axis, which window of the layer's full
feature map the current tensor holds.  That lets a generator be evaluated
on any output sub-box (for instance a single reslice plane) with results
identical to cropping the full output, including layers that zero-pad at
the true volume border.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conv import conv2d_valid, conv3d, conv3d_transposed_cropped, maxpool2d
from .errors import InputTooSmall, ShapeMismatch
from .tensor import (
    ParamSet,
    Tensor,
    add,
    as_tensor,
    concat,
    dense,
    dropout,
    getitem,
    relu,
    reshape,
    stack,
)

HIDDEN = 50
DISC_CHANNELS = 32
DISC_DENSE = 256
DISC_DROPOUT = 0.5
DISC_MIN_INPUT = 36  # smallest side surviving three (5x5 valid conv, 2x2 pool) stages


# -- plan description --------------------------------------------------------

@dataclass(frozen=True)
class ConvLayer:
    name: str
    c_in: int
    c_out: int
    kernel: tuple
    same: tuple = (False, False, False)  # per-axis zero-padded 'same' mode
    pre_relu: bool = False
    transposed: bool = False
    stride: tuple = (1, 1, 1)
    zero_init: bool = False


@dataclass(frozen=True)
class Residual:
    name: str
    convs: tuple


@dataclass(frozen=True)
class Pool:
    name: str


@dataclass(frozen=True)
class Dense:
    name: str
    n_in: int
    n_out: int
    pre_dropout: float = 0.0
    post_relu: bool = False
    zero_init: bool = False


@dataclass(frozen=True)
class NetKind:
    name: str  # 'interp' | 'align' | 'sr' | 'disc'
    n_slices: int | None = None
    input_hw: tuple | None = None


@dataclass(frozen=True)
class LayerPlan:
    kind: NetKind
    layers: tuple

    def convs(self):
        for item in self.layers:
            if isinstance(item, Residual):
                yield from item.convs
            elif isinstance(item, ConvLayer):
                yield item


def _residual(name, n, kernel, same=(False, False, False)):
    return Residual(name, tuple(
        ConvLayer(f"{name}.conv{i}", HIDDEN, HIDDEN, kernel, same, pre_relu=True) for i in range(n)
    ))


def interp_plan():
    k2 = (1, 3, 3)
    return LayerPlan(NetKind("interp"), (
        ConvLayer("lift", 1, HIDDEN, k2),
        _residual("res0", 2, k2),
        _residual("res1", 2, k2),
        ConvLayer("fuse", HIDDEN, HIDDEN, (2, 3, 3), pre_relu=True),
        _residual("res2", 2, k2),
        _residual("res3", 2, k2),
        ConvLayer("out", HIDDEN, 1, k2, pre_relu=True, zero_init=True),
    ))


def align_plan():
    k3 = (3, 3, 3)
    return LayerPlan(NetKind("align"), (
        ConvLayer("lift", 1, HIDDEN, k3),
        _residual("res0", 2, k3),
        _residual("res1", 2, k3),
        ConvLayer("out", HIDDEN, 1, k3, pre_relu=True, zero_init=True),
    ))


def sr_plan():
    k3 = (3, 3, 3)
    k2 = (1, 3, 3)
    inplane_same = (False, True, True)
    return LayerPlan(NetKind("sr"), (
        ConvLayer("lift", 1, HIDDEN, k3),
        _residual("res0", 2, k3),
        _residual("res1", 2, k3),
        _residual("res2", 2, k3),
        ConvLayer("up", HIDDEN, HIDDEN, (2, 3, 3), inplane_same, pre_relu=True,
                  transposed=True, stride=(2, 1, 1)),
        _residual("res3", 2, k2, inplane_same),
        _residual("res4", 2, k2, inplane_same),
        ConvLayer("out", HIDDEN, 1, k2, inplane_same, pre_relu=True, zero_init=True),
    ))


def tower_extent(n):
    """Side length after three (5x5 valid conv, 2x2 pool) stages."""
    for _ in range(3):
        n = (n - 4) // 2
    return n


def disc_plan(n_slices, input_hw):
    if n_slices not in (1, 2):
        raise ValueError(f"discriminator takes 1 or 2 slices, got {n_slices}")
    h, w = input_hw
    th, tw = tower_extent(h), tower_extent(w)
    if th < 1 or tw < 1:
        raise InputTooSmall(f"discriminator input {input_hw} too small (minimum {DISC_MIN_INPUT} per side)")
    k = (1, 5, 5)
    layers = []
    c_in = 1
    for i in range(3):
        layers.append(ConvLayer(f"conv{i}", c_in, DISC_CHANNELS, k))
        layers.append(Pool(f"pool{i}"))
        c_in = DISC_CHANNELS
    flat = n_slices * DISC_CHANNELS * th * tw
    layers.append(Dense("fc0", flat, DISC_DENSE, pre_dropout=DISC_DROPOUT, post_relu=True))
    layers.append(Dense("fc1", DISC_DENSE, 1, zero_init=True))
    return LayerPlan(NetKind("disc", n_slices, (h, w)), tuple(layers))


# -- parameter initialisation ----------------------------------------------------

def _init_params(plan, seed):
    """He-normal kernels, zero biases, zero output layers; order follows the plan."""
    rng = np.random.default_rng(seed)
    params = ParamSet()
    for layer in _flat_layers(plan):
        if isinstance(layer, ConvLayer):
            kd, kh, kw = layer.kernel
            if layer.transposed:
                shape = (layer.c_in, layer.c_out, kd, kh, kw)
                fan_in = layer.c_in * kh * kw * math.ceil(kd / layer.stride[0])
            else:
                shape = (layer.c_out, layer.c_in, kd, kh, kw)
                fan_in = layer.c_in * kd * kh * kw
            if plan.kind.name == "disc":
                shape = (layer.c_out, layer.c_in, kh, kw)
            n_out = layer.c_out
        elif isinstance(layer, Dense):
            shape = (layer.n_out, layer.n_in)
            fan_in = layer.n_in
            n_out = layer.n_out
        else:
            continue
        if layer.zero_init:
            weight = np.zeros(shape)
        else:
            weight = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)
        params.add(f"{layer.name}.w", weight)
        params.add(f"{layer.name}.b", np.zeros(n_out))
    return params


def _flat_layers(plan):
    for item in plan.layers:
        if isinstance(item, Residual):
            yield from item.convs
        else:
            yield item


def build_interp_generator(seed):
    plan = interp_plan()
    return _init_params(plan, seed), plan


def build_align_generator(seed):
    plan = align_plan()
    return _init_params(plan, seed), plan


def build_sr_generator(seed):
    plan = sr_plan()
    return _init_params(plan, seed), plan


def build_discriminator(n_slices, input_hw, seed):
    plan = disc_plan(n_slices, tuple(input_hw))
    return _init_params(plan, seed), plan


def build(kind, seed, **kw):
    if kind == "interp":
        return build_interp_generator(seed)
    if kind == "align":
        return build_align_generator(seed)
    if kind == "sr":
        return build_sr_generator(seed)
    if kind == "disc":
        return build_discriminator(kw["n_slices"], kw["input_hw"], seed)
    raise ValueError(f"unknown network kind {kind!r}")


# -- window geometry ---------------------------------------------------------------
#
# A span (lo, hi, full) says the tensor holds positions [lo, hi) of a feature
# map whose complete extent is `full` along that axis.

def _layer_full(layer, axis, full):
    k, s = layer.kernel[axis], layer.stride[axis]
    if layer.transposed:
        return full * s if layer.same[axis] else (full - 1) * s + k
    return full if layer.same[axis] else full - k + 1


def _same_crop_lo(layer, axis):
    k, s = layer.kernel[axis], layer.stride[axis]
    return (k - s) // 2 if (layer.transposed and layer.same[axis]) else 0


def _conv_forward_span(layer, axis, span):
    """Output span and (pad or crop) pair for one conv layer on one axis."""
    lo, hi, full = span
    k, s = layer.kernel[axis], layer.stride[axis]
    new_full = _layer_full(layer, axis, full)
    if layer.transposed:
        c = _same_crop_lo(layer, axis)
        q_lo = 0 if lo == 0 else (lo - 1) * s + k
        q_hi = (full - 1) * s + k if hi == full else hi * s
        p_lo, p_hi = max(q_lo - c, 0), min(q_hi - c, new_full)
        got_lo, got_hi = lo * s, (hi - 1) * s + k  # raw transposed output coverage
        return (p_lo, p_hi, new_full), (p_lo + c - got_lo, got_hi - (p_hi + c))
    if layer.same[axis]:
        r = (k - 1) // 2
        pad_lo = r if lo == 0 else 0
        pad_hi = r if hi == full else 0
        return (lo if lo == 0 else lo + r, hi if hi == full else hi - r, new_full), (pad_lo, pad_hi)
    return (lo, hi - k + 1, new_full), (0, 0)


def _conv_required(layer, axis, out_lo, out_hi, full):
    """Input positions needed for output positions [out_lo, out_hi)."""
    k, s = layer.kernel[axis], layer.stride[axis]
    if layer.transposed:
        c = _same_crop_lo(layer, axis)
        qa, qb = out_lo + c, out_hi + c
        i_lo = max(0, -((-(qa - k + 1)) // s))
        i_hi = min(full - 1, (qb - 1) // s) + 1
        return i_lo, i_hi
    if layer.same[axis]:
        r = (k - 1) // 2
        return max(out_lo - r, 0), min(out_hi + r, full)
    return out_lo, out_hi + k - 1


def plan_output_dims(plan, in_dims):
    dims = list(in_dims)
    for layer in _flat_layers(plan):
        if isinstance(layer, ConvLayer):
            dims = [_layer_full(layer, a, dims[a]) for a in range(3)]
    return tuple(dims)


def required_input_window(plan, in_dims, out_window):
    """Smallest input box whose evaluation yields ``out_window`` of the full output."""
    fulls = [list(in_dims)]
    for item in plan.layers:
        convs = item.convs if isinstance(item, Residual) else (item,)
        for layer in convs:
            fulls.append([_layer_full(layer, a, fulls[-1][a]) for a in range(3)])
    window = [tuple(w) for w in out_window]
    level = len(fulls) - 1
    for item in reversed(plan.layers):
        convs = item.convs if isinstance(item, Residual) else (item,)
        res_out = window
        for layer in reversed(convs):
            level -= 1
            window = [_conv_required(layer, a, window[a][0], window[a][1], fulls[level][a]) for a in range(3)]
        if isinstance(item, Residual):
            off = _skip_offset(item)
            window = [(min(w[0], r[0] + o), max(w[1], r[1] + o)) for w, r, o in zip(window, res_out, off)]
    return tuple(window)


# -- generator interpreter -----------------------------------------------------------

def _apply_conv(layer, params, x, spans):
    if layer.pre_relu:
        x = relu(x)
    new_spans, pads = [], []
    for a in range(3):
        ns, pc = _conv_forward_span(layer, a, spans[a])
        new_spans.append(ns)
        pads.append(pc)
    w, b = params[f"{layer.name}.w"], params[f"{layer.name}.b"]
    if layer.transposed:
        y = conv3d_transposed_cropped(x, w, b, layer.stride, tuple(pads))
    else:
        y = conv3d(x, w, b, tuple(pads))
    return y, new_spans


def _skip_offset(residual):
    """Per-axis shift from a residual module's output frame to its input frame."""
    off = [0, 0, 0]
    for layer in residual.convs:
        for a in range(3):
            if not layer.same[a]:
                off[a] += (layer.kernel[a] - 1) // 2
    return off


def _crop_to(x, spans, target):
    idx = [slice(None)]
    trivial = True
    for (lo, hi, _), (tlo, thi, _) in zip(spans, target):
        if tlo < lo or thi > hi:
            raise ShapeMismatch(f"skip path {spans} does not cover {target}")
        idx.append(slice(tlo - lo, thi - lo))
        trivial = trivial and tlo == lo and thi == hi
    return x if trivial else getitem(x, tuple(idx))


def run_plan(plan, params, x, spans):
    """Execute a generator plan on ``x`` ([C, D, H, W]) holding ``spans``."""
    for item in plan.layers:
        if isinstance(item, Residual):
            skip, skip_spans = x, spans
            for layer in item.convs:
                x, spans = _apply_conv(layer, params, x, spans)
            off = _skip_offset(item)
            target = [(lo + o, hi + o, full) for (lo, hi, full), o in zip(spans, off)]
            x = add(x, _crop_to(skip, skip_spans, target))
        else:
            x, spans = _apply_conv(item, params, x, spans)
    return x, spans


def _as_input(stack_):
    if isinstance(stack_, Tensor):
        return stack_
    return Tensor(np.asarray(stack_, dtype=np.float64))


def forward_volume(plan, params, stack_, window=None):
    """Run a 3D generator on a (Z, Y, X) stack; optionally only an output sub-box.

    ``window`` is ``((z0, z1), (y0, y1), (x0, x1))`` in output coordinates.
    The result is a Tensor of the window's shape (or the full output shape).
    """
    x = _as_input(stack_)
    if x.ndim != 3:
        raise ShapeMismatch(f"generator input must be (Z, Y, X), got {x.shape}")
    in_dims = x.shape
    out_dims = plan_output_dims(plan, in_dims)
    if min(out_dims) < 1:
        raise InputTooSmall(f"input {in_dims} too small for the {plan.kind.name} generator")
    if window is None:
        window = tuple((0, n) for n in out_dims)
    window = tuple((int(a), int(b)) for a, b in window)
    for (a, b), n in zip(window, out_dims):
        if not 0 <= a < b <= n:
            raise ShapeMismatch(f"output window {window} outside output dims {out_dims}")
    need = required_input_window(plan, in_dims, window)
    if any(lo != 0 or hi != n for (lo, hi), n in zip(need, in_dims)):
        x = getitem(x, tuple(slice(lo, hi) for lo, hi in need))
    spans = [(lo, hi, n) for (lo, hi), n in zip(need, in_dims)]
    y, spans = run_plan(plan, params, reshape(x, (1,) + x.shape), spans)
    y = _crop_to(y, spans, [(a, b, n) for (a, b), n in zip(window, out_dims)])
    return reshape(y, y.shape[1:])


_INTERP = interp_plan()
_ALIGN = align_plan()
_SR = sr_plan()
INTERP_SHRINK = 22
ALIGN_SHRINK = 12
SR_SHRINK = 14


def forward_interp(params, below, above):
    """Predict slice k from slices k-1 and k+1; output is (H-22) x (W-22)."""
    below, above = as_tensor(below), as_tensor(above)
    if below.ndim != 2 or below.shape != above.shape:
        raise ShapeMismatch(f"interp inputs must be equal 2D images, got {below.shape}, {above.shape}")
    h, w = below.shape
    if h <= INTERP_SHRINK or w <= INTERP_SHRINK:
        raise InputTooSmall(f"interp input {below.shape} smaller than {INTERP_SHRINK + 1} per side")
    x = reshape(stack([below, above]), (1, 2, h, w))
    spans = [(0, 2, 2), (0, h, h), (0, w, w)]
    y, _ = run_plan(_INTERP, params, x, spans)
    return reshape(y, (h - INTERP_SHRINK, w - INTERP_SHRINK))


def forward_align(params, stack_, window=None):
    """Post-aligned volume, (Z-12, Y-12, X-12) or the requested sub-box of it."""
    shape = _as_input(stack_).shape
    if len(shape) != 3 or min(shape) <= ALIGN_SHRINK:
        raise InputTooSmall(f"alignment input {shape} needs every extent >= {ALIGN_SHRINK + 1}")
    return forward_volume(_ALIGN, params, stack_, window)


def forward_sr(params, stack_, window=None):
    """Super-resolved volume (2(Z-14), Y-14, X-14) or the requested sub-box of it."""
    shape = _as_input(stack_).shape
    if len(shape) != 3 or min(shape) <= SR_SHRINK:
        raise InputTooSmall(f"super-resolution input {shape} needs every extent >= {SR_SHRINK + 1}")
    return forward_volume(_SR, params, stack_, window)


def align_output_dims(in_dims):
    return tuple(n - ALIGN_SHRINK for n in in_dims)


def sr_output_dims(in_dims):
    z, y, x = in_dims
    return (2 * (z - SR_SHRINK), y - SR_SHRINK, x - SR_SHRINK)


# -- discriminator -----------------------------------------------------------------------

def _tower(params, img):
    x = reshape(img, (1,) + img.shape)
    for i in range(3):
        x = maxpool2d(relu(conv2d_valid(x, params[f"conv{i}.w"], params[f"conv{i}.b"])))
    return reshape(x, (x.size,))


def forward_discriminator(params, slices, rng=None, training=False):
    """Pre-sigmoid real/fake score (1 = real) for one or two equally sized slices.

    Both slices go through the same convolution tower; their flattened
    features are concatenated before dropout and the dense layers.
    """
    slices = [as_tensor(s) for s in slices]
    w0 = params["fc0.w"]
    if not slices or any(s.ndim != 2 or s.shape != slices[0].shape for s in slices):
        raise ShapeMismatch(f"discriminator slices must be equal 2D images, got {[s.shape for s in slices]}")
    h, w = slices[0].shape
    if tower_extent(h) < 1 or tower_extent(w) < 1:
        raise InputTooSmall(f"discriminator input {(h, w)} smaller than {DISC_MIN_INPUT} per side")
    expected = len(slices) * DISC_CHANNELS * tower_extent(h) * tower_extent(w)
    if w0.shape[1] != expected:
        raise ShapeMismatch(
            f"discriminator built for {w0.shape[1]} features, got {len(slices)} slice(s) of {(h, w)}"
        )
    feats = [_tower(params, s) for s in slices]
    x = feats[0] if len(feats) == 1 else concat(feats)
    if training:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        x = dropout(x, DISC_DROPOUT, rng, True)
    x = relu(dense(x, w0, params["fc0.b"]))
    x = dense(x, params["fc1.w"], params["fc1.b"])
    return reshape(x, ())


def interp_param_count():
    """Parameter count of the interpolation generator from its layer list."""
    total = 0
    for layer in interp_plan().convs():
        kd, kh, kw = layer.kernel
        total += layer.c_out * layer.c_in * kd * kh * kw + layer.c_out
    return total
