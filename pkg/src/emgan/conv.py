"""Convolution, transposed convolution and max-pooling on :class:`Tensor`.

All convolutions are cross-correlations (no kernel flip).  Spatial layout is
``[C, D, H, W]`` for 3D and ``[C, H, W]`` for 2D.  The in-plane window
gather/scatter runs in :mod:`emgan.kernels`; depth taps are column windows
of the gathered matrix, so each 3D convolution is ``kd`` GEMMs with no
per-tap copies.
"""

import numpy as np

from . import kernels
from .errors import ShapeMismatch
from .tensor import DTYPE, Tensor, as_tensor, make_result, reshape

# bytes of gathered columns held at once; bounds memory on large volumes
_CHUNK_BYTES = 48 * 2**20

_NOPAD = ((0, 0), (0, 0), (0, 0))


def _triple(v):
    return (v, v, v) if isinstance(v, int) else tuple(v)


def _pairs(pad):
    return tuple((p, p) if isinstance(p, int) else tuple(p) for p in pad)


def _depth_chunk(rows, depth_cols, total_depth):
    per = max(rows * depth_cols * 8, 1)
    return max(1, min(total_depth, _CHUNK_BYTES // per))


def _correlate(xd, wd):
    """Raw valid cross-correlation of ``xd[C,D,H,W]`` with ``wd[Co,C,kd,kh,kw]``."""
    co, ci, kd, kh, kw = wd.shape
    _, dp, hp, wp = xd.shape
    do, ho, wo = dp - kd + 1, hp - kh + 1, wp - kw + 1
    hw = ho * wo
    rows = ci * kh * kw
    taps = [np.ascontiguousarray(wd[:, :, a]).reshape(co, rows) for a in range(kd)]
    step = _depth_chunk(rows, hw, do)
    k = kernels.impl
    out = np.empty((co, do, ho, wo), dtype=DTYPE)
    for z0 in range(0, do, step):
        z1 = min(do, z0 + step)
        dz = z1 - z0
        cols = k.im2col(xd[:, z0:z1 + kd - 1], (kh, kw), (1, 1))
        acc = taps[0] @ cols[:, :dz * hw]
        for a in range(1, kd):
            acc += taps[a] @ cols[:, a * hw:(a + dz) * hw]
        out[:, z0:z1] = acc.reshape(co, dz, ho, wo)
    return out


def conv3d(x, weight, bias=None, pad=_NOPAD):
    """Valid cross-correlation of the zero-padded input.

    ``pad`` gives ``(low, high)`` zero padding per spatial axis, so 'same'
    and border-aware windowed evaluation are both expressed as padding.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    bias = as_tensor(bias) if bias is not None else None
    if x.ndim != 4 or weight.ndim != 5:
        raise ShapeMismatch(f"conv3d expects [C,D,H,W] input and 5-d kernel, got {x.shape}, {weight.shape}")
    co, ci, kd, kh, kw = weight.shape
    if x.shape[0] != ci:
        raise ShapeMismatch(f"conv3d: input has {x.shape[0]} channels, kernel expects {ci}")
    if bias is not None and bias.shape != (co,):
        raise ShapeMismatch(f"conv3d: bias shape {bias.shape}, expected ({co},)")
    pad = _pairs(pad)
    xd = x.data
    if any(p for pair in pad for p in pair):
        xd = np.pad(xd, ((0, 0),) + pad)
    _, dp, hp, wp = xd.shape
    do, ho, wo = dp - kd + 1, hp - kh + 1, wp - kw + 1
    if do < 1 or ho < 1 or wo < 1:
        raise ShapeMismatch(f"conv3d: input {x.shape} (padded {xd.shape}) smaller than kernel {weight.shape[2:]}")
    hw = ho * wo
    rows = ci * kh * kw
    wd = weight.data
    step = _depth_chunk(rows, hw, do)
    k = kernels.impl
    out = _correlate(xd, wd)
    if bias is not None:
        out += bias.data[:, None, None, None]

    need_x = x.requires_grad

    def backward(g):
        gw = np.zeros_like(wd)
        for z0 in range(0, do, step):
            z1 = min(do, z0 + step)
            dz = z1 - z0
            cols = k.im2col(xd[:, z0:z1 + kd - 1], (kh, kw), (1, 1))
            gm = np.ascontiguousarray(g[:, z0:z1]).reshape(co, dz * hw)
            for a in range(kd):
                gw[:, :, a] += (gm @ cols[:, a * hw:(a + dz) * hw].T).reshape(co, ci, kh, kw)
        gx = None
        if need_x:
            # input gradient = full correlation of g with the flipped, channel-swapped kernel,
            # evaluated only over the unpadded input
            margins = [(kk - 1 - lo, kk - 1 - hi) for kk, (lo, hi) in zip((kd, kh, kw), pad)]
            gpad = np.pad(g, ((0, 0),) + tuple((max(a, 0), max(b, 0)) for a, b in margins))
            # padding wider than the kernel reach: those input samples never reach g
            gpad = gpad[(slice(None),) + tuple(slice(max(-a, 0), n - max(-b, 0))
                                               for (a, b), n in zip(margins, gpad.shape[1:]))]
            flipped = wd.transpose(1, 0, 2, 3, 4)[:, :, ::-1, ::-1, ::-1]
            gx = _correlate(gpad, flipped)
        gb = g.sum(axis=(1, 2, 3)) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return make_result(out, parents, backward)


def conv3d_valid(x, weight, bias=None):
    return conv3d(x, weight, bias)


def conv2d_valid(x, weight, bias=None):
    """2D valid cross-correlation: ``[C_in,H,W] * [C_out,C_in,kh,kw] -> [C_out,H',W']``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 4:
        raise ShapeMismatch(f"conv2d expects [C,H,W] input and 4-d kernel, got {x.shape}, {weight.shape}")
    c, h, w = x.shape
    co, ci, kh, kw = weight.shape
    y = conv3d(reshape(x, (c, 1, h, w)), reshape(weight, (co, ci, 1, kh, kw)), bias)
    return reshape(y, (co,) + y.shape[2:])


def transposed_output_extent(n, k, s, same=False):
    return n * s if same else (n - 1) * s + k


def conv3d_transposed_cropped(x, weight, bias=None, stride=(1, 1, 1), crop=_NOPAD):
    """Transposed convolution (adjoint of a strided convolution), then crop.

    The uncropped output has extent ``(n - 1) * s + k`` per axis; ``crop``
    removes ``(low, high)`` samples per axis from it.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    bias = as_tensor(bias) if bias is not None else None
    if x.ndim != 4 or weight.ndim != 5:
        raise ShapeMismatch(f"conv3d_transposed expects [C,D,H,W] input and 5-d kernel, got {x.shape}, {weight.shape}")
    ci, co, kd, kh, kw = weight.shape
    if x.shape[0] != ci:
        raise ShapeMismatch(f"conv3d_transposed: input has {x.shape[0]} channels, kernel expects {ci}")
    if bias is not None and bias.shape != (co,):
        raise ShapeMismatch(f"conv3d_transposed: bias shape {bias.shape}, expected ({co},)")
    sd, sh, sw = _triple(stride)
    if min(sd, sh, sw) < 1:
        raise ValueError(f"strides must be >= 1, got {stride}")
    crop = _pairs(crop)
    _, d, h, w = x.shape
    full_shape = (co, (d - 1) * sd + kd, (h - 1) * sh + kh, (w - 1) * sw + kw)
    for ext, (lo, hi) in zip(full_shape[1:], crop):
        if lo < 0 or hi < 0 or lo + hi >= ext:
            raise ShapeMismatch(f"conv3d_transposed: crop {crop} too large for output {full_shape}")
    hw = h * w
    rows = co * kh * kw
    wd = weight.data
    taps_t = [np.ascontiguousarray(wd[:, :, a].reshape(ci, rows).T) for a in range(kd)]
    taps = [np.ascontiguousarray(wd[:, :, a].reshape(ci, rows)) for a in range(kd)]
    xm = x.data.reshape(ci, d * hw)
    hf, wf = full_shape[2], full_shape[3]
    step = _depth_chunk(rows, hw, d)
    k = kernels.impl

    full = np.zeros(full_shape, dtype=DTYPE)
    for z0 in range(0, d, step):
        z1 = min(d, z0 + step)
        for a in range(kd):
            y = taps_t[a] @ xm[:, z0 * hw:z1 * hw]
            tmp = np.zeros((co, z1 - z0, hf, wf), dtype=DTYPE)
            k.col2im(y, tmp, (kh, kw), (sh, sw))
            start = z0 * sd + a
            full[:, start:start + sd * (z1 - z0 - 1) + 1:sd] += tmp
    (c0, c1), (c2, c3), (c4, c5) = crop
    out = full[:, c0:full_shape[1] - c1, c2:full_shape[2] - c3, c4:full_shape[3] - c5]
    out = np.ascontiguousarray(out)
    if bias is not None:
        out += bias.data[:, None, None, None]

    need_x = x.requires_grad

    def backward(g):
        gfull = np.zeros(full_shape, dtype=DTYPE)
        gfull[:, c0:full_shape[1] - c1, c2:full_shape[2] - c3, c4:full_shape[3] - c5] = g
        gw = np.zeros_like(wd)
        gx = np.zeros((ci, d * hw), dtype=DTYPE) if need_x else None
        for z0 in range(0, d, step):
            z1 = min(d, z0 + step)
            for a in range(kd):
                start = z0 * sd + a
                ga = gfull[:, start:start + sd * (z1 - z0 - 1) + 1:sd]
                cols = k.im2col(ga, (kh, kw), (sh, sw))
                gw[:, :, a] += (xm[:, z0 * hw:z1 * hw] @ cols.T).reshape(ci, co, kh, kw)
                if need_x:
                    gx[:, z0 * hw:z1 * hw] += taps[a] @ cols
        gb = g.sum(axis=(1, 2, 3)) if bias is not None else None
        return (gx.reshape(x.shape) if need_x else None), gw, gb

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return make_result(out, parents, backward)


def conv3d_transposed(x, weight, bias=None, stride=(1, 1, 1), pad_mode_hw="valid"):
    """Transposed 3D convolution.

    Output depth is ``(D - 1) * sd + kd``.  In-plane extents are
    ``(H - 1) * sh + kh`` for ``pad_mode_hw='valid'`` and ``H * sh`` for
    ``'same'`` (the surplus ``kh - sh`` samples are cropped, low side first
    taking the smaller half).
    """
    if pad_mode_hw not in ("valid", "same"):
        raise ValueError(f"pad_mode_hw must be 'valid' or 'same', got {pad_mode_hw!r}")
    weight = as_tensor(weight)
    _, _, _, kh, kw = weight.shape
    _, sh, sw = _triple(stride)
    crop = [(0, 0), (0, 0), (0, 0)]
    if pad_mode_hw == "same":
        for axis, (kk, ss) in ((1, (kh, sh)), (2, (kw, sw))):
            if kk < ss:
                raise ShapeMismatch(f"'same' transposed conv needs kernel >= stride, got {kk} < {ss}")
            surplus = kk - ss
            crop[axis] = (surplus // 2, surplus - surplus // 2)
    return conv3d_transposed_cropped(x, weight, bias, stride, tuple(crop))


def maxpool2d(x):
    """2x2 max-pool with stride 2; odd trailing row/column dropped.

    The gradient goes to the window's maximum, first element in scan order
    on ties.
    """
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeMismatch(f"maxpool2d needs [C,H,W] with H,W >= 2, got {x.shape}")
    k = kernels.impl
    out, arg = k.maxpool2x2(np.ascontiguousarray(x.data))
    _, h, w = x.shape
    return make_result(out, (x,), lambda g: (k.maxpool2x2_backward(np.ascontiguousarray(g), arg, h, w),))


__all__ = [
    "Tensor",
    "conv2d_valid",
    "conv3d",
    "conv3d_valid",
    "conv3d_transposed",
    "conv3d_transposed_cropped",
    "maxpool2d",
    "transposed_output_extent",
]
