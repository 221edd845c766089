"""Pure-numpy implementations of the gather/scatter kernels.

These are the reference path and the fallback when the compiled extension
is unavailable.  Layouts match ``_ckernels.pyx`` exactly:

* ``im2col`` gathers in-plane windows only.  For ``xp`` of shape
  ``[C, D, H, W]`` the result has rows ordered ``(c, b, e)`` (channel, then
  window row/column offset) and columns ordered ``(z, y, x)`` over *every*
  input depth ``z`` and every output in-plane position.  Depth taps of a 3D
  kernel are then contiguous column windows of this matrix.
* ``col2im`` is the exact adjoint: it scatter-adds such a matrix into
  ``out`` in place.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def out_extent(n, k, s):
    return (n - k) // s + 1


def im2col(xp, kshape, stride):
    kh, kw = kshape
    sh, sw = stride
    c, d = xp.shape[:2]
    ho = out_extent(xp.shape[2], kh, sh)
    wo = out_extent(xp.shape[3], kw, sw)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw][:, :, :ho, :wo]
    cols = np.ascontiguousarray(win.transpose(0, 4, 5, 1, 2, 3))
    return cols.reshape(c * kh * kw, d * ho * wo)


def col2im(cols, out, kshape, stride):
    """Scatter-add ``cols`` into ``out`` (in place)."""
    kh, kw = kshape
    sh, sw = stride
    c, d = out.shape[:2]
    ho = out_extent(out.shape[2], kh, sh)
    wo = out_extent(out.shape[3], kw, sw)
    view = cols.reshape(c, kh, kw, d, ho, wo)
    for b in range(kh):
        for e in range(kw):
            out[:, :, b: b + sh * (ho - 1) + 1: sh, e: e + sw * (wo - 1) + 1: sw] += view[:, b, e]


def maxpool2x2(x):
    """Return (pooled, argmax-in-window) for disjoint 2x2 windows; floor on odd edges."""
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    win = x[:, : 2 * h2, : 2 * w2].reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4)
    win = win.reshape(c, h2, w2, 4)
    arg = np.argmax(win, axis=3).astype(np.int8)  # first occurrence on ties
    out = np.take_along_axis(win, arg[..., None].astype(np.intp), axis=3)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool2x2_backward(grad, arg, h, w):
    c, h2, w2 = grad.shape
    gx = np.zeros((c, h, w), dtype=grad.dtype)
    win = np.zeros((c, h2, w2, 4), dtype=grad.dtype)
    np.put_along_axis(win, arg[..., None].astype(np.intp), grad[..., None], axis=3)
    gx[:, : 2 * h2, : 2 * w2] = (
        win.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, 2 * h2, 2 * w2)
    )
    return gx
