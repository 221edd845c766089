"""Naive nested-loop references, independent of the library's GEMM formulation."""

import numpy as np


def conv3d_naive(x, w, b=None, pad=((0, 0), (0, 0), (0, 0))):
    xp = np.pad(x, ((0, 0),) + tuple(pad))
    co, ci, kd, kh, kw = w.shape
    _, d, h, ww = xp.shape
    out = np.zeros((co, d - kd + 1, h - kh + 1, ww - kw + 1))
    for o in range(co):
        for z in range(out.shape[1]):
            for y in range(out.shape[2]):
                for x_ in range(out.shape[3]):
                    s = 0.0
                    for c in range(ci):
                        for a in range(kd):
                            for p in range(kh):
                                for q in range(kw):
                                    s += xp[c, z + a, y + p, x_ + q] * w[o, c, a, p, q]
                    out[o, z, y, x_] = s + (b[o] if b is not None else 0.0)
    return out


def conv2d_naive(x, w, b=None):
    co, ci, kh, kw = w.shape
    _, h, ww = x.shape
    out = np.zeros((co, h - kh + 1, ww - kw + 1))
    for o in range(co):
        for y in range(out.shape[1]):
            for x_ in range(out.shape[2]):
                s = 0.0
                for c in range(ci):
                    for p in range(kh):
                        for q in range(kw):
                            s += x[c, y + p, x_ + q] * w[o, c, p, q]
                out[o, y, x_] = s + (b[o] if b is not None else 0.0)
    return out


def conv3d_transposed_naive(x, w, b=None, stride=(1, 1, 1), crop=((0, 0), (0, 0), (0, 0))):
    """Scatter definition: every input voxel adds its kernel-weighted footprint."""
    ci, co, kd, kh, kw = w.shape
    _, d, h, ww = x.shape
    sd, sh, sw = stride
    full = np.zeros((co, (d - 1) * sd + kd, (h - 1) * sh + kh, (ww - 1) * sw + kw))
    for c in range(ci):
        for z in range(d):
            for y in range(h):
                for x_ in range(ww):
                    v = x[c, z, y, x_]
                    for o in range(co):
                        for a in range(kd):
                            for p in range(kh):
                                for q in range(kw):
                                    full[o, z * sd + a, y * sh + p, x_ * sw + q] += v * w[c, o, a, p, q]
    (c0, c1), (c2, c3), (c4, c5) = crop
    out = full[:, c0:full.shape[1] - c1, c2:full.shape[2] - c3, c4:full.shape[3] - c5].copy()
    if b is not None:
        out += b[:, None, None, None]
    return out


def maxpool2x2_naive(x):
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for k in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                out[k, i, j] = max(x[k, 2 * i + a, 2 * j + b] for a in range(2) for b in range(2))
    return out
