# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled gather/scatter kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _ext(Py_ssize_t n, Py_ssize_t k, Py_ssize_t s) nogil:
    return (n - k) // s + 1


def im2col(const double[:, :, :, :] xp, kshape, stride):
    cdef Py_ssize_t kh = kshape[0], kw = kshape[1]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t C = xp.shape[0], D = xp.shape[1]
    cdef Py_ssize_t ho = _ext(xp.shape[2], kh, sh)
    cdef Py_ssize_t wo = _ext(xp.shape[3], kw, sw)
    out = np.empty((C * kh * kw, D * ho * wo), dtype=np.float64)
    cdef double[:, ::1] cols = out
    cdef Py_ssize_t c, b, e, z, y, x, row, col, yi
    with nogil:
        for c in range(C):
            for b in range(kh):
                for e in range(kw):
                    row = (c * kh + b) * kw + e
                    col = 0
                    for z in range(D):
                        for y in range(ho):
                            yi = y * sh + b
                            if sw == 1:
                                for x in range(wo):
                                    cols[row, col + x] = xp[c, z, yi, x + e]
                            else:
                                for x in range(wo):
                                    cols[row, col + x] = xp[c, z, yi, x * sw + e]
                            col += wo
    return out


def col2im(const double[:, ::1] cols, double[:, :, :, :] out, kshape, stride):
    cdef Py_ssize_t kh = kshape[0], kw = kshape[1]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t C = out.shape[0], D = out.shape[1]
    cdef Py_ssize_t ho = _ext(out.shape[2], kh, sh)
    cdef Py_ssize_t wo = _ext(out.shape[3], kw, sw)
    cdef Py_ssize_t c, b, e, z, y, x, row, col, yi
    # tap-major order matches the numpy fallback, so both backends add the
    # contributions to each element in the same sequence
    with nogil:
        for c in range(C):
            for b in range(kh):
                for e in range(kw):
                    row = (c * kh + b) * kw + e
                    col = 0
                    for z in range(D):
                        for y in range(ho):
                            yi = y * sh + b
                            if sw == 1:
                                for x in range(wo):
                                    out[c, z, yi, x + e] += cols[row, col + x]
                            else:
                                for x in range(wo):
                                    out[c, z, yi, x * sw + e] += cols[row, col + x]
                            col += wo


def maxpool2x2(const double[:, :, ::1] x):
    cdef Py_ssize_t C = x.shape[0], h2 = x.shape[1] // 2, w2 = x.shape[2] // 2
    out_arr = np.empty((C, h2, w2), dtype=np.float64)
    arg_arr = np.empty((C, h2, w2), dtype=np.int8)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.int8_t[:, :, ::1] arg = arg_arr
    cdef Py_ssize_t c, i, j, k
    cdef double best, v
    cdef cnp.int8_t bi
    with nogil:
        for c in range(C):
            for i in range(h2):
                for j in range(w2):
                    best = x[c, 2 * i, 2 * j]
                    bi = 0
                    for k in range(1, 4):
                        v = x[c, 2 * i + (k >> 1), 2 * j + (k & 1)]
                        if v > best:
                            best = v
                            bi = <cnp.int8_t>k
                    out[c, i, j] = best
                    arg[c, i, j] = bi
    return out_arr, arg_arr


def maxpool2x2_backward(const double[:, :, ::1] grad, const cnp.int8_t[:, :, ::1] arg,
                        Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t C = grad.shape[0], h2 = grad.shape[1], w2 = grad.shape[2]
    gx_arr = np.zeros((C, h, w), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t c, i, j, k
    with nogil:
        for c in range(C):
            for i in range(h2):
                for j in range(w2):
                    k = arg[c, i, j]
                    gx[c, 2 * i + (k >> 1), 2 * j + (k & 1)] = grad[c, i, j]
    return gx_arr
