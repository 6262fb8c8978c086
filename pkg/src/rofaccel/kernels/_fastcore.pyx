# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core.

Scalar loop nests in C float / long long arithmetic.  Per-output accumulation
order is the canonical one (kernel tap innermost ascending, then input
channel), and the module is compiled with -ffp-contract=off so every multiply
and add rounds separately; results are bit-identical to the pure backend.
"""

import numpy as np

cimport numpy as cnp


def out_length(int length, int kernel_size, int stride):
    return (length - kernel_size) // stride + 1


def conv1d_real(float[:, :, ::1] x, float[:, :, ::1] w, float[::1] bias, int stride):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t N = w.shape[0], F = w.shape[2]
    cdef Py_ssize_t lo = (L - F) // stride + 1
    out = np.empty((B, N, lo), dtype=np.float32)
    cdef float[:, :, ::1] o = out
    cdef Py_ssize_t b, m, i, n, f, base
    cdef float acc, p
    for b in range(B):
        for m in range(N):
            for i in range(lo):
                acc = bias[m]
                base = stride * i
                for n in range(C):
                    for f in range(F):
                        p = x[b, n, base + f] * w[m, n, f]
                        acc = acc + p
                o[b, m, i] = acc
    return out


def conv1d_fixed(long long[:, :, ::1] x, long long[:, :, ::1] w, long long[::1] bias,
                 int stride, int frac_bits, long long lo_m, long long hi_m):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t N = w.shape[0], F = w.shape[2]
    cdef Py_ssize_t lo = (L - F) // stride + 1
    out = np.empty((B, N, lo), dtype=np.int64)
    cdef long long[:, :, ::1] o = out
    cdef Py_ssize_t b, m, i, n, f, base
    cdef long long acc, p
    for b in range(B):
        for m in range(N):
            for i in range(lo):
                acc = bias[m]
                base = stride * i
                for n in range(C):
                    for f in range(F):
                        p = (x[b, n, base + f] * w[m, n, f]) >> frac_bits
                        if p < lo_m:
                            p = lo_m
                        elif p > hi_m:
                            p = hi_m
                        acc = acc + p
                        if acc < lo_m:
                            acc = lo_m
                        elif acc > hi_m:
                            acc = hi_m
                o[b, m, i] = acc
    return out


def binary_scores(signed char[:, :, ::1] sx, signed char[:, :, ::1] sw, int stride):
    cdef Py_ssize_t B = sx.shape[0], C = sx.shape[1], L = sx.shape[2]
    cdef Py_ssize_t N = sw.shape[0], F = sw.shape[2]
    cdef Py_ssize_t lo = (L - F) // stride + 1
    out = np.empty((B, N, lo), dtype=np.int64)
    cdef long long[:, :, ::1] o = out
    cdef Py_ssize_t b, m, i, n, f, base
    cdef long long score
    for b in range(B):
        for m in range(N):
            for i in range(lo):
                score = 0
                base = stride * i
                for n in range(C):
                    for f in range(F):
                        score += sx[b, n, base + f] * sw[m, n, f]
                o[b, m, i] = score
    return out


def maxpool1d_real(float[:, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t P = L // 2
    out = np.empty((B, C, P), dtype=np.float32)
    cdef float[:, :, ::1] o = out
    cdef Py_ssize_t b, c, j
    cdef float a, bb
    for b in range(B):
        for c in range(C):
            for j in range(P):
                a = x[b, c, 2 * j]
                bb = x[b, c, 2 * j + 1]
                o[b, c, j] = a if a >= bb else bb
    return out


def maxpool1d_fixed(long long[:, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t P = L // 2
    out = np.empty((B, C, P), dtype=np.int64)
    cdef long long[:, :, ::1] o = out
    cdef Py_ssize_t b, c, j
    cdef long long a, bb
    for b in range(B):
        for c in range(C):
            for j in range(P):
                a = x[b, c, 2 * j]
                bb = x[b, c, 2 * j + 1]
                o[b, c, j] = a if a >= bb else bb
    return out


def leaky_real(float[:, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    out = np.empty((B, C, L), dtype=np.float32)
    cdef float[:, :, ::1] o = out
    cdef float quarter = 0.25
    cdef Py_ssize_t b, c, i
    cdef float v
    for b in range(B):
        for c in range(C):
            for i in range(L):
                v = x[b, c, i]
                o[b, c, i] = quarter * v if v < 0 else v
    return out


def leaky_fixed(long long[:, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    out = np.empty((B, C, L), dtype=np.int64)
    cdef long long[:, :, ::1] o = out
    cdef Py_ssize_t b, c, i
    cdef long long v
    for b in range(B):
        for c in range(C):
            for i in range(L):
                v = x[b, c, i]
                o[b, c, i] = v >> 2 if v < 0 else v
    return out


def fc_real(float[:, ::1] x, float[:, ::1] w, float[::1] bias):
    cdef Py_ssize_t B = x.shape[0], I = x.shape[1], O = w.shape[0]
    out = np.empty((B, O), dtype=np.float32)
    cdef float[:, ::1] o = out
    cdef Py_ssize_t b, c, j
    cdef float acc, p
    for b in range(B):
        for c in range(O):
            acc = bias[c]
            for j in range(I):
                p = x[b, j] * w[c, j]
                acc = acc + p
            o[b, c] = acc
    return out


def fc_fixed(long long[:, ::1] x, long long[:, ::1] w, long long[::1] bias,
             int frac_bits, long long lo_m, long long hi_m):
    cdef Py_ssize_t B = x.shape[0], I = x.shape[1], O = w.shape[0]
    out = np.empty((B, O), dtype=np.int64)
    cdef long long[:, ::1] o = out
    cdef Py_ssize_t b, c, j
    cdef long long acc, p
    for b in range(B):
        for c in range(O):
            acc = bias[c]
            for j in range(I):
                p = (x[b, j] * w[c, j]) >> frac_bits
                if p < lo_m:
                    p = lo_m
                elif p > hi_m:
                    p = hi_m
                acc = acc + p
                if acc < lo_m:
                    acc = lo_m
                elif acc > hi_m:
                    acc = hi_m
            o[b, c] = acc
    return out
