"""Independent reference implementations used as test oracles.

Everything here is written straight from the operation definitions (scalar
loops, python integers, closed-form counting) without touching the package's
kernel or trace code, so a bug cannot hide on both sides of a comparison.
"""

import math

import numpy as np

F32 = np.float32


def conv1d_real_oracle(x, w, bias, stride=1):
    """Naive triple-loop 1-D convolution with per-step binary32 rounding."""
    C, L = x.shape
    N, _, F = w.shape
    lo = (L - F) // stride + 1
    out = np.empty((N, lo), dtype=np.float32)
    for m in range(N):
        for i in range(lo):
            acc = F32(bias[m])
            for n in range(C):
                for f in range(F):
                    acc = F32(acc + F32(F32(x[n, stride * i + f]) * F32(w[m, n, f])))
            out[m, i] = acc
    return out


def conv1d_fixed_oracle(xm, wm, bm, stride, frac_bits, lo_m, hi_m):
    """Same loop nest on python integers: truncating multiply, saturating add."""
    C, L = xm.shape
    N, _, F = wm.shape
    lo = (L - F) // stride + 1
    out = np.empty((N, lo), dtype=np.int64)
    for m in range(N):
        for i in range(lo):
            acc = int(bm[m])
            for n in range(C):
                for f in range(F):
                    p = (int(xm[n, stride * i + f]) * int(wm[m, n, f])) >> frac_bits
                    p = min(max(p, lo_m), hi_m)
                    acc = min(max(acc + p, lo_m), hi_m)
            out[m, i] = acc
    return out


def _sign(v) -> int:
    if isinstance(v, (int, np.integer)):
        return -1 if int(v) < 0 else 1
    return -1 if math.copysign(1.0, float(v)) < 0 else 1


def binary_scores_oracle(x, w, stride=1):
    """Sign multiply-accumulate window scores (exact integers)."""
    C, L = x.shape
    N, _, F = w.shape
    lo = (L - F) // stride + 1
    out = np.empty((N, lo), dtype=np.int64)
    for m in range(N):
        for i in range(lo):
            score = 0
            for n in range(C):
                for f in range(F):
                    score += _sign(x[n, stride * i + f]) * _sign(w[m, n, f])
            out[m, i] = score
    return out


def fc_oracle(x, w, bias):
    """Dot-product scores with binary32 sequential accumulation."""
    O, I = w.shape
    out = np.empty(O, dtype=np.float32)
    for c in range(O):
        acc = F32(bias[c])
        for j in range(I):
            acc = F32(acc + F32(F32(x[j]) * F32(w[c, j])))
        out[c] = acc
    return out


def leaky_f32_oracle(v):
    v = F32(v)
    return v if v >= 0 else F32(F32(0.25) * v)


def dual_ended_layer_oracle(x, w, bias, stride=1):
    """Literal dual-ended traversal of one conv layer (conv + leaky + pool).

    Output positions i and I-1-i are produced in the same step, walking i
    from 0 to ceil(I/2); an odd-length map computes the middle position once
    on the low side.  Activation applies as each position's accumulation
    finishes; pooling fires when a pair completes.  Values must be
    bit-identical to the staged canonical path because no single output's
    accumulation is reordered.
    """
    C, L = x.shape
    N, _, F = w.shape
    I = (L - F) // stride + 1

    def position(m, p):
        acc = F32(bias[m])
        for n in range(C):
            for f in range(F):
                acc = F32(acc + F32(F32(x[n, stride * p + f]) * F32(w[m, n, f])))
        return leaky_f32_oracle(acc)

    act = np.empty((N, I), dtype=np.float32)
    pooled = np.empty((N, I // 2), dtype=np.float32)
    for m in range(N):
        for i in range((I + 1) // 2):
            hi = I - 1 - i
            act[m, i] = position(m, i)
            if hi != i:
                act[m, hi] = position(m, hi)
            for p in (i, hi):
                if p % 2 == 1 and p - 1 >= 0 and p // 2 < I // 2:
                    a, b = act[m, p - 1], act[m, p]
                    pooled[m, p // 2] = a if a >= b else b
    return pooled


def sequential_cycles_oracle(net, profile) -> int:
    """Closed-form loop-nest cycle count for the sequential schedule,
    written independently of the trace builder."""
    c = profile.cycle_costs
    total = profile.inference_overhead_cycles
    fixed_mode = net.arithmetic == "fixed"
    for shape in net.layer_shapes():
        N, C, F, L, P = shape.out_channels, shape.in_channels, shape.kernel_size, shape.conv_len, shape.pool_len
        if shape.binary:
            W = C * F
            total += N * L * (W * (c["XNOR"] + c["POPCOUNT_BIT"]) + c["SHIFT"] + c["FSUB"] + c["FADD"])
            total += N * L * (c["FCMP"] + c["SHIFT"])
        else:
            total += N * L * C * F * (c["FMUL"] + c["FADD"])
            act = c["FCMP"] + (c["SHIFT"] if fixed_mode else c["FMUL"])
            total += N * L * act
        total += N * P * c["FCMP"]
    O, I = net.fc.out_classes, net.fc.in_features
    total += O * I * (c["FMUL"] + c["FADD"]) + (O - 1) * c["FCMP"]
    return total


def accuracy_oracle(decisions, labels) -> float:
    hits = sum(1 for d, l in zip(decisions, labels) if int(d) == int(l))
    return hits / len(labels)
