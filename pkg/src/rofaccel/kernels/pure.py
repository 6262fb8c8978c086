"""Pure-numpy kernel backend.

Every kernel reproduces the canonical accumulation order bit-for-bit: for one
output sample the products are added kernel-tap innermost (ascending), then
input channel (ascending), starting from the bias.  The float32 kernels
vectorize across batch and output position only -- those axes never share an
accumulator -- while the tap/channel loops stay explicit so each elementwise
numpy op performs exactly one IEEE round per output, in the same sequence as
the scalar definition (and as the compiled backend).
"""

from __future__ import annotations

import numpy as np

F32 = np.float32
QUARTER = F32(0.25)


def out_length(length: int, kernel_size: int, stride: int) -> int:
    return (length - kernel_size) // stride + 1


def conv1d_real(x: np.ndarray, w: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    """Batched 1-D convolution, float32.

    x: (B, C, L), w: (N, C, F), bias: (N,) -> (B, N, L_out)
    """
    B, C, L = x.shape
    N, _, F = w.shape
    lo = out_length(L, F, stride)
    acc = np.broadcast_to(bias[None, :, None], (B, N, lo)).astype(np.float32, copy=True)
    for n in range(C):
        for f in range(F):
            taps = x[:, n, f : f + stride * lo : stride]  # (B, lo)
            acc = acc + taps[:, None, :] * w[None, :, n, f, None]
    return acc


def conv1d_fixed(
    x: np.ndarray,
    w: np.ndarray,
    bias: np.ndarray,
    stride: int,
    frac_bits: int,
    lo_m: int,
    hi_m: int,
) -> np.ndarray:
    """Batched fixed-point convolution on int64 mantissas.

    Each product keeps the full width, floors back by ``frac_bits`` and
    saturates; each accumulate saturates.  Same traversal as the real path.
    """
    B, C, L = x.shape
    N, _, F = w.shape
    lo = out_length(L, F, stride)
    acc = np.broadcast_to(bias[None, :, None], (B, N, lo)).astype(np.int64, copy=True)
    for n in range(C):
        for f in range(F):
            taps = x[:, n, f : f + stride * lo : stride]
            full = taps[:, None, :] * w[None, :, n, f, None]
            p = np.clip(full >> frac_bits, lo_m, hi_m)
            acc = np.clip(acc + p, lo_m, hi_m)
    return acc


def binary_scores(sx: np.ndarray, sw: np.ndarray, stride: int) -> np.ndarray:
    """Sign multiply-accumulate: sx (B, C, L) and sw (N, C, F) hold +-1.

    Returns the raw integer window scores (B, N, L_out); integer addition is
    exact, so no ordering constraint applies.
    """
    B, C, L = sx.shape
    N, _, F = sw.shape
    lo = out_length(L, F, stride)
    windows = np.empty((B, C, lo, F), dtype=np.int64)
    for f in range(F):
        windows[:, :, :, f] = sx[:, :, f : f + stride * lo : stride]
    return np.einsum("bclf,ncf->bnl", windows, sw.astype(np.int64))


_POP_M1 = np.uint64(0x5555555555555555)
_POP_M2 = np.uint64(0x3333333333333333)
_POP_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_POP_H = np.uint64(0x0101010101010101)


def _popcount_u64(v: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(v).astype(np.int64)
    v = v - ((v >> np.uint64(1)) & _POP_M1)
    v = (v & _POP_M2) + ((v >> np.uint64(2)) & _POP_M2)
    v = (v + (v >> np.uint64(4))) & _POP_M4
    return ((v * _POP_H) >> np.uint64(56)).astype(np.int64)


def _pack_words(bits: np.ndarray) -> np.ndarray:
    """Pack (..., W) 0/1 bits into (..., ceil(W/64)) uint64 words, LSB first."""
    W = bits.shape[-1]
    n_words = (W + 63) // 64
    padded = np.zeros(bits.shape[:-1] + (n_words * 64,), dtype=np.uint64)
    padded[..., :W] = bits
    padded = padded.reshape(bits.shape[:-1] + (n_words, 64))
    shifts = np.arange(64, dtype=np.uint64)
    return np.bitwise_or.reduce(padded << shifts, axis=-1)


def binary_scores_popcount(sx: np.ndarray, sw: np.ndarray, stride: int) -> np.ndarray:
    """XNOR/popcount form of the window score: 2*popcount(XNOR) - window.

    Shared verification form (single implementation for both backends); must
    agree exactly with :func:`binary_scores`.
    """
    B, C, L = sx.shape
    N, _, F = sw.shape
    lo = out_length(L, F, stride)
    W = C * F
    windows = np.empty((B, lo, C, F), dtype=np.uint64)
    for f in range(F):
        windows[:, :, :, f] = (sx[:, :, f : f + stride * lo : stride] > 0).transpose(0, 2, 1)
    xw = _pack_words(windows.reshape(B, lo, W))  # (B, lo, words)
    ww = _pack_words((sw > 0).reshape(N, W).astype(np.uint64))  # (N, words)
    n_words = xw.shape[-1]
    # Mask off the padding bits so XNOR does not count them.
    mask = np.zeros(n_words, dtype=np.uint64)
    full, rem = divmod(W, 64)
    mask[:full] = np.uint64(0xFFFFFFFFFFFFFFFF)
    if rem:
        mask[full] = np.uint64((1 << rem) - 1)
    xnor = (~(xw[:, :, None, :] ^ ww[None, None, :, :])) & mask
    pop = _popcount_u64(xnor).sum(axis=-1)  # (B, lo, N)
    return (2 * pop - W).transpose(0, 2, 1)


def maxpool1d_real(x: np.ndarray) -> np.ndarray:
    """Window-2/stride-2 max; a trailing odd element is dropped.  Ties keep
    the earlier element (relevant only for signed zeros)."""
    P = x.shape[-1] // 2
    a = x[..., 0 : 2 * P : 2]
    b = x[..., 1 : 2 * P : 2]
    return np.where(a >= b, a, b)


maxpool1d_fixed = maxpool1d_real  # same comparison semantics on mantissas


def leaky_real(x: np.ndarray) -> np.ndarray:
    return np.where(x < 0, QUARTER * x, x)


def leaky_fixed(x: np.ndarray) -> np.ndarray:
    return np.where(x < 0, x >> 2, x)


def fc_real(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Fully-connected scores, canonical ascending-index accumulation.

    x: (B, I), w: (O, I), bias: (O,) -> (B, O)
    """
    B, I = x.shape
    O = w.shape[0]
    acc = np.broadcast_to(bias[None, :], (B, O)).astype(np.float32, copy=True)
    for j in range(I):
        acc = acc + x[:, j, None] * w[None, :, j]
    return acc


def fc_fixed(
    x: np.ndarray, w: np.ndarray, bias: np.ndarray, frac_bits: int, lo_m: int, hi_m: int
) -> np.ndarray:
    B, I = x.shape
    O = w.shape[0]
    acc = np.broadcast_to(bias[None, :], (B, O)).astype(np.int64, copy=True)
    for j in range(I):
        full = x[:, j, None].astype(np.int64) * w[None, :, j].astype(np.int64)
        p = np.clip(full >> frac_bits, lo_m, hi_m)
        acc = np.clip(acc + p, lo_m, hi_m)
    return acc
