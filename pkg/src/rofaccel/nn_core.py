"""Layer and network semantics, independent of any hardware schedule.

A network is a chain of 1-D convolutional layers (plain multiply-accumulate,
or sign-bit-only for the binarized variant), each followed by the leaky
rectifier and window-2 max pooling, then a fully-connected decision layer.
Per layer the operation order is conv -> activation -> pooling; since the
activation is monotone non-decreasing the opposite order would give the same
values, and that equivalence is covered by tests.

Accumulation order contract: one output sample accumulates its products
kernel-tap innermost (ascending), then input channel (ascending), starting
from the bias.  Every execution schedule reproduces this order, which is what
makes their float32 outputs bit-identical.

Weight containers (``.rfw``) are self-describing: magic ``RFW1``, a uint32
little-endian header length, a JSON header (kind, layer dims, arithmetic
mode, Q-format, endianness tag), then per layer the weights and biases as
little-endian binary32 blocks in layer order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ConfigError, FileFormatError, ShapeError
from .numerics import QFormat, sign_array, to_fixed

REAL32 = "real32"
FIXED = "fixed"

POOL_WINDOW = 2
POOL_STRIDE = 2

WEIGHTS_MAGIC = b"RFW1"


@dataclass(frozen=True)
class Tensor1D:
    """channels x length sample buffer.

    ``data`` is float32 for real32 arithmetic, or int64 mantissas with ``fmt``
    set for fixed-point.  All elements must be finite.
    """

    data: np.ndarray
    fmt: QFormat | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ShapeError(f"Tensor1D data must be 2-D (channels, length), got shape {arr.shape}")
        if self.fmt is None:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            if not np.all(np.isfinite(arr)):
                raise ShapeError("Tensor1D elements must be finite")
        else:
            arr = np.ascontiguousarray(arr, dtype=np.int64)
            if arr.size and (arr.min() < self.fmt.min_mantissa or arr.max() > self.fmt.max_mantissa):
                raise ShapeError(f"mantissas out of range for {self.fmt}")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_real(cls, values, fmt: QFormat | None = None) -> "Tensor1D":
        arr = np.atleast_2d(np.asarray(values, dtype=np.float32))
        if fmt is None:
            return cls(arr)
        return cls(to_fixed(arr, fmt), fmt)


@dataclass(frozen=True)
class KernelSet:
    """Convolution kernels: weights (N, C, F) and bias (N,), stored binary32."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.weights, dtype=np.float32)
        b = np.ascontiguousarray(self.bias, dtype=np.float32)
        if w.ndim != 3:
            raise ShapeError(f"kernel weights must be (out, in, taps), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} kernels")
        if w.shape[2] < 1:
            raise ShapeError("kernel size must be >= 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]


@dataclass(frozen=True)
class ConvLayerSpec:
    kernels: KernelSet
    stride: int = 1
    binary: bool = False
    pool_window: int = POOL_WINDOW
    pool_stride: int = POOL_STRIDE

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if (self.pool_window, self.pool_stride) != (POOL_WINDOW, POOL_STRIDE):
            raise ConfigError("pooling is fixed at window 2 / stride 2")


@dataclass(frozen=True)
class FCLayerSpec:
    weights: np.ndarray  # (out_classes, in_features)
    bias: np.ndarray  # (out_classes,)

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.weights, dtype=np.float32)
        b = np.ascontiguousarray(self.bias, dtype=np.float32)
        if w.ndim != 2 or w.shape[0] < 2:
            raise ShapeError(f"fc weights must be (classes >= 2, features), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError("fc bias shape mismatch")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]


class LayerShape(NamedTuple):
    out_channels: int
    in_channels: int
    kernel_size: int
    stride: int
    conv_len: int  # positions produced by the convolution
    pool_len: int  # positions after max pooling
    binary: bool


CNN = "cnn"
BCNN = "bcnn"
_CONV_COUNT = {CNN: 2, BCNN: 3}


@dataclass(frozen=True)
class NetworkSpec:
    """Full topology plus weights.  Immutable after construction; forward is
    pure, so one instance may be evaluated concurrently."""

    kind: str
    input_length: int
    conv_layers: tuple
    fc: FCLayerSpec
    arithmetic: str = REAL32
    qformat: QFormat | None = None
    input_channels: int = 1

    def __post_init__(self) -> None:
        if self.kind not in _CONV_COUNT:
            raise ConfigError(f"kind must be 'cnn' or 'bcnn', got {self.kind!r}")
        if self.arithmetic not in (REAL32, FIXED):
            raise ConfigError(f"arithmetic must be 'real32' or 'fixed', got {self.arithmetic!r}")
        if self.arithmetic == FIXED and self.qformat is None:
            raise ConfigError("fixed arithmetic requires a qformat")
        object.__setattr__(self, "conv_layers", tuple(self.conv_layers))
        n = _CONV_COUNT[self.kind]
        if len(self.conv_layers) != n:
            raise ConfigError(f"{self.kind} requires exactly {n} conv layers")
        for idx, layer in enumerate(self.conv_layers):
            want_binary = self.kind == BCNN and idx > 0
            if layer.binary != want_binary:
                raise ConfigError(
                    f"layer {idx + 1} binary flag must be {want_binary} for a {self.kind}"
                )
        self.layer_shapes()  # raises ShapeError if the chain does not close

    def layer_shapes(self) -> list:
        """Resolve the shape chain; raises ShapeError on any mismatch."""
        shapes = []
        channels, length = self.input_channels, self.input_length
        for idx, layer in enumerate(self.conv_layers):
            k = layer.kernels
            if k.in_channels != channels:
                raise ShapeError(
                    f"conv layer {idx + 1} expects {k.in_channels} input channels, got {channels}"
                )
            if length < k.kernel_size:
                raise ShapeError(
                    f"conv layer {idx + 1}: input length {length} < kernel size {k.kernel_size}"
                )
            conv_len = kernels.out_length(length, k.kernel_size, layer.stride)
            pool_len = conv_len // 2
            if pool_len < 1:
                raise ShapeError(f"conv layer {idx + 1} pools away to length 0")
            shapes.append(
                LayerShape(k.out_channels, channels, k.kernel_size, layer.stride, conv_len, pool_len, layer.binary)
            )
            channels, length = k.out_channels, pool_len
        if self.fc.in_features != channels * length:
            raise ShapeError(
                f"fc expects {self.fc.in_features} features, conv chain produces {channels * length}"
            )
        return shapes

    def with_arithmetic(self, arithmetic: str, qformat: QFormat | None = None) -> "NetworkSpec":
        return replace(self, arithmetic=arithmetic, qformat=qformat)

    def parameter_count(self) -> int:
        total = sum(l.kernels.weights.size + l.kernels.bias.size for l in self.conv_layers)
        return total + self.fc.weights.size + self.fc.bias.size


class ForwardResult(NamedTuple):
    decision: int
    scores: np.ndarray


def conv1d(x: Tensor1D, k: KernelSet, stride: int = 1) -> Tensor1D:
    """Plain 1-D convolution (canonical accumulation order)."""
    if x.channels != k.in_channels:
        raise ShapeError(f"input has {x.channels} channels, kernels expect {k.in_channels}")
    if x.length < k.kernel_size:
        raise ShapeError(f"input length {x.length} < kernel size {k.kernel_size}")
    if x.fmt is None:
        out = kernels.conv1d_real(x.data[None], k.weights, k.bias, stride)[0]
        return Tensor1D(out)
    wm = to_fixed(k.weights, x.fmt)
    bm = to_fixed(k.bias, x.fmt)
    out = kernels.conv1d_fixed(x.data[None], wm, bm, stride, x.fmt)[0]
    return Tensor1D(out, x.fmt)


def binary_conv1d(x: Tensor1D, k: KernelSet, stride: int = 1, form: str = "sign_mac") -> Tensor1D:
    """Sign-bit convolution: bias + sum of msb(x)*msb(k) over the window.

    ``form`` selects the sign multiply-accumulate path or the XNOR/popcount
    dual (2*popcount(XNOR) - window); the two agree exactly by construction
    and tests enforce it.
    """
    if x.channels != k.in_channels:
        raise ShapeError(f"input has {x.channels} channels, kernels expect {k.in_channels}")
    if x.length < k.kernel_size:
        raise ShapeError(f"input length {x.length} < kernel size {k.kernel_size}")
    if form not in ("sign_mac", "popcount"):
        raise ConfigError(f"unknown binary conv form {form!r}")
    sx = sign_array(x.data)[None]
    sw = sign_array(k.weights)
    if form == "sign_mac":
        scores = kernels.binary_scores(sx, sw, stride)[0]
    else:
        scores = kernels.binary_scores_popcount(sx, sw, stride)[0]
    if x.fmt is None:
        out = k.bias[:, None] + scores.astype(np.float32)
        return Tensor1D(out.astype(np.float32))
    fmt = x.fmt
    bm = to_fixed(k.bias, fmt)
    score_m = np.clip(scores * fmt.scale, fmt.min_mantissa, fmt.max_mantissa)
    out = np.clip(bm[:, None] + score_m, fmt.min_mantissa, fmt.max_mantissa)
    return Tensor1D(out, fmt)


def maxpool1d(x: Tensor1D) -> Tensor1D:
    """Window-2/stride-2 max pooling; a trailing odd element is dropped."""
    if x.fmt is None:
        return Tensor1D(kernels.maxpool1d_real(x.data[None])[0])
    return Tensor1D(kernels.maxpool1d_fixed(x.data[None])[0], x.fmt)


def activate(x: Tensor1D) -> Tensor1D:
    """Leaky rectifier in the tensor's arithmetic (0.25 multiply or shift)."""
    if x.fmt is None:
        return Tensor1D(kernels.leaky_real(x.data[None])[0])
    return Tensor1D(kernels.leaky_fixed(x.data[None])[0], x.fmt)


def fc_forward(x: Tensor1D, fc: FCLayerSpec) -> np.ndarray:
    """Fully-connected scores on the flattened (channel-major) features."""
    flat = x.data.reshape(-1)
    if flat.shape[0] != fc.in_features:
        raise ShapeError(f"fc expects {fc.in_features} features, got {flat.shape[0]}")
    if x.fmt is None:
        return kernels.fc_real(flat[None], fc.weights, fc.bias)[0]
    wm = to_fixed(fc.weights, x.fmt)
    bm = to_fixed(fc.bias, x.fmt)
    return kernels.fc_fixed(flat[None], wm, bm, x.fmt)[0]


def decide(scores: np.ndarray) -> int:
    """Argmax with lowest-index tie-break."""
    return int(np.argmax(scores))


def forward(net: NetworkSpec, x: Tensor1D) -> ForwardResult:
    """Run the network on one sample: conv/binary-conv -> leaky -> pool per
    layer, then the fully-connected decision."""
    _check_input(net, x)
    t = x
    for layer in net.conv_layers:
        t = binary_conv1d(t, layer.kernels, layer.stride) if layer.binary else conv1d(t, layer.kernels, layer.stride)
        t = activate(t)
        t = maxpool1d(t)
    scores = fc_forward(t, net.fc)
    return ForwardResult(decide(scores), scores)


def forward_batch(net: NetworkSpec, windows: np.ndarray):
    """Vectorized forward over (B, C, L) real-valued windows.

    Windows are quantized first when the network runs fixed-point.  Returns
    (decisions (B,), scores (B, classes)); bit-identical per sample to
    :func:`forward`.
    """
    windows = np.ascontiguousarray(windows, dtype=np.float32)
    if windows.ndim != 3:
        raise ShapeError("forward_batch expects (batch, channels, length)")
    if windows.shape[1] != net.input_channels or windows.shape[2] != net.input_length:
        raise ShapeError(
            f"windows {windows.shape[1:]} do not match network input "
            f"({net.input_channels}, {net.input_length})"
        )
    fmt = net.qformat if net.arithmetic == FIXED else None
    data = to_fixed(windows, fmt) if fmt is not None else windows
    for layer in net.conv_layers:
        k = layer.kernels
        if layer.binary:
            sx = sign_array(data)
            scores = kernels.binary_scores(sx, sign_array(k.weights), layer.stride)
            if fmt is None:
                data = (k.bias[None, :, None] + scores.astype(np.float32)).astype(np.float32)
            else:
                sm = np.clip(scores * fmt.scale, fmt.min_mantissa, fmt.max_mantissa)
                data = np.clip(to_fixed(k.bias, fmt)[None, :, None] + sm, fmt.min_mantissa, fmt.max_mantissa)
        else:
            if fmt is None:
                data = kernels.conv1d_real(data, k.weights, k.bias, layer.stride)
            else:
                data = kernels.conv1d_fixed(data, to_fixed(k.weights, fmt), to_fixed(k.bias, fmt), layer.stride, fmt)
        data = kernels.leaky_real(data) if fmt is None else kernels.leaky_fixed(data)
        data = kernels.maxpool1d_real(data) if fmt is None else kernels.maxpool1d_fixed(data)
    flat = data.reshape(data.shape[0], -1)
    if fmt is None:
        scores = kernels.fc_real(flat, net.fc.weights, net.fc.bias)
    else:
        scores = kernels.fc_fixed(flat, to_fixed(net.fc.weights, fmt), to_fixed(net.fc.bias, fmt), fmt)
    return np.argmax(scores, axis=1), scores


def _check_input(net: NetworkSpec, x: Tensor1D) -> None:
    if x.channels != net.input_channels or x.length != net.input_length:
        raise ShapeError(
            f"input ({x.channels}, {x.length}) does not match network "
            f"({net.input_channels}, {net.input_length})"
        )
    fmt = net.qformat if net.arithmetic == FIXED else None
    if x.fmt != fmt:
        raise ShapeError(f"input arithmetic {x.fmt} does not match network {fmt}")


# ---------------------------------------------------------------------------
# Weights container (.rfw)
# ---------------------------------------------------------------------------


def _header_dict(net: NetworkSpec) -> dict:
    layers = []
    for layer in net.conv_layers:
        k = layer.kernels
        layers.append(
            {
                "type": "conv",
                "out_channels": k.out_channels,
                "in_channels": k.in_channels,
                "kernel_size": k.kernel_size,
                "stride": layer.stride,
                "binary": layer.binary,
                "pool_window": layer.pool_window,
                "pool_stride": layer.pool_stride,
            }
        )
    layers.append({"type": "fc", "in_features": net.fc.in_features, "out_classes": net.fc.out_classes})
    header = {
        "format": "rofaccel-weights",
        "version": 1,
        "endianness": "little",
        "kind": net.kind,
        "arithmetic": net.arithmetic,
        "qformat": None
        if net.qformat is None
        else {"total_bits": net.qformat.total_bits, "frac_bits": net.qformat.frac_bits},
        "input_channels": net.input_channels,
        "input_length": net.input_length,
        "layers": layers,
    }
    return header


def save_weights(net: NetworkSpec, path) -> None:
    header = json.dumps(_header_dict(net), sort_keys=True).encode("utf-8")
    blocks = []
    for layer in net.conv_layers:
        blocks.append(layer.kernels.weights.astype("<f4").tobytes())
        blocks.append(layer.kernels.bias.astype("<f4").tobytes())
    blocks.append(net.fc.weights.astype("<f4").tobytes())
    blocks.append(net.fc.bias.astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for block in blocks:
            fh.write(block)


def load_weights(path) -> NetworkSpec:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != WEIGHTS_MAGIC:
        raise FileFormatError(f"{path}: not a rofaccel weights file")
    (hlen,) = struct.unpack_from("<I", blob, 4)
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: bad header: {exc}") from exc
    if header.get("format") != "rofaccel-weights" or header.get("version") != 1:
        raise FileFormatError(f"{path}: unsupported weights format/version")
    offset = 8 + hlen

    def take(count: int, shape) -> np.ndarray:
        nonlocal offset
        nbytes = count * 4
        if offset + nbytes > len(blob):
            raise FileFormatError(f"{path}: truncated weight block")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += nbytes
        return arr.copy()

    conv_layers = []
    fc = None
    for spec in header["layers"]:
        if spec["type"] == "conv":
            n, c, f = spec["out_channels"], spec["in_channels"], spec["kernel_size"]
            w = take(n * c * f, (n, c, f))
            b = take(n, (n,))
            conv_layers.append(ConvLayerSpec(KernelSet(w, b), stride=spec["stride"], binary=spec["binary"]))
        elif spec["type"] == "fc":
            o, i = spec["out_classes"], spec["in_features"]
            fc = FCLayerSpec(take(o * i, (o, i)), take(o, (o,)))
        else:
            raise FileFormatError(f"{path}: unknown layer type {spec['type']!r}")
    if fc is None:
        raise FileFormatError(f"{path}: missing fc layer")
    if offset != len(blob):
        raise FileFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    qf = header.get("qformat")
    return NetworkSpec(
        kind=header["kind"],
        input_length=header["input_length"],
        conv_layers=tuple(conv_layers),
        fc=fc,
        arithmetic=header["arithmetic"],
        qformat=None if qf is None else QFormat(qf["total_bits"], qf["frac_bits"]),
        input_channels=header["input_channels"],
    )
