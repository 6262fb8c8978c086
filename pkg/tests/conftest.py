import numpy as np
import pytest

from rofaccel.nn_core import (
    BCNN,
    CNN,
    ConvLayerSpec,
    FCLayerSpec,
    KernelSet,
    NetworkSpec,
    Tensor1D,
)
from rofaccel.numerics import Q16_8, to_fixed


def random_conv(rng, out_ch, in_ch, taps, binary=False, stride=1):
    w = rng.uniform(-1.0, 1.0, (out_ch, in_ch, taps)).astype(np.float32)
    b = rng.uniform(-0.5, 0.5, out_ch).astype(np.float32)
    return ConvLayerSpec(KernelSet(w, b), stride=stride, binary=binary)


def random_network(rng, kind=CNN, min_window=1):
    """Random small network with a valid shape chain.

    ``min_window`` lower-bounds in_channels*kernel_size per layer (some
    schedule properties only hold with non-trivial unroll windows).
    """
    while True:
        length = int(rng.integers(16, 44))
        taps1 = int(rng.integers(max(2, min_window), 6))
        n1 = int(rng.integers(2, 7))
        layers = [random_conv(rng, n1, 1, taps1)]
        channels = n1
        cur = (length - taps1) // 1 + 1
        cur //= 2
        extra = 2 if kind == BCNN else 1
        ok = cur >= 2
        for i in range(extra):
            taps = int(rng.integers(2, min(6, cur + 1))) if cur >= 2 else 2
            n = int(rng.integers(2, 7))
            if cur < taps:
                ok = False
                break
            layers.append(random_conv(rng, n, channels, taps, binary=kind == BCNN))
            channels = n
            cur = (cur - taps) + 1
            cur //= 2
            if cur < 1:
                ok = False
                break
        if not ok:
            continue
        classes = int(rng.integers(2, 5))
        fc = FCLayerSpec(
            rng.uniform(-1.0, 1.0, (classes, channels * cur)).astype(np.float32),
            rng.uniform(-0.5, 0.5, classes).astype(np.float32),
        )
        return NetworkSpec(kind=kind, input_length=length, conv_layers=tuple(layers), fc=fc)


def random_input(rng, net, fixed=False):
    x = rng.uniform(-1.5, 1.5, (net.input_channels, net.input_length)).astype(np.float32)
    if fixed:
        return Tensor1D(to_fixed(x, Q16_8), Q16_8)
    return Tensor1D(x)


@pytest.fixture
def rng():
    return np.random.default_rng(0xA5A5)
