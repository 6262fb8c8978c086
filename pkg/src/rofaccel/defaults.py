"""Bundled default configurations.

The layer sizes here are desk-scale choices (the published topology diagrams
fix the layer count, not the sizes): input 1x36, two conv layers for the
plain network, three (first real, rest binarized) for the binarized one.
Together with the default resource profile they land the modeled
cross-schedule latency ratios on the measured ones; see
:mod:`rofaccel.cost_model` for which profile entries are fitted.

Everything is overridable; these are starting points, recorded in one place
so tests and the CLI agree.
"""

from __future__ import annotations

import importlib.resources
import json

import numpy as np

from .channel import ChannelConfig, SweepPoint
from .errors import ConfigError
from .nn_core import (
    BCNN,
    CNN,
    FIXED,
    REAL32,
    ConvLayerSpec,
    FCLayerSpec,
    KernelSet,
    NetworkSpec,
)
from .numerics import Q16_8, QFormat
from .training import TrainConfig

#: Adopted hard-decision FEC threshold (7% overhead convention); the decision
#: scheme is considered link-clean below this BER.
FEC_BER_LIMIT = 3.8e-3

#: Required argmax agreement between real32 and Q16.8 evaluation of one
#: trained network (quantization tolerance).
ARGMAX_PARITY_MIN = 0.99

DEFAULT_QFORMAT: QFormat = Q16_8

_INIT_SEED = 0xC0FFEE


def _random_conv(rng, out_ch: int, in_ch: int, taps: int, binary: bool = False) -> ConvLayerSpec:
    w = rng.uniform(-1.0, 1.0, (out_ch, in_ch, taps)).astype(np.float32)
    b = rng.uniform(-0.5, 0.5, out_ch).astype(np.float32)
    return ConvLayerSpec(KernelSet(w, b), stride=1, binary=binary)


def _random_fc(rng, classes: int, features: int) -> FCLayerSpec:
    w = rng.uniform(-1.0, 1.0, (classes, features)).astype(np.float32)
    b = rng.uniform(-0.5, 0.5, classes).astype(np.float32)
    return FCLayerSpec(w, b)


def build_default_cnn(arithmetic: str = REAL32, qformat: QFormat | None = None,
                      seed: int = _INIT_SEED) -> NetworkSpec:
    """Default plain network: 1x36 -> conv(8,F5) -> conv(16,F5) -> fc(96->2)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    if arithmetic == FIXED and qformat is None:
        qformat = DEFAULT_QFORMAT
    return NetworkSpec(
        kind=CNN,
        input_length=36,
        conv_layers=(
            _random_conv(rng, 8, 1, 5),
            _random_conv(rng, 16, 8, 5),
        ),
        fc=_random_fc(rng, 2, 96),
        arithmetic=arithmetic,
        qformat=qformat,
    )


def build_default_bcnn(arithmetic: str = REAL32, qformat: QFormat | None = None,
                       seed: int = _INIT_SEED) -> NetworkSpec:
    """Default binarized network: 1x36 -> conv(8,F5) -> bin-conv(12,F5)
    -> bin-conv(16,F3) -> fc(32->2)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    if arithmetic == FIXED and qformat is None:
        qformat = DEFAULT_QFORMAT
    return NetworkSpec(
        kind=BCNN,
        input_length=36,
        conv_layers=(
            _random_conv(rng, 8, 1, 5),
            _random_conv(rng, 12, 8, 5, binary=True),
            _random_conv(rng, 16, 12, 3, binary=True),
        ),
        fc=_random_fc(rng, 2, 32),
        arithmetic=arithmetic,
        qformat=qformat,
    )


def build_named_network(name: str) -> NetworkSpec:
    builders = {"cnn-default": build_default_cnn, "bcnn-default": build_default_bcnn}
    if name not in builders:
        raise ConfigError(f"unknown network {name!r}; expected one of {sorted(builders)}")
    return builders[name]()


def default_train_config(kind: str = CNN) -> TrainConfig:
    if kind == BCNN:
        # Binarized layers train slower; give them more epochs.
        return TrainConfig(epochs=36, batch_size=64, learning_rate=2e-3, optimizer="adam",
                           rng_seed=11, validation_fraction=0.2)
    return TrainConfig(epochs=24, batch_size=64, learning_rate=2e-3, optimizer="adam",
                       rng_seed=7, validation_fraction=0.2)


def default_train_channel_config() -> ChannelConfig:
    """Channel used to synthesize training data: the moderate-ISI sweep point
    with its own seed, so evaluation streams stay independent."""
    sweep = load_default_sweep()
    cfg = sweep["train_point"]
    return cfg


def load_default_sweep() -> dict:
    """Bundled default sweep: base seed, per-point channel configs and the
    symbol budget used by the acceptance run."""
    path = importlib.resources.files("rofaccel").joinpath("data/default_sweep.json")
    spec = json.loads(path.read_text(encoding="utf-8"))
    points = [
        SweepPoint(p["config_id"], p["isi_id"], ChannelConfig.from_dict(p["config"]))
        for p in spec["points"]
    ]
    return {
        "base_seed": int(spec["base_seed"]),
        "n_symbols": int(spec["n_symbols"]),
        "train_symbols": int(spec["train_symbols"]),
        "points": points,
        "train_point": ChannelConfig.from_dict(spec["train_config"]),
    }
