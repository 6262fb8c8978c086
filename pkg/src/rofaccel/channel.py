"""Synthetic receive-side datasets and bit-error-rate evaluation.

The physical link (optical modulation, amplification, fiber dispersion,
square-law detection, down-conversion) is collapsed into a desk-scale
surrogate that keeps the impairments the decision network is supposed to
suppress: an on-off keyed symbol stream is rectangularly pulse-shaped at the
oversampling rate, smeared by a causal FIR (linear ISI), passed through a
memoryless third-order compression ``y = x - g*x**3`` and buried in additive
white Gaussian noise at a configured SNR.  Per-symbol windows centered on the
symbol instants become network inputs; the transmitted symbol is the label.

Everything is a pure function of (config, n_symbols): a fixed seed yields a
byte-identical dataset.

Dataset container (``.rfd``): magic ``RFD1``, uint32 little-endian header
length, JSON header (config, counts, arithmetic mode), little-endian binary32
windows, then one label byte per window.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError, FileFormatError, ShapeError
from .nn_core import NetworkSpec, Tensor1D, forward_batch

DATASET_MAGIC = b"RFD1"


@dataclass(frozen=True)
class ChannelConfig:
    """Surrogate channel parameters; the seed fully determines the output."""

    symbols_per_frame: int = 9
    samples_per_symbol: int = 4
    isi_taps: tuple = (1.0,)
    nonlinearity_gain: float = 0.0
    snr_db: float = math.inf
    phase_noise_linewidth: float | None = None
    rng_seed: int = 0
    levels: int = 2  # 2 = on-off keying; M-ary is configurable but unvalidated

    def __post_init__(self) -> None:
        if self.symbols_per_frame < 1 or self.symbols_per_frame % 2 == 0:
            raise ConfigError("symbols_per_frame must be a positive odd count")
        if self.samples_per_symbol < 1:
            raise ConfigError("samples_per_symbol must be >= 1")
        taps = tuple(float(t) for t in self.isi_taps)
        if not taps:
            raise ConfigError("isi_taps must be non-empty")
        object.__setattr__(self, "isi_taps", taps)
        if self.levels < 2:
            raise ConfigError("levels must be >= 2")
        if self.phase_noise_linewidth is not None and self.phase_noise_linewidth < 0:
            raise ConfigError("phase_noise_linewidth must be >= 0")

    @property
    def window_length(self) -> int:
        return self.symbols_per_frame * self.samples_per_symbol

    @property
    def center_sample(self) -> int:
        """Index of the decision symbol's mid-sample inside a window."""
        return (self.symbols_per_frame // 2) * self.samples_per_symbol + self.samples_per_symbol // 2

    def to_dict(self) -> dict:
        return {
            "symbols_per_frame": self.symbols_per_frame,
            "samples_per_symbol": self.samples_per_symbol,
            "isi_taps": list(self.isi_taps),
            "nonlinearity_gain": self.nonlinearity_gain,
            "snr_db": "inf" if math.isinf(self.snr_db) else self.snr_db,
            "phase_noise_linewidth": self.phase_noise_linewidth,
            "rng_seed": self.rng_seed,
            "levels": self.levels,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelConfig":
        snr = data.get("snr_db", "inf")
        return cls(
            symbols_per_frame=data.get("symbols_per_frame", 9),
            samples_per_symbol=data.get("samples_per_symbol", 4),
            isi_taps=tuple(data.get("isi_taps", (1.0,))),
            nonlinearity_gain=data.get("nonlinearity_gain", 0.0),
            snr_db=math.inf if snr in ("inf", None) else float(snr),
            phase_noise_linewidth=data.get("phase_noise_linewidth"),
            rng_seed=int(data.get("rng_seed", 0)),
            levels=int(data.get("levels", 2)),
        )


@dataclass(frozen=True)
class Dataset:
    """Per-symbol windows plus transmitted labels."""

    windows: np.ndarray  # (n, 1, window_length) float32
    labels: np.ndarray  # (n,) uint8
    config: ChannelConfig

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.windows, dtype=np.float32)
        l = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if w.ndim != 3 or w.shape[0] != l.shape[0]:
            raise ShapeError("windows must be (n, channels, length) aligned with labels")
        if w.shape[2] != self.config.window_length:
            raise ShapeError("window length does not match the config")
        if l.size and int(l.max()) >= self.config.levels:
            raise ShapeError("labels exceed the configured symbol alphabet")
        object.__setattr__(self, "windows", w)
        object.__setattr__(self, "labels", l)

    @property
    def n_frames(self) -> int:
        return self.windows.shape[0]

    def iter_frames(self):
        for i in range(self.n_frames):
            yield Tensor1D(self.windows[i]), int(self.labels[i])


def generate(config: ChannelConfig, n_symbols: int) -> Dataset:
    """Run the surrogate chain and slice per-symbol windows."""
    if n_symbols < config.symbols_per_frame:
        raise ConfigError(f"n_symbols must be >= symbols_per_frame ({config.symbols_per_frame})")
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    symbols = rng.integers(0, config.levels, n_symbols)
    amplitudes = symbols.astype(np.float64) / (config.levels - 1)
    wave = np.repeat(amplitudes, config.samples_per_symbol)
    wave = np.convolve(wave, np.asarray(config.isi_taps, dtype=np.float64))[: wave.size]
    g = config.nonlinearity_gain
    if g != 0.0:
        wave = wave - g * wave**3
    if config.phase_noise_linewidth:
        # Wiener phase walk observed as a slow multiplicative fade.
        steps = rng.normal(0.0, math.sqrt(config.phase_noise_linewidth), wave.size)
        wave = wave * np.cos(np.cumsum(steps))
    if not math.isinf(config.snr_db):
        power = float(np.mean(wave**2))
        sigma = math.sqrt(power * 10.0 ** (-config.snr_db / 10.0))
        wave = wave + rng.normal(0.0, sigma, wave.size)
    n_frames = n_symbols - config.symbols_per_frame + 1
    view = np.lib.stride_tricks.sliding_window_view(wave, config.window_length)
    windows = view[:: config.samples_per_symbol][:n_frames]
    half = config.symbols_per_frame // 2
    labels = symbols[half : half + n_frames]
    return Dataset(windows[:, None, :].astype(np.float32), labels.astype(np.uint8), config)


def ber(decisions, labels) -> float:
    """Error count over total; inputs must be equal-length and non-empty."""
    d = np.asarray(decisions)
    l = np.asarray(labels)
    if d.shape != l.shape or d.ndim != 1 or d.size == 0:
        raise DomainError("decisions and labels must be equal-length non-empty vectors")
    return float(np.count_nonzero(d != l)) / d.size


def threshold_decisions(dataset: Dataset) -> np.ndarray:
    """Raw single-sample detector baseline: nearest class mean of the center
    sample, with the class means calibrated from the labeled data (the most
    generous threshold the detector could hope for)."""
    center = dataset.windows[:, 0, dataset.config.center_sample]
    means = []
    for cls in range(dataset.config.levels):
        mask = dataset.labels == cls
        means.append(float(center[mask].mean()) if mask.any() else math.nan)
    means = np.asarray(means)
    return np.argmin(np.abs(center[:, None] - means[None, :]), axis=1)


@dataclass(frozen=True)
class SweepPoint:
    config_id: str
    isi_id: str
    config: ChannelConfig


@dataclass(frozen=True)
class SweepRow:
    config_id: str
    snr_db: float
    isi_id: str
    n_symbols: int
    errors: int
    ber: float

    CSV_COLUMNS = ("config_id", "snr_db", "isi_id", "n_symbols", "errors", "ber")

    def csv_row(self) -> list:
        snr = "inf" if math.isinf(self.snr_db) else f"{self.snr_db:g}"
        return [self.config_id, snr, self.isi_id, str(self.n_symbols), str(self.errors), f"{self.ber:.8f}"]


def point_seed(base_seed: int, index: int) -> int:
    """Independent per-point stream derivation: base seed XOR point index."""
    return base_seed ^ index


def ber_sweep(net: NetworkSpec, points, n_symbols: int, base_seed: int | None = None,
              detector=None) -> list:
    """One BER per sweep point, each from an independently seeded dataset.

    ``detector`` overrides the network evaluation (used for the raw-threshold
    baseline); by default decisions come from the network's batch forward.
    """
    rows = []
    for index, point in enumerate(points):
        seed = point_seed(base_seed if base_seed is not None else point.config.rng_seed, index)
        cfg = replace(point.config, rng_seed=seed)
        if net is not None and net.input_length != cfg.window_length:
            raise ShapeError(
                f"network input length {net.input_length} != window {cfg.window_length}"
            )
        dataset = generate(cfg, n_symbols)
        if detector is not None:
            decisions = detector(dataset)
        else:
            decisions, _ = forward_batch(net, dataset.windows)
        errors = int(np.count_nonzero(decisions != dataset.labels))
        rows.append(
            SweepRow(point.config_id, cfg.snr_db, point.isi_id, dataset.n_frames, errors,
                     errors / dataset.n_frames)
        )
    return rows


# ---------------------------------------------------------------------------
# Dataset container (.rfd)
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> None:
    header = json.dumps(
        {
            "format": "rofaccel-dataset",
            "version": 1,
            "endianness": "little",
            "arithmetic": "real32",
            "config": dataset.config.to_dict(),
            "n_frames": dataset.n_frames,
            "window_channels": int(dataset.windows.shape[1]),
            "window_length": int(dataset.windows.shape[2]),
            "label_classes": dataset.config.levels,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(dataset.windows.astype("<f4").tobytes())
        fh.write(dataset.labels.astype(np.uint8).tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != DATASET_MAGIC:
        raise FileFormatError(f"{path}: not a rofaccel dataset file")
    (hlen,) = struct.unpack_from("<I", blob, 4)
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: bad header: {exc}") from exc
    if header.get("format") != "rofaccel-dataset" or header.get("version") != 1:
        raise FileFormatError(f"{path}: unsupported dataset format/version")
    n = header["n_frames"]
    c = header["window_channels"]
    w = header["window_length"]
    offset = 8 + hlen
    count = n * c * w
    if offset + count * 4 + n != len(blob):
        raise FileFormatError(f"{path}: payload size mismatch")
    windows = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(n, c, w).copy()
    labels = np.frombuffer(blob, dtype=np.uint8, count=n, offset=offset + count * 4).copy()
    return Dataset(windows, labels, ChannelConfig.from_dict(header["config"]))
