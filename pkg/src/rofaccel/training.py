"""Desk-scale training.

Stochastic-gradient training of the real-valued network and
straight-through-estimator training of the binarized layers: the forward pass
uses sign(weight) and sign(activation) in binary layers, the backward pass
passes gradients through the sign where the real-valued shadow value lies in
[-1, 1] and blocks them outside (clipped identity).  Real-valued shadow
weights are kept by the optimizer; the deployed network stores only the +-1
effective weights for binary layers.

Training always runs in real32 arithmetic; fixed point is an inference-time
mode applied to the finished weights.  With a fixed seed the whole procedure
is reproducible bit-for-bit (single-threaded numpy path).

Only stride-1 convolutions and the fixed window-2 pooling are trainable,
matching the bundled network shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import Dataset
from .errors import ConfigError, ShapeError
from .nn_core import REAL32, ConvLayerSpec, FCLayerSpec, KernelSet, NetworkSpec

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 2e-3
    optimizer: str = "adam"  # or "sgd"
    rng_seed: int = 7
    validation_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        # A zero learning rate is legal (training becomes a no-op).
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer must be 'adam' or 'sgd'")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float

    CSV_COLUMNS = ("epoch", "train_loss", "val_loss", "val_acc")

    def csv_row(self) -> list:
        return [str(self.epoch), f"{self.train_loss:.6f}", f"{self.val_loss:.6f}", f"{self.val_acc:.6f}"]


def _sign_pm1(x: np.ndarray) -> np.ndarray:
    """sign with sign(0) = +1, matching the inference-side msb rule."""
    return np.where(x < 0, -1.0, 1.0).astype(x.dtype)


def _template_params(net: NetworkSpec, rng: np.random.Generator | None) -> dict:
    """Fresh (or copied) parameter set shaped like the template network."""
    params = {}
    for i, layer in enumerate(net.conv_layers):
        w = layer.kernels.weights
        if rng is None:
            params[f"w{i}"] = w.astype(np.float32).copy()
            params[f"b{i}"] = layer.kernels.bias.astype(np.float32).copy()
        else:
            fan_in = w.shape[1] * w.shape[2]
            params[f"w{i}"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), w.shape).astype(np.float32)
            params[f"b{i}"] = np.zeros(w.shape[0], dtype=np.float32)
    fw = net.fc.weights
    if rng is None:
        params["fw"] = fw.astype(np.float32).copy()
        params["fb"] = net.fc.bias.astype(np.float32).copy()
    else:
        params["fw"] = rng.normal(0.0, math.sqrt(2.0 / fw.shape[1]), fw.shape).astype(np.float32)
        params["fb"] = np.zeros(fw.shape[0], dtype=np.float32)
    return params


def _cols(x: np.ndarray, taps: int) -> np.ndarray:
    # x: (B, L, C) -> (B, L_out, C*taps), matching the (C, F) kernel layout.
    view = np.lib.stride_tricks.sliding_window_view(x, taps, axis=1)  # (B, L_out, C, F)
    b, lo, c, f = view.shape
    return np.ascontiguousarray(view).reshape(b, lo, c * f)


def _forward(net: NetworkSpec, params: dict, x: np.ndarray, dtype=np.float32):
    """Trainer-side forward (channel-last activations); returns logits and the
    cache needed for the backward pass and the kink filter."""
    cache = {"inputs": [], "cols": [], "act_neg": [], "pool_first": [], "x_clip": []}
    a = x.astype(dtype)
    for i, layer in enumerate(net.conv_layers):
        if layer.stride != 1:
            raise ConfigError("trainer supports stride-1 convolutions only")
        w = params[f"w{i}"].astype(dtype)
        b = params[f"b{i}"].astype(dtype)
        n, c, f = w.shape
        if layer.binary:
            cache["x_clip"].append(np.abs(a) <= 1.0)
            src = _sign_pm1(a)
            w_eff = _sign_pm1(w)
        else:
            cache["x_clip"].append(None)
            src = a
            w_eff = w
        cache["inputs"].append(a)
        cols = _cols(src, f)
        cache["cols"].append(cols)
        z = cols @ w_eff.reshape(n, c * f).T.astype(dtype) + b
        neg = z < 0
        cache["act_neg"].append(neg)
        act = np.where(neg, dtype(0.25) * z, z)
        pooled_len = act.shape[1] // 2
        first = act[:, 0 : 2 * pooled_len : 2, :]
        second = act[:, 1 : 2 * pooled_len : 2, :]
        keep_first = first >= second
        cache["pool_first"].append(keep_first)
        a = np.where(keep_first, first, second)
    flat = a.transpose(0, 2, 1).reshape(a.shape[0], -1)  # channel-major flatten
    cache["flat_shape"] = a.shape
    cache["flat"] = flat
    logits = flat @ params["fw"].astype(dtype).T + params["fb"].astype(dtype)
    return logits, cache


def _softmax_ce(logits: np.ndarray, labels: np.ndarray):
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    probs = ez / ez.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    eps = np.finfo(logits.dtype).tiny
    loss = float(np.mean(-np.log(probs[np.arange(n), labels] + eps)))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, (grad / n).astype(logits.dtype)


def _backward(net: NetworkSpec, params: dict, cache: dict, dlogits: np.ndarray) -> dict:
    grads = {}
    flat = cache["flat"]
    grads["fw"] = dlogits.T @ flat
    grads["fb"] = dlogits.sum(axis=0)
    dflat = dlogits @ params["fw"]
    b, lo, n = cache["flat_shape"]
    da = dflat.reshape(b, n, lo).transpose(0, 2, 1)
    for i in reversed(range(len(net.conv_layers))):
        layer = net.conv_layers[i]
        w = params[f"w{i}"]
        nch, c, f = w.shape
        keep_first = cache["pool_first"][i]
        dact = np.zeros(
            (da.shape[0], cache["act_neg"][i].shape[1], nch), dtype=da.dtype
        )
        dact[:, 0 : 2 * keep_first.shape[1] : 2, :] = np.where(keep_first, da, 0.0)
        dact[:, 1 : 2 * keep_first.shape[1] : 2, :] = np.where(keep_first, 0.0, da)
        dz = np.where(cache["act_neg"][i], da.dtype.type(0.25) * dact, dact)
        cols = cache["cols"][i]
        w_eff = _sign_pm1(w) if layer.binary else w
        dz2 = dz.reshape(-1, nch)
        grads[f"w{i}"] = (dz2.T @ cols.reshape(-1, c * f)).reshape(nch, c, f)
        grads[f"b{i}"] = dz2.sum(axis=0)
        if layer.binary:
            # Straight-through: clip the pass-through to |shadow| <= 1.
            grads[f"w{i}"] = grads[f"w{i}"] * (np.abs(w) <= 1.0)
        dcols = dz @ w_eff.reshape(nch, c * f)
        bsz, lo_i, cf = dcols.shape
        dcols = dcols.reshape(bsz, lo_i, c, f)
        dx = np.zeros_like(cache["inputs"][i])
        for tap in range(f):
            dx[:, tap : tap + lo_i, :] += dcols[:, :, :, tap]
        if layer.binary:
            dx = dx * cache["x_clip"][i]
        da = dx
    return grads


class _Adam:
    def __init__(self, params: dict, lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1t = 1.0 - _ADAM_B1**self.t
        b2t = 1.0 - _ADAM_B2**self.t
        for key, g in grads.items():
            self.m[key] = _ADAM_B1 * self.m[key] + (1 - _ADAM_B1) * g
            self.v[key] = _ADAM_B2 * self.v[key] + (1 - _ADAM_B2) * g * g
            mh = self.m[key] / b1t
            vh = self.v[key] / b2t
            params[key] = (params[key] - self.lr * mh / (np.sqrt(vh) + _ADAM_EPS)).astype(np.float32)


class _SGD:
    def __init__(self, params: dict, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for key, g in grads.items():
            params[key] = (params[key] - self.lr * g).astype(np.float32)


def _assemble(net: NetworkSpec, params: dict) -> NetworkSpec:
    conv_layers = []
    for i, layer in enumerate(net.conv_layers):
        w = params[f"w{i}"]
        if layer.binary:
            w = _sign_pm1(w)  # deploy only the +-1 effective weights
        conv_layers.append(ConvLayerSpec(KernelSet(w, params[f"b{i}"]), stride=layer.stride, binary=layer.binary))
    fc = FCLayerSpec(params["fw"], params["fb"])
    return NetworkSpec(
        kind=net.kind,
        input_length=net.input_length,
        conv_layers=tuple(conv_layers),
        fc=fc,
        arithmetic=REAL32,
        input_channels=net.input_channels,
    )


def _batch_eval(net: NetworkSpec, params: dict, x: np.ndarray, labels: np.ndarray, batch: int = 512):
    losses = []
    correct = 0
    for start in range(0, x.shape[0], batch):
        xb = x[start : start + batch]
        yb = labels[start : start + batch]
        logits, _ = _forward(net, params, xb)
        loss, _ = _softmax_ce(logits, yb)
        losses.append(loss * xb.shape[0])
        correct += int(np.count_nonzero(np.argmax(logits, axis=1) == yb))
    return sum(losses) / x.shape[0], correct / x.shape[0]


def train(template: NetworkSpec, data: Dataset, cfg: TrainConfig):
    """Train fresh weights shaped like ``template`` on ``data``.

    Returns (trained network, per-epoch stats).  The returned weights are the
    best-validation-loss checkpoint, so the checkpoint loss sequence is
    non-increasing by construction.
    """
    if template.arithmetic != REAL32:
        raise ConfigError("training runs in real32 only; quantize after training")
    if data.n_frames < 2:
        raise ShapeError("dataset too small to split")
    if data.windows.shape[1] != template.input_channels or data.windows.shape[2] != template.input_length:
        raise ShapeError(
            f"dataset windows {data.windows.shape[1:]} do not match network input "
            f"({template.input_channels}, {template.input_length})"
        )
    if int(data.labels.max(initial=0)) >= template.fc.out_classes:
        raise ShapeError("labels exceed the network's class count")

    rng = np.random.Generator(np.random.PCG64(cfg.rng_seed))
    params = _template_params(template, rng)
    optimizer = (_Adam if cfg.optimizer == "adam" else _SGD)(params, cfg.learning_rate)

    x_all = data.windows.transpose(0, 2, 1).astype(np.float32)  # (n, L, C)
    y_all = data.labels.astype(np.int64)
    perm = rng.permutation(data.n_frames)
    n_val = max(1, int(round(data.n_frames * cfg.validation_fraction)))
    n_val = min(n_val, data.n_frames - 1)
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    best_params = {k: v.copy() for k, v in params.items()}
    best_val = math.inf
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(train_idx.size)
        epoch_loss = 0.0
        for start in range(0, order.size, cfg.batch_size):
            idx = train_idx[order[start : start + cfg.batch_size]]
            logits, cache = _forward(template, params, x_all[idx])
            loss, dlogits = _softmax_ce(logits, y_all[idx])
            grads = _backward(template, params, cache, dlogits)
            optimizer.step(params, grads)
            epoch_loss += loss * idx.size
        train_loss = epoch_loss / max(1, train_idx.size)
        val_loss, val_acc = _batch_eval(template, params, x_all[val_idx], y_all[val_idx])
        history.append(EpochStats(epoch, train_loss, val_loss, val_acc))
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
    if cfg.epochs == 0:
        best_params = params
    return _assemble(template, best_params), history


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def _flatten_real_coords(net: NetworkSpec, params: dict):
    """(key, index) pairs for the finite-difference-checkable coordinates.

    Binary layers are excluded, and so is everything upstream of one: a sign
    nonlinearity has zero derivative almost everywhere, so finite differences
    vanish there while the straight-through gradient deliberately does not.
    """
    last_binary = -1
    for i, layer in enumerate(net.conv_layers):
        if layer.binary:
            last_binary = i
    coords = []
    for i, layer in enumerate(net.conv_layers):
        if i <= last_binary:
            continue
        for key in (f"w{i}", f"b{i}"):
            coords.extend((key, j) for j in range(params[key].size))
    for key in ("fw", "fb"):
        coords.extend((key, j) for j in range(params[key].size))
    return coords


def _branch_signature(cache: dict):
    parts = [m.ravel() for m in cache["act_neg"]] + [m.ravel() for m in cache["pool_first"]]
    return np.concatenate(parts)


def gradient_check(
    net: NetworkSpec,
    window: np.ndarray,
    label: int = 0,
    n_coords: int = 96,
    step: float = 1e-3,
    rng_seed: int = 0,
):
    """Analytic vs central-difference gradients on the real-valued layers.

    The finite-difference side runs in float64.  Coordinates whose
    perturbation flips an activation branch or a pooling argmax (leaky-ReLU
    kinks, pool ties) are excluded, as are coordinates where both gradients
    vanish.  Returns (max relative error, checked count, excluded count).
    """
    params = _template_params(net, None)
    x = np.asarray(window, dtype=np.float32)
    if x.ndim == 2:
        x = x[None]
    x = x.transpose(0, 2, 1)  # (1, L, C)
    y = np.asarray([label], dtype=np.int64)

    # The check validates the gradient formulas, so both sides run in
    # float64; float32 softmax saturation would otherwise swamp small
    # gradients with cancellation noise.
    params64 = {k: v.astype(np.float64) for k, v in params.items()}
    logits, cache = _forward(net, params64, x, dtype=np.float64)
    _, dlogits = _softmax_ce(logits, y)
    analytic = _backward(net, params64, cache, dlogits)

    def loss64(p: dict) -> float:
        logits64, _ = _forward(net, p, x, dtype=np.float64)
        z = logits64 - logits64.max(axis=1, keepdims=True)
        probs = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        return float(-np.log(probs[0, label]))

    coords = _flatten_real_coords(net, params)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    if len(coords) > n_coords:
        coords = [coords[i] for i in rng.choice(len(coords), size=n_coords, replace=False)]

    max_rel = 0.0
    checked = 0
    excluded = 0
    for key, j in coords:
        p64 = {k: v.astype(np.float64) for k, v in params.items()}
        flat = p64[key].reshape(-1)
        orig = flat[j]
        flat[j] = orig + step
        _, cache_hi = _forward(net, p64, x, dtype=np.float64)
        hi = loss64(p64)
        flat[j] = orig - step
        _, cache_lo = _forward(net, p64, x, dtype=np.float64)
        lo = loss64(p64)
        flat[j] = orig
        if not np.array_equal(_branch_signature(cache_hi), _branch_signature(cache_lo)):
            excluded += 1  # kink or pool tie crossed inside the stencil
            continue
        fd = (hi - lo) / (2 * step)
        a = float(analytic[key].reshape(-1)[j])
        denom = max(abs(a), abs(fd))
        if denom < 1e-6:
            checked += 1
            continue
        max_rel = max(max_rel, abs(a - fd) / denom)
        checked += 1
    return max_rel, checked, excluded
