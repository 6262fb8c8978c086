"""Kernel backend selection.

Two interchangeable backends implement the hot loops:

* ``compiled`` -- Cython extension (:mod:`rofaccel.kernels._fastcore`),
  scalar C loops, used when the extension built;
* ``pure`` -- numpy fallback (:mod:`rofaccel.kernels.pure`).

Both produce bit-identical outputs (same canonical accumulation order, same
IEEE binary32 rounding); the compiled one is just faster, which matters for
Monte-Carlo BER sweeps.  The active backend is chosen at import time and can
be switched with :func:`set_backend` (used by tests and the benchmark).

The XNOR/popcount score form has a single shared implementation; it is a
verification dual of the sign multiply-accumulate form, not a per-backend
kernel.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from . import pure

try:
    from . import _fastcore as _compiled
except ImportError:  # extension not built; numpy fallback only
    _compiled = None

_BACKENDS = {"pure": pure}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "pure"


def available_backends() -> tuple:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active


def set_backend(name: str) -> str:
    """Select 'pure', 'compiled' or 'auto'; returns the backend now active."""
    global _active
    if name == "auto":
        _active = "compiled" if _compiled is not None else "pure"
        return _active
    if name not in _BACKENDS:
        raise ConfigError(f"backend {name!r} not available (have {available_backends()})")
    _active = name
    return _active


def _mod(backend=None):
    return _BACKENDS[backend or _active]


def out_length(length: int, kernel_size: int, stride: int) -> int:
    return pure.out_length(length, kernel_size, stride)


def conv1d_real(x, w, bias, stride, backend=None):
    return _mod(backend).conv1d_real(
        np.ascontiguousarray(x, dtype=np.float32),
        np.ascontiguousarray(w, dtype=np.float32),
        np.ascontiguousarray(bias, dtype=np.float32),
        stride,
    )


def conv1d_fixed(x, w, bias, stride, fmt, backend=None):
    return _mod(backend).conv1d_fixed(
        np.ascontiguousarray(x, dtype=np.int64),
        np.ascontiguousarray(w, dtype=np.int64),
        np.ascontiguousarray(bias, dtype=np.int64),
        stride,
        fmt.frac_bits,
        fmt.min_mantissa,
        fmt.max_mantissa,
    )


def binary_scores(sx, sw, stride, backend=None):
    return _mod(backend).binary_scores(
        np.ascontiguousarray(sx, dtype=np.int8),
        np.ascontiguousarray(sw, dtype=np.int8),
        stride,
    )


def binary_scores_popcount(sx, sw, stride):
    return pure.binary_scores_popcount(
        np.ascontiguousarray(sx, dtype=np.int8),
        np.ascontiguousarray(sw, dtype=np.int8),
        stride,
    )


def maxpool1d_real(x, backend=None):
    return _mod(backend).maxpool1d_real(np.ascontiguousarray(x, dtype=np.float32))


def maxpool1d_fixed(x, backend=None):
    return _mod(backend).maxpool1d_fixed(np.ascontiguousarray(x, dtype=np.int64))


def leaky_real(x, backend=None):
    return _mod(backend).leaky_real(np.ascontiguousarray(x, dtype=np.float32))


def leaky_fixed(x, backend=None):
    return _mod(backend).leaky_fixed(np.ascontiguousarray(x, dtype=np.int64))


def fc_real(x, w, bias, backend=None):
    return _mod(backend).fc_real(
        np.ascontiguousarray(x, dtype=np.float32),
        np.ascontiguousarray(w, dtype=np.float32),
        np.ascontiguousarray(bias, dtype=np.float32),
    )


def fc_fixed(x, w, bias, fmt, backend=None):
    return _mod(backend).fc_fixed(
        np.ascontiguousarray(x, dtype=np.int64),
        np.ascontiguousarray(w, dtype=np.int64),
        np.ascontiguousarray(bias, dtype=np.int64),
        fmt.frac_bits,
        fmt.min_mantissa,
        fmt.max_mantissa,
    )
