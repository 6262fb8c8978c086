"""Value-level arithmetic: binary32 helpers, two's-complement fixed point,
sign-bit extraction and both realizations of the leaky rectifier.

Two arithmetic families coexist:

* ``real32`` -- IEEE-754 single precision with round-to-nearest-even on every
  operation.  Implemented with numpy float32 scalars/arrays, which map 1:1 to
  hardware binary32 ops.
* fixed point -- integer mantissas in a :class:`QFormat`.  Additions saturate
  at the format bounds, multiplications keep the full-width product and then
  truncate (floor) back to the format.

The leaky rectifier has one realization per family: ``x -> 0.25*x`` on the
negative branch for floats (exact: multiplication by a power of two), and an
arithmetic right shift by 2 for mantissas.  The shift floors toward minus
infinity, so the two branches may differ by one unit in the last place of the
format on negative inputs; that asymmetry is intentional and tested, not
hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

F32 = np.float32
QUARTER = F32(0.25)

_ALLOWED_TOTAL_BITS = (8, 16, 32)


@dataclass(frozen=True)
class QFormat:
    """Two's-complement fixed-point format: ``total_bits`` wide, of which
    ``frac_bits`` are fractional.  Real value of mantissa m is m * 2**-frac_bits.
    """

    total_bits: int
    frac_bits: int

    def __post_init__(self) -> None:
        if self.total_bits not in _ALLOWED_TOTAL_BITS:
            raise DomainError(f"total_bits must be one of {_ALLOWED_TOTAL_BITS}, got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise DomainError(f"frac_bits must satisfy 0 <= frac_bits < total_bits, got {self.frac_bits}")

    @property
    def min_mantissa(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_mantissa(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def scale(self) -> int:
        """Mantissa units per 1.0."""
        return 1 << self.frac_bits

    @property
    def min_value(self) -> float:
        return self.min_mantissa / self.scale

    @property
    def max_value(self) -> float:
        return self.max_mantissa / self.scale

    def __str__(self) -> str:
        # Q16.8 reads "16 total bits, 8 fractional".
        return f"Q{self.total_bits}.{self.frac_bits}"


#: Default format for hardware-exact runs; wide enough that the desk-scale
#: networks do not saturate.
Q16_8 = QFormat(16, 8)


@dataclass(frozen=True)
class FixedPoint:
    """A single fixed-point sample: integer mantissa plus its format."""

    mantissa: int
    fmt: QFormat

    def __post_init__(self) -> None:
        if not self.fmt.min_mantissa <= self.mantissa <= self.fmt.max_mantissa:
            raise DomainError(f"mantissa {self.mantissa} does not fit {self.fmt}")

    @property
    def value(self) -> float:
        return self.mantissa / self.fmt.scale


def to_fixed(x, fmt: QFormat):
    """Quantize real values to mantissas: round-to-nearest-even, then saturate.

    Accepts scalars or arrays; returns int64 mantissas.
    """
    m = np.rint(np.asarray(x, dtype=np.float64) * fmt.scale)
    m = np.clip(m, fmt.min_mantissa, fmt.max_mantissa)
    return m.astype(np.int64) if m.ndim else int(m)


def to_real(mantissa, fmt: QFormat):
    """Exact real value of mantissas (float64; exact for <= 32-bit formats)."""
    out = np.asarray(mantissa, dtype=np.float64) / fmt.scale
    return out if out.ndim else float(out)


def msb(x) -> int:
    """Sign of the most significant (sign) bit: -1 if set, +1 otherwise.

    Floats follow the IEEE sign bit, so ``msb(-0.0) == -1``; fixed-point
    follows two's complement, so ``msb(0) == +1``.  Never returns 0.
    """
    if isinstance(x, FixedPoint):
        return -1 if x.mantissa < 0 else 1
    if isinstance(x, (int, np.integer)):
        return -1 if int(x) < 0 else 1
    xf = float(x)
    if not math.isfinite(xf):
        raise DomainError(f"msb of non-finite value {x!r}")
    return -1 if math.copysign(1.0, xf) < 0 else 1


def sign_array(x: np.ndarray) -> np.ndarray:
    """Vectorized msb: int8 array of +-1.  Floats use the sign bit (so -0.0
    maps to -1); integer mantissas use two's complement."""
    x = np.asarray(x)
    if x.dtype.kind == "f":
        return np.where(np.signbit(x), -1, 1).astype(np.int8)
    return np.where(x < 0, -1, 1).astype(np.int8)


def leaky_relu_real(x):
    """Leaky rectifier on binary32 values: x for x >= 0, else 0.25*x.

    The negative-branch product is exact in binary32 (scaling by 2**-2)
    except when the result falls into the subnormal range, where IEEE
    round-to-nearest still applies.  ``-0.0`` takes the identity branch
    (it is not ``< 0``).
    """
    arr = np.asarray(x, dtype=np.float32)
    out = np.where(arr < 0, QUARTER * arr, arr)
    return out if out.ndim else F32(out)


def leaky_relu_shift(mantissa, fmt: QFormat = Q16_8):
    """Leaky rectifier realized as an arithmetic right shift by 2.

    Negative mantissas shift with sign extension, i.e. floor(m / 4); this is
    the hardware behaviour, and it rounds toward minus infinity where the
    float path rounds exactly.
    """
    if isinstance(mantissa, FixedPoint):
        m = mantissa.mantissa
        return FixedPoint(m if m >= 0 else m >> 2, mantissa.fmt)
    m = np.asarray(mantissa, dtype=np.int64)
    out = np.where(m < 0, m >> 2, m)
    return out if out.ndim else int(out)


def _check_same_format(a: FixedPoint, b: FixedPoint) -> QFormat:
    if a.fmt != b.fmt:
        raise DomainError(f"format mismatch: {a.fmt} vs {b.fmt}")
    return a.fmt


def fx_add(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    """Saturating fixed-point addition (same format required)."""
    fmt = _check_same_format(a, b)
    s = a.mantissa + b.mantissa
    s = min(max(s, fmt.min_mantissa), fmt.max_mantissa)
    return FixedPoint(s, fmt)


def fx_mul(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    """Fixed-point multiplication: full-width product, floor back to the
    format, then saturate."""
    fmt = _check_same_format(a, b)
    full = a.mantissa * b.mantissa
    # Arithmetic shift == floor division by 2**frac_bits for negatives too.
    p = full >> fmt.frac_bits
    p = min(max(p, fmt.min_mantissa), fmt.max_mantissa)
    return FixedPoint(p, fmt)


def sat_add_array(acc: np.ndarray, addend: np.ndarray, fmt: QFormat) -> np.ndarray:
    """Vectorized saturating add on int64 mantissas."""
    return np.clip(acc + addend, fmt.min_mantissa, fmt.max_mantissa)


def trunc_mul_array(a: np.ndarray, b: np.ndarray, fmt: QFormat) -> np.ndarray:
    """Vectorized full-width product, arithmetic shift, saturate."""
    full = a.astype(np.int64) * b.astype(np.int64)
    return np.clip(full >> fmt.frac_bits, fmt.min_mantissa, fmt.max_mantissa)
