"""IEEE 754 binary16 emulation and the rounding used by the quantizers.

Everything here works on raw bit patterns so that the PE emulation can
manipulate exponent and mantissa fields directly.  Scalar functions operate
on Python ints/floats; the ``*_array`` variants are vectorized over numpy
arrays and produce bit-identical results.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

SIGN_MASK = 0x8000
EXP_MASK = 0x7C00
MANT_MASK = 0x03FF
EXP_BIAS = 15
MANT_BITS = 10
EXP_MAX = 31

POS_INF = 0x7C00
NEG_INF = 0xFC00
QUIET_NAN = 0x7E00


class InvalidQuantizationInput(ValueError):
    """Raised when a value that must be finite is NaN or infinite."""


class RoundingMode(enum.Enum):
    NEAREST_EVEN = "nearest_even"


@dataclass(frozen=True)
class Half:
    """A binary16 value held as its 16-bit pattern (1-5-10 layout)."""

    bits: int

    def __post_init__(self):
        if not 0 <= self.bits <= 0xFFFF:
            raise ValueError(f"binary16 pattern out of range: {self.bits:#x}")

    @classmethod
    def from_real(cls, v: float) -> "Half":
        return cls(half_from_real(v))

    @property
    def sign(self) -> int:
        return self.bits >> 15

    @property
    def exponent(self) -> int:
        return (self.bits & EXP_MASK) >> MANT_BITS

    @property
    def mantissa(self) -> int:
        return self.bits & MANT_MASK

    @property
    def is_nan(self) -> bool:
        return self.exponent == EXP_MAX and self.mantissa != 0

    @property
    def is_inf(self) -> bool:
        return self.exponent == EXP_MAX and self.mantissa == 0

    @property
    def is_subnormal(self) -> bool:
        return self.exponent == 0 and self.mantissa != 0

    def __float__(self) -> float:
        return half_to_real(self.bits)

    def __repr__(self) -> str:
        return f"Half({self.bits:#06x}={half_to_real(self.bits)!r})"


def _bits(h) -> int:
    return h.bits if isinstance(h, Half) else int(h)


def half_to_real(h) -> float:
    """Exact value of a binary16 pattern as a Python float."""
    b = _bits(h)
    sign = -1.0 if b & SIGN_MASK else 1.0
    e = (b & EXP_MASK) >> MANT_BITS
    m = b & MANT_MASK
    if e == EXP_MAX:
        return math.nan if m else sign * math.inf
    if e == 0:
        return sign * math.ldexp(m, -24)
    return sign * math.ldexp(m | 0x400, e - 25)


def _round_shift(mant: int, shift: int) -> int:
    # mant >> shift, rounded to nearest with ties to even
    if shift <= 0:
        return mant << -shift
    q = mant >> shift
    rem = mant & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


def half_from_real(v: float) -> int:
    """Nearest binary16 pattern to ``v`` (round-to-nearest-even).

    Overflow saturates to a signed infinity and any NaN becomes the quiet
    NaN ``0x7E00`` carrying the input sign.
    """
    (d,) = struct.unpack("<Q", struct.pack("<d", float(v)))
    sign = (d >> 48) & SIGN_MASK
    dexp = (d >> 52) & 0x7FF
    frac = d & ((1 << 52) - 1)
    if dexp == 0x7FF:
        return sign | (QUIET_NAN if frac else POS_INF)
    if dexp == 0:
        # binary64 subnormals are far below half of the smallest binary16 step
        return sign
    mant = frac | (1 << 52)
    unbiased = dexp - 1023
    # exponent of one binary16 ulp at this magnitude
    q = max(unbiased - MANT_BITS, -24)
    n = _round_shift(mant, q - (unbiased - 52))
    # n*2^q with n <= 2048 encodes as ((q + 24) << 10) + n, carries included
    bits = ((q + 24) << MANT_BITS) + n
    if bits >= POS_INF:
        bits = POS_INF
    return sign | bits


def round_half_even(x: float) -> int:
    """Round to the nearest integer, ties to even."""
    if not math.isfinite(x):
        raise InvalidQuantizationInput(f"cannot round non-finite value {x!r}")
    return int(round(x))


# kept under the name used in the design notes
round_half_away_or_even = round_half_even


def round_half_even_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidQuantizationInput("cannot round non-finite values")
    return np.rint(x)


def half_to_real_array(bits: np.ndarray) -> np.ndarray:
    b = np.asarray(bits).astype(np.int64)
    sign = np.where(b & SIGN_MASK, -1.0, 1.0)
    e = (b & EXP_MASK) >> MANT_BITS
    m = b & MANT_MASK
    sig = np.where(e == 0, m, m | 0x400)
    exp = np.where(e == 0, -24, e - 25)
    out = sign * np.ldexp(sig.astype(np.float64), exp)
    special = e == EXP_MAX
    if np.any(special):
        out = np.where(special & (m == 0), sign * np.inf, out)
        out = np.where(special & (m != 0), np.nan, out)
    return out


def half_from_real_array(v: np.ndarray) -> np.ndarray:
    """Vectorized :func:`half_from_real`; returns a ``uint16`` array."""
    d = np.ascontiguousarray(v, dtype=np.float64).view(np.uint64).astype(np.int64, copy=False)
    # int64 view of the sign bit is negative; mask after the shift
    sign = (d >> 48) & SIGN_MASK
    dexp = (d >> 52) & 0x7FF
    frac = d & ((1 << 52) - 1)
    mant = frac | (1 << 52)
    unbiased = dexp - 1023
    q = np.maximum(unbiased - MANT_BITS, -24)
    shift = np.clip(q - (unbiased - 52), 1, 62)
    n = mant >> shift
    rem = mant & ((np.int64(1) << shift) - 1)
    half = np.int64(1) << (shift - 1)
    n = n + ((rem > half) | ((rem == half) & ((n & 1) == 1)))
    bits = np.minimum(((q + 24) << MANT_BITS) + n, POS_INF)
    bits = np.where(dexp == 0, 0, bits)
    bits = np.where(dexp == 0x7FF, np.where(frac != 0, QUIET_NAN, POS_INF), bits)
    return (sign | bits).astype(np.uint16)


def is_nan_bits(bits) -> np.ndarray | bool:
    b = np.asarray(bits).astype(np.int64)
    return ((b & EXP_MASK) == EXP_MASK) & ((b & MANT_MASK) != 0)
