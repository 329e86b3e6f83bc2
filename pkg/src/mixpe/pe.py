"""Processing-element emulation.

The MixPE kernels multiply a 4-bit unsigned weight code by an activation
without a multiplier: each set weight bit selects a shifted copy of the
activation (INT8) or an exponent-adjusted copy (binary16), and the selected
terms go through an adder tree.  Conventional multiplier PEs are provided as
baselines.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    EXP_MASK,
    EXP_MAX,
    MANT_BITS,
    MANT_MASK,
    POS_INF,
    SIGN_MASK,
    Half,
    half_from_real,
    half_to_real,
    half_to_real_array,
)

WEIGHT_BITS = 4
INT8_MIN, INT8_MAX = -128, 127


class PEKind(enum.Enum):
    MIXPE_A8 = "mixpe-a8"
    MIXPE_A16 = "mixpe-a16"
    INT8_MUL = "int8"
    FP16_MUL = "fp16"
    BITFUSION_LIKE = "bitfusion"
    OLACCEL_LIKE = "olaccel"

    @classmethod
    def parse(cls, name: str) -> "PEKind":
        key = name.strip().lower().replace("_", "-")
        for kind in cls:
            if key in (kind.value, kind.name.lower().replace("_", "-")):
                return kind
        raise ValueError(f"unknown PE kind {name!r}; choose from {[k.value for k in cls]}")

    @property
    def is_mixpe(self) -> bool:
        return self in (PEKind.MIXPE_A8, PEKind.MIXPE_A16)

    @property
    def activation_bits(self) -> int:
        return 16 if self in (PEKind.MIXPE_A16, PEKind.FP16_MUL) else 8

    @property
    def functional_kind(self) -> "PEKind":
        """Kind whose arithmetic this PE reproduces.

        BitFusion- and OLAccel-like entries exist only in the cost tables and
        compute through the INT8 multiplier path.
        """
        if self in (PEKind.BITFUSION_LIKE, PEKind.OLACCEL_LIKE):
            return PEKind.INT8_MUL
        return self


@dataclass
class ShiftAddTrace:
    partial_terms: list[tuple[int, object]] = field(default_factory=list)
    shift_count: int = 0
    add_count: int = 0


def _check_weight(w: int) -> int:
    w = int(w)
    if not 0 <= w < (1 << WEIGHT_BITS):
        raise ValueError(f"weight code {w} is not UINT4")
    return w


def _check_int8(x: int) -> int:
    x = int(x)
    if not INT8_MIN <= x <= INT8_MAX:
        raise ValueError(f"activation {x} is not INT8")
    return x


def mixpe_a8_trace(w: int, x: int) -> tuple[int, ShiftAddTrace]:
    w, x = _check_weight(w), _check_int8(x)
    trace = ShiftAddTrace()
    acc = 0
    for i in range(WEIGHT_BITS):
        if (w >> i) & 1:
            term = x << i
            if i:
                trace.shift_count += 1
            if trace.partial_terms:
                trace.add_count += 1
            trace.partial_terms.append((i, term))
            acc += term
    return acc, trace


def mixpe_a8(w: int, x: int) -> int:
    """UINT4 x INT8 product as a sum of bit-selected left shifts of ``x``."""
    return mixpe_a8_trace(w, x)[0]


def mixpe_a16_scale(x, i: int) -> int:
    """Scale a binary16 pattern by ``2**i`` (i in 0..3) via its exponent field.

    Normal values get ``i`` added to the exponent field, saturating to a
    signed infinity.  Subnormals shift their mantissa left one step at a time
    and pick up exponent 1 once the implicit bit appears.  Infinities and
    NaNs pass through unchanged.  Power-of-two scaling is exact, so no
    rounding is ever needed.
    """
    if not 0 <= i <= 3:
        raise ValueError(f"shift amount {i} outside 0..3")
    b = x.bits if isinstance(x, Half) else int(x)
    sign = b & SIGN_MASK
    e = (b & EXP_MASK) >> MANT_BITS
    m = b & MANT_MASK
    if e == EXP_MAX:
        return b
    if e:
        e += i
        if e >= EXP_MAX:
            return sign | POS_INF
        return sign | (e << MANT_BITS) | m
    for _ in range(i):
        if e:
            e += 1
        else:
            m <<= 1
            if m >> MANT_BITS:
                e = 1
                m &= MANT_MASK
    return sign | (e << MANT_BITS) | m


def mixpe_a16_trace(w: int, x) -> tuple[float, ShiftAddTrace]:
    w = _check_weight(w)
    trace = ShiftAddTrace()
    acc = 0.0
    for i in range(WEIGHT_BITS):
        if (w >> i) & 1:
            term = half_to_real(mixpe_a16_scale(x, i))
            if i:
                trace.shift_count += 1
            if trace.partial_terms:
                trace.add_count += 1
            trace.partial_terms.append((i, term))
            acc += term
    return acc, trace


def mixpe_a16(w: int, x) -> float:
    """UINT4 x binary16 product, accumulated in a 64-bit real."""
    return mixpe_a16_trace(w, x)[0]


def _as_half_bits(v) -> int:
    if isinstance(v, Half):
        return v.bits
    if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool):
        bits = half_from_real(float(v))
        exact = half_to_real(bits)
        if exact == float(v) or (exact != exact and v != v):
            return bits
    raise TypeError(f"{v!r} is not a binary16 operand")


def reference_pe(kind: PEKind, w, x):
    """Plain multiplier PE in the native precision of ``kind``."""
    kind = kind.functional_kind
    if kind is PEKind.INT8_MUL:
        for v in (w, x):
            if isinstance(v, (bool, float, Half)) or not isinstance(v, (int, np.integer)):
                raise TypeError(f"{v!r} is not an integer operand")
        return _check_int8(w) * _check_int8(x)
    if kind is PEKind.FP16_MUL:
        a, b = half_to_real(_as_half_bits(w)), half_to_real(_as_half_bits(x))
        # binary16 x binary16 is exact in binary64, so this rounds once
        return half_to_real(half_from_real(a * b))
    if kind is PEKind.MIXPE_A8:
        return mixpe_a8(w, x)
    return mixpe_a16(w, _as_half_bits(x))


# ---------------------------------------------------------------------------
# vectorized kernels used by the GEMM pipelines

def weight_bit_planes(codes: np.ndarray) -> list[np.ndarray]:
    """Boolean masks, one per weight bit, selecting the shift terms."""
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() >= (1 << WEIGHT_BITS)):
        raise ValueError("weight codes must be UINT4")
    codes = codes.astype(np.uint8)
    return [((codes >> i) & 1).astype(bool) for i in range(WEIGHT_BITS)]


def mixpe_a16_scale_array(bits: np.ndarray, i: int) -> np.ndarray:
    """Vectorized :func:`mixpe_a16_scale` over a ``uint16`` array."""
    if not 0 <= i <= 3:
        raise ValueError(f"shift amount {i} outside 0..3")
    b = np.asarray(bits).astype(np.int32)
    sign = b & SIGN_MASK
    e = (b & EXP_MASK) >> MANT_BITS
    m = b & MANT_MASK
    special = e == EXP_MAX
    normal = (e != 0) & ~special
    e_norm = e + i
    out_norm = np.where(e_norm >= EXP_MAX, sign | POS_INF, sign | (e_norm << MANT_BITS) | m)
    se, sm = np.zeros_like(e), m.copy()
    for _ in range(i):
        promoted = se != 0
        sm = np.where(promoted, sm, sm << 1)
        carry = ~promoted & ((sm >> MANT_BITS) != 0)
        se = np.where(promoted, se + 1, np.where(carry, 1, 0))
        sm = sm & MANT_MASK
    out_sub = sign | (se << MANT_BITS) | sm
    out = np.where(normal, out_norm, out_sub)
    out = np.where(special, b, out)
    return out.astype(np.uint16)


def mixpe_a8_group_dot(w_codes: np.ndarray, x_codes: np.ndarray) -> np.ndarray:
    """Integer dot products of every activation row with every weight row.

    ``x_codes`` is (m, g) INT8, ``w_codes`` is (n, g) UINT4.  Returns the
    (m, n) int32 shift-and-add sums.
    """
    x = np.asarray(x_codes).astype(np.int32)
    if x.size and (x.min() < INT8_MIN or x.max() > INT8_MAX):
        raise ValueError("activation codes must be INT8")
    acc = np.zeros((x.shape[0], np.shape(w_codes)[0]), dtype=np.int32)
    for i, plane in enumerate(weight_bit_planes(w_codes)):
        if not plane.any():
            continue
        shifted = x << i
        acc += np.where(plane[None, :, :], shifted[:, None, :], 0).sum(axis=-1, dtype=np.int32)
    return acc


def mixpe_a16_group_dot(w_codes: np.ndarray, x_bits: np.ndarray) -> np.ndarray:
    """Real-accumulated dot products of binary16 activations with UINT4 weights."""
    x_bits = np.asarray(x_bits, dtype=np.uint16)
    acc = np.zeros((x_bits.shape[0], np.shape(w_codes)[0]), dtype=np.float64)
    for i, plane in enumerate(weight_bit_planes(w_codes)):
        if not plane.any():
            continue
        scaled = half_to_real_array(mixpe_a16_scale_array(x_bits, i))
        acc += np.where(plane[None, :, :], scaled[:, None, :], 0.0).sum(axis=-1)
    return acc
