"""Integer quantization with per-tensor, per-row and per-group parameters."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import InvalidQuantizationInput, round_half_even_array


class Signedness(enum.Enum):
    SIGNED = "signed"
    UNSIGNED = "unsigned"


class GranularityKind(enum.Enum):
    PER_TENSOR = "per_tensor"
    PER_ROW = "per_row"
    PER_GROUP = "per_group"


class GroupSizeError(ValueError):
    """Group size does not tile the reduction dimension."""


@dataclass(frozen=True)
class Granularity:
    kind: GranularityKind
    group_size: int | None = None

    def __post_init__(self):
        if self.kind is GranularityKind.PER_GROUP:
            if self.group_size is None or self.group_size <= 0:
                raise ValueError(f"group size must be positive, got {self.group_size}")
        elif self.group_size is not None:
            raise ValueError(f"{self.kind.value} takes no group size")

    @classmethod
    def per_tensor(cls) -> "Granularity":
        return cls(GranularityKind.PER_TENSOR)

    @classmethod
    def per_row(cls) -> "Granularity":
        return cls(GranularityKind.PER_ROW)

    @classmethod
    def per_group(cls, g: int) -> "Granularity":
        return cls(GranularityKind.PER_GROUP, int(g))

    def __str__(self) -> str:
        if self.kind is GranularityKind.PER_GROUP:
            return f"g{self.group_size}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Granularity":
        text = text.strip().lower()
        if text in ("per_tensor", "tensor"):
            return cls.per_tensor()
        if text in ("per_row", "row", "per_channel", "per_token"):
            return cls.per_row()
        if text.startswith("g") and text[1:].isdigit():
            return cls.per_group(int(text[1:]))
        raise ValueError(f"cannot parse granularity {text!r}")


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int
    bits: int
    signedness: Signedness

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        lo, hi = code_range(self.bits, self.signedness)
        if not lo <= self.zero_point <= hi:
            raise ValueError(f"zero point {self.zero_point} outside [{lo}, {hi}]")


def code_range(bits: int, signedness: Signedness) -> tuple[int, int]:
    if bits not in (4, 8):
        raise ValueError(f"unsupported bit width {bits}")
    if signedness is Signedness.UNSIGNED:
        return 0, (1 << bits) - 1
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def num_groups(k: int, granularity: Granularity, strict: bool = True) -> int:
    if granularity.kind is not GranularityKind.PER_GROUP:
        return 1
    g = granularity.group_size
    if k % g:
        if strict:
            raise GroupSizeError(f"group size {g} does not divide row length {k}")
        return math.ceil(k / g)
    return k // g


def group_param_count(rows: int, k: int, granularity: Granularity, strict: bool = True) -> int:
    """Number of (scale, zero point) pairs a tensor of this shape carries."""
    if granularity.kind is GranularityKind.PER_TENSOR:
        return 1
    if granularity.kind is GranularityKind.PER_ROW:
        return rows
    return rows * num_groups(k, granularity, strict)


@dataclass
class QuantizedTensor:
    """Integer codes plus the parameters of each quantization group.

    ``scales`` and ``zero_points`` have shape (1, 1) per tensor, (rows, 1)
    per row and (rows, n_groups) per group.
    """

    values: np.ndarray
    scales: np.ndarray
    zero_points: np.ndarray
    bits: int
    signedness: Signedness
    granularity: Granularity

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def group_width(self) -> int:
        """Columns covered by one parameter column."""
        if self.granularity.kind is GranularityKind.PER_GROUP:
            return self.granularity.group_size
        return self.values.shape[1]

    @property
    def param_count(self) -> int:
        if self.granularity.kind is GranularityKind.PER_TENSOR:
            return 1
        return self.scales.size

    def params(self, row: int, group: int = 0) -> QuantParams:
        r = 0 if self.granularity.kind is GranularityKind.PER_TENSOR else row
        return QuantParams(
            float(self.scales[r, group]), int(self.zero_points[r, group]), self.bits, self.signedness
        )

    def expanded_params(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-element (scale, zero point) arrays with the shape of ``values``."""
        rows, k = self.values.shape
        idx = np.arange(k) // self.group_width
        s = np.broadcast_to(self.scales, (rows, self.scales.shape[1]))[:, idx]
        z = np.broadcast_to(self.zero_points, (rows, self.zero_points.shape[1]))[:, idx]
        return s, z


def _check_finite(x: np.ndarray) -> None:
    bad = ~np.isfinite(x)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InvalidQuantizationInput(f"non-finite value {x[r, c]!r} at ({r}, {c})")


def _grouped(x: np.ndarray, granularity: Granularity, strict: bool) -> np.ndarray:
    """Reshape to (rows, n_groups, width), zero-padding a trailing partial group."""
    rows, k = x.shape
    if granularity.kind is GranularityKind.PER_TENSOR:
        return x.reshape(1, 1, rows * k)
    if granularity.kind is GranularityKind.PER_ROW:
        return x.reshape(rows, 1, k)
    g = granularity.group_size
    ng = num_groups(k, granularity, strict)
    if ng * g != k:
        x = np.concatenate([x, np.zeros((rows, ng * g - k))], axis=1)
    return x.reshape(rows, ng, g)


def quantize(
    x,
    bits: int,
    signedness: Signedness = Signedness.UNSIGNED,
    granularity: Granularity = Granularity.per_tensor(),
    *,
    symmetric: bool = False,
    strict: bool = True,
) -> QuantizedTensor:
    """Quantize a 2-D real tensor.

    Asymmetric mode spans each group's [min, max] range (widened to include
    zero) with 2**bits - 1 steps.  Symmetric mode uses ``max|x| / (2**(bits-1) - 1)``
    with a zero point of 0 and requires signed codes.  A group whose range is
    empty (all zeros) falls back to scale 1.

    With ``strict=False`` a group size that does not divide the row length is
    accepted and the trailing partial group is treated as zero padded.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D tensor, got shape {x.shape}")
    _check_finite(x)
    lo, hi = code_range(bits, signedness)
    grouped = _grouped(x, granularity, strict)

    if symmetric:
        if signedness is not Signedness.SIGNED:
            raise ValueError("symmetric quantization needs signed codes")
        amax = np.abs(grouped).max(axis=-1)
        scales = np.where(amax > 0, amax / hi, 1.0)
        zeros = np.zeros_like(scales, dtype=np.int64)
    else:
        xmin = np.minimum(grouped.min(axis=-1), 0.0)
        xmax = np.maximum(grouped.max(axis=-1), 0.0)
        span = xmax - xmin
        scales = np.where(span > 0, span / ((1 << bits) - 1), 1.0)
        offset = 0 if signedness is Signedness.UNSIGNED else -(1 << (bits - 1))
        zeros = round_half_even_array(offset - xmin / scales)
        zeros = np.clip(zeros, lo, hi).astype(np.int64)

    codes = round_half_even_array(grouped / scales[..., None] + zeros[..., None])
    codes = np.clip(codes, lo, hi).astype(np.int64)
    values = codes.reshape(x.shape[0], -1)[:, : x.shape[1]]
    return QuantizedTensor(values, scales, zeros, bits, signedness, granularity)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    """Real reconstruction ``(Q - z) * s`` using each element's group parameters."""
    s, z = q.expanded_params()
    return (q.values - z) * s


def quantize_activations(x, bits: int = 8) -> QuantizedTensor:
    """Per-token symmetric signed quantization used on the W4A8 activation side."""
    return quantize(x, bits, Signedness.SIGNED, Granularity.per_row(), symmetric=True)
