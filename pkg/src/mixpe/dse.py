"""Quantization SNR and the SNR vs. area-power design-space sweep."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .arch import CostTable, SystolicConfig, default_cost_table
from .numerics import half_from_real_array, half_to_real_array
from .pe import PEKind
from .quant import Granularity, Signedness, dequantize, quantize, quantize_activations

REFERENCE_PES = 16  # 4x4 INT8 array normalizes the cost axis


def snr(original, reconstructed, *, db: bool = True) -> float:
    """Signal power over quantization-noise power.

    Returned in decibels (``10*log10``) unless ``db=False``.  Exact
    reconstruction gives ``inf``.
    """
    x = np.asarray(original, dtype=np.float64)
    y = np.asarray(reconstructed, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    signal = float(np.sum(x * x))
    if signal == 0.0:
        raise ValueError("SNR is undefined for an all-zero signal")
    noise = float(np.sum((y - x) ** 2))
    if noise == 0.0:
        return math.inf
    ratio = signal / noise
    return 10.0 * math.log10(ratio) if db else ratio


@dataclass(frozen=True)
class QuantScheme:
    """Weight format plus activation format.

    ``weight_bits`` of 16 means binary16 weights (no integer quantization);
    ``activation_bits`` of 8 means per-token symmetric INT8 and 16 means
    binary16.
    """

    weight_bits: int = 4
    activation_bits: int = 8
    weight_signedness: Signedness = Signedness.UNSIGNED
    granularity: Granularity = Granularity.per_group(128)

    def __post_init__(self):
        if self.weight_bits not in (4, 8, 16):
            raise ValueError(f"unsupported weight bits {self.weight_bits}")
        if self.activation_bits not in (8, 16):
            raise ValueError(f"unsupported activation bits {self.activation_bits}")

    @property
    def label(self) -> str:
        tag = f"W{self.weight_bits}A{self.activation_bits}"
        if self.weight_bits == 16:
            return tag
        return f"{tag}-{str(self.granularity)}"

    def quantize_weights(self, w: np.ndarray) -> np.ndarray:
        if self.weight_bits == 16:
            return half_to_real_array(half_from_real_array(w))
        q = quantize(w, self.weight_bits, self.weight_signedness, self.granularity)
        return dequantize(q)

    def quantize_activations(self, x: np.ndarray) -> np.ndarray:
        if self.activation_bits == 16:
            return half_to_real_array(half_from_real_array(x))
        return dequantize(quantize_activations(x, 8))


def snr_for_scheme(data, scheme: QuantScheme, *, db: bool = True) -> float:
    """SNR of ``data`` after the scheme's weight quantize/dequantize round trip."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    return snr(data, scheme.quantize_weights(data), db=db)


class IncompatibleDesign(ValueError):
    pass


@dataclass(frozen=True)
class DesignPoint:
    scheme: QuantScheme
    pe_kind: PEKind
    rows: int = 4
    cols: int = 4

    def validate(self) -> None:
        s, k = self.scheme, self.pe_kind
        if k.is_mixpe:
            if s.weight_bits != 4 or s.weight_signedness is not Signedness.UNSIGNED:
                raise IncompatibleDesign(f"{k.value} needs UINT4 weights, got {s.label}")
        if k.activation_bits != s.activation_bits:
            raise IncompatibleDesign(f"{k.value} takes {k.activation_bits}-bit activations, got {s.label}")
        if s.weight_bits > k.activation_bits:
            raise IncompatibleDesign(f"{k.value} cannot hold {s.weight_bits}-bit weights")

    @property
    def label(self) -> str:
        return f"{self.scheme.label}/{self.pe_kind.value}/{self.rows}x{self.cols}"

    def config(self) -> SystolicConfig:
        return SystolicConfig(
            rows=self.rows,
            cols=self.cols,
            pe_kind=self.pe_kind,
            weight_bits=self.scheme.weight_bits,
            activation_bits=self.scheme.activation_bits,
        )


@dataclass
class ParetoPoint:
    snr_db: float
    hw_cost: float
    design: DesignPoint
    dominated: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "design": self.design.label,
            "scheme": self.design.scheme.label,
            "pe_kind": self.design.pe_kind.value,
            "rows": self.design.rows,
            "cols": self.design.cols,
            "snr_db": _encode_snr(self.snr_db),
            "hw_cost": None if math.isnan(self.hw_cost) else self.hw_cost,
            "dominated": self.dominated,
            "error": self.error,
        }


def _encode_snr(v: float):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return None
    return "inf" if math.isinf(v) else v


def hw_cost(design: DesignPoint, table: CostTable) -> float:
    """Whole-array normalized area x power, 1.0 for a 4x4 INT8 array."""
    c = table[design.pe_kind]
    scale = design.rows * design.cols / REFERENCE_PES
    return (scale * c.area) * (scale * c.power)


def design_snr(design: DesignPoint, weights: np.ndarray, activations: np.ndarray | None) -> float:
    """SNR of the design's numerics.

    Without activations this is the weight round-trip SNR.  With activations
    it is the SNR of the GEMM output computed from the quantized operands
    against the full-precision product.
    """
    if activations is None:
        return snr_for_scheme(weights, design.scheme)
    ref = activations @ weights.T
    approx = design.scheme.quantize_activations(activations) @ design.scheme.quantize_weights(weights).T
    return snr(ref, approx)


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    """Higher-or-equal SNR at lower-or-equal cost, strictly better in one."""
    return (a.snr_db >= b.snr_db and a.hw_cost <= b.hw_cost) and (
        a.snr_db > b.snr_db or a.hw_cost < b.hw_cost
    )


def mark_frontier(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Set ``dominated`` flags with a sort-and-scan pass.

    Points are scanned by ascending cost (ties by descending SNR); a point
    is dominated iff some cheaper-or-equal point already reached a higher
    SNR, or an equal-cost point has strictly higher SNR.
    """
    valid = [p for p in points if p.error is None]
    order = sorted(valid, key=lambda p: (p.hw_cost, -p.snr_db))
    best = -math.inf
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and order[j].hw_cost == order[i].hw_cost:
            j += 1
        block = order[i:j]
        top = block[0].snr_db
        for p in block:
            p.dominated = p.snr_db < top or p.snr_db <= best
        best = max(best, top)
        i = j
    return points


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MPX_THREADS", "1")))
    except ValueError:
        return 1


def sweep(
    points: list[DesignPoint],
    data: np.ndarray,
    cost_table: CostTable | None = None,
    activations: np.ndarray | None = None,
) -> list[ParetoPoint]:
    """Evaluate every design point and flag the dominated ones.

    Incompatible points are kept with ``error`` set and take no part in the
    dominance comparison.  Output order follows ``points``.
    """
    if not points:
        raise ValueError("sweep needs at least one design point")
    table = cost_table or default_cost_table()
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))

    def evaluate(design: DesignPoint) -> ParetoPoint:
        try:
            design.validate()
            return ParetoPoint(design_snr(design, data, activations), hw_cost(design, table), design)
        except (ValueError, KeyError) as e:
            return ParetoPoint(math.nan, math.nan, design, dominated=True, error=str(e))

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(evaluate, points))
    return mark_frontier(results)


def frontier(points: list[ParetoPoint]) -> list[ParetoPoint]:
    return [p for p in points if p.error is None and not p.dominated]


def default_design_points() -> list[DesignPoint]:
    schemes = []
    for g in (32, 64, 128):
        schemes.append(QuantScheme(4, 8, granularity=Granularity.per_group(g)))
        schemes.append(QuantScheme(4, 16, granularity=Granularity.per_group(g)))
    schemes.append(QuantScheme(4, 8, granularity=Granularity.per_row()))
    schemes.append(QuantScheme(8, 8, Signedness.SIGNED, Granularity.per_row()))
    schemes.append(QuantScheme(8, 16, Signedness.SIGNED, Granularity.per_row()))
    schemes.append(QuantScheme(16, 16))
    kinds = list(PEKind)
    points = []
    for s in schemes:
        for k in kinds:
            for dims in ((4, 4), (8, 8)):
                d = DesignPoint(s, k, *dims)
                try:
                    d.validate()
                except IncompatibleDesign:
                    continue
                points.append(d)
    return points
