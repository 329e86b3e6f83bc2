"""Quantized GEMM pipelines.

``gemm_dequant_before`` is the conventional kernel: every weight is
dequantized to a real value, then multiplied in high precision.

``gemm_dequant_after`` keeps the weights as UINT4 codes, computes each
group's partial dot product on the MixPE emulation and only then applies the
group's scale and zero-point correction::

    y = sum_G s_G * (sum_{j in G} Q_j x_j  -  z_G * sum_{j in G} x_j)

Groups are processed in ascending order and elements within a group in
ascending order, so outputs are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np

from .numerics import half_from_real_array, half_to_real_array
from .pe import PEKind, mixpe_a8_group_dot, mixpe_a16_group_dot
from .quant import (
    GranularityKind,
    GroupSizeError,
    QuantizedTensor,
    Signedness,
    dequantize,
    quantize_activations,
)


@dataclass(frozen=True)
class GemmProblem:
    """An m x n x k GEMM: activations (m, k) times weights (n, k)^T, group size g."""

    m: int
    n: int
    k: int
    g: int = 128

    def __post_init__(self):
        for name in ("m", "n", "k", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def check_groups(self) -> None:
        if self.k % self.g:
            raise GroupSizeError(f"group size {self.g} does not divide k={self.k}")

    @property
    def n_groups(self) -> int:
        self.check_groups()
        return self.k // self.g

    @property
    def macs(self) -> int:
        return self.m * self.n * self.k


@dataclass
class OpCounters:
    """Operation counts for one pass over the weight matrix.

    ``dequant_mults``/``dequant_subs`` count per-weight-element dequantization
    work, ``group_dequants`` counts per-group scale/zero-point applications
    to weight groups, ``pe_ops`` counts PE invocations and
    ``token_sum_adds`` counts additions spent on the zero-point term.
    """

    dequant_mults: int = 0
    dequant_subs: int = 0
    pe_ops: int = 0
    group_dequants: int = 0
    token_sum_adds: int = 0

    def __add__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_shapes(x: np.ndarray, w: QuantizedTensor, problem: GemmProblem) -> None:
    if x.shape != (problem.m, problem.k):
        raise ValueError(f"activations have shape {x.shape}, expected {(problem.m, problem.k)}")
    if w.shape != (problem.n, problem.k):
        raise ValueError(f"weights have shape {w.shape}, expected {(problem.n, problem.k)}")
    if w.granularity.kind is not GranularityKind.PER_GROUP or w.granularity.group_size != problem.g:
        raise ValueError(f"weights are quantized {w.granularity}, problem expects g{problem.g}")
    problem.check_groups()


def _activation_values(x) -> np.ndarray:
    if isinstance(x, QuantizedTensor):
        return dequantize(x)
    return np.asarray(x, dtype=np.float64)


def gemm_dequant_before(x, w: QuantizedTensor, problem: GemmProblem) -> tuple[np.ndarray, OpCounters]:
    """Dequantize all of ``w`` first, then run a dense real GEMM."""
    xv = _activation_values(x)
    _check_shapes(xv, w, problem)
    s, z = w.expanded_params()
    diff = w.values - z
    w_hat = diff * s
    counters = OpCounters(
        dequant_subs=diff.size,
        dequant_mults=w_hat.size,
        pe_ops=problem.macs,
    )
    out = np.zeros((problem.m, problem.n))
    for r in range(problem.m):
        # fixed ascending-k accumulation
        out[r] = np.add.reduce(xv[r][None, :] * w_hat, axis=1)
    return out, counters


def precompute_token_group_sums(x, problem: GemmProblem) -> np.ndarray:
    """Per-(row, group) sums of the activations, shared by all weight rows."""
    xv = np.asarray(x)
    if xv.shape != (problem.m, problem.k):
        raise ValueError(f"activations have shape {xv.shape}, expected {(problem.m, problem.k)}")
    return xv.reshape(problem.m, problem.n_groups, problem.g).sum(axis=-1)


def group_partial_sums(x, w: QuantizedTensor, problem: GemmProblem, pe_kind: PEKind) -> np.ndarray:
    """Raw per-group MixPE dot products, shape (m, n, k/g).

    For ``MIXPE_A8`` ``x`` holds INT8 codes and the result is int32; for
    ``MIXPE_A16`` ``x`` holds binary16 patterns and the result is real.
    """
    if pe_kind is PEKind.MIXPE_A8:
        kernel = mixpe_a8_group_dot
        out = np.zeros((problem.m, problem.n, problem.n_groups), dtype=np.int32)
    elif pe_kind is PEKind.MIXPE_A16:
        kernel = mixpe_a16_group_dot
        out = np.zeros((problem.m, problem.n, problem.n_groups))
    else:
        raise ValueError(f"{pe_kind.value} has no dequantize-after-GEMM functional model")
    g = problem.g
    for G in range(problem.n_groups):
        cols = slice(G * g, (G + 1) * g)
        out[:, :, G] = kernel(w.values[:, cols], x[:, cols])
    return out


def gemm_dequant_after(
    x, w: QuantizedTensor, problem: GemmProblem, pe_kind: PEKind = PEKind.MIXPE_A8
) -> tuple[np.ndarray, OpCounters]:
    """Per-group MixPE GEMM followed by per-group dequantization.

    ``MIXPE_A8`` takes INT8 activations: either a signed 8-bit
    :class:`QuantizedTensor` with zero point 0, or real values that are then
    quantized per token.  The activation scale is folded into the group scale.
    ``MIXPE_A16`` takes real activations and rounds them to binary16.
    """
    if pe_kind not in (PEKind.MIXPE_A8, PEKind.MIXPE_A16):
        raise ValueError(f"{pe_kind.value} has no dequantize-after-GEMM functional model")
    if w.signedness is not Signedness.UNSIGNED or w.bits != 4:
        raise ValueError("MixPE weights must be UINT4 codes")

    if pe_kind is PEKind.MIXPE_A8:
        xq = x if isinstance(x, QuantizedTensor) else quantize_activations(x)
        if xq.bits != 8 or xq.signedness is not Signedness.SIGNED or np.any(xq.zero_points):
            raise ValueError("W4A8 activations must be symmetric signed INT8")
        if xq.granularity.kind is GranularityKind.PER_GROUP:
            raise ValueError("W4A8 activations must be quantized per tensor or per token")
        pe_input = xq.values
        x_scale = np.broadcast_to(xq.scales, (problem.m, 1))
        token_x = xq.values
    else:
        xv = _activation_values(x)
        pe_input = half_from_real_array(xv)
        x_scale = np.ones((problem.m, 1))
        token_x = half_to_real_array(pe_input)

    _check_shapes(np.asarray(pe_input), w, problem)
    partial = group_partial_sums(pe_input, w, problem, pe_kind)
    token_sums = precompute_token_group_sums(token_x, problem)

    # s * z is formed once per weight group at load time
    s = w.scales
    sz = w.scales * w.zero_points
    out = np.zeros((problem.m, problem.n))
    for G in range(problem.n_groups):
        out += s[None, :, G] * partial[:, :, G] - sz[None, :, G] * token_sums[:, G][:, None]
    out *= x_scale

    counters = OpCounters(
        pe_ops=problem.macs,
        group_dequants=s.size,
        token_sum_adds=token_x.size + problem.m * problem.n * problem.n_groups,
    )
    return out, counters


def dequant_op_ratio(problem: GemmProblem) -> Fraction:
    """Group dequantizations per baseline element dequantization (``1/g``)."""
    after = problem.n * problem.n_groups
    before = problem.n * problem.k
    return Fraction(after, before)
