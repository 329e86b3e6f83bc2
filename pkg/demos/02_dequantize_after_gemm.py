"""Moving dequantization out of the inner loop.

The usual kernel rebuilds every real weight ``s * (Q - z)`` before the
multiply.  Factoring the group scale out of the sum leaves an integer dot
product per group plus one correction using the activations' group sum,
so dequantization happens once per group instead of once per weight.
"""
import numpy as np

from mixpe import GemmProblem, Granularity, Signedness, gemm_dequant_after, gemm_dequant_before, quantize
from mixpe.mpgemm import dequant_op_ratio
from mixpe.pe import PEKind
from mixpe.quant import dequantize, quantize_activations

rng = np.random.default_rng(0)
problem = GemmProblem(m=8, n=256, k=1024, g=128)

w = quantize(rng.standard_normal((problem.n, problem.k)), 4, Signedness.UNSIGNED, Granularity.per_group(problem.g))
x = quantize_activations(rng.standard_normal((problem.m, problem.k)))

before, c_before = gemm_dequant_before(x, w, problem)
after, c_after = gemm_dequant_after(x, w, problem, PEKind.MIXPE_A8)
dense = dequantize(x) @ dequantize(w).T

err = np.abs(after - dense).max() / np.abs(dense).max()
print(f"max relative error vs dense GEMM: {err:.2e}")
print(f"before/after agree to {np.abs(after - before).max():.2e}")

print("dequantization work")
print(f"  before: {c_before.dequant_mults:>8} multiplies, {c_before.dequant_subs} subtractions")
print(f"  after:  {c_after.group_dequants:>8} group scalings, {c_after.token_sum_adds} adds for the zero-point term")
print(f"  ratio:  {dequant_op_ratio(problem)}")

# the same pipeline with binary16 activations
a16, _ = gemm_dequant_after(rng.standard_normal((problem.m, problem.k)), w, problem, PEKind.MIXPE_A16)
print("W4A16 output shape:", a16.shape)
