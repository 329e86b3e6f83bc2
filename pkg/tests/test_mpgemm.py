from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import naive_gemm, rel_err
from mixpe.mpgemm import (
    GemmProblem,
    dequant_op_ratio,
    gemm_dequant_after,
    gemm_dequant_before,
    group_partial_sums,
    precompute_token_group_sums,
)
from mixpe.numerics import half_from_real_array, half_to_real_array
from mixpe.pe import PEKind
from mixpe.quant import Granularity, GroupSizeError, QuantizedTensor, Signedness, dequantize, quantize, quantize_activations

U = Signedness.UNSIGNED


def qt(values, scales, zeros, g):
    return QuantizedTensor(
        np.array(values), np.array(scales, dtype=float), np.array(zeros), 4, U, Granularity.per_group(g)
    )


def int8(values):
    v = np.array(values)
    return QuantizedTensor(v, np.ones((v.shape[0], 1)), np.zeros((v.shape[0], 1), dtype=np.int64), 8,
                           Signedness.SIGNED, Granularity.per_row())


def test_single_element():
    w = qt([[3]], [[2.0]], [[1]], 1)
    y, _ = gemm_dequant_before(np.array([[5.0]]), w, GemmProblem(1, 1, 1, 1))
    assert y.item() == 20.0
    y, _ = gemm_dequant_after(int8([[5]]), w, GemmProblem(1, 1, 1, 1))
    assert y.item() == 20.0


def test_hand_example_two_groups():
    w = qt([[1, 2, 3, 4]], [[1.0, 2.0]], [[0, 1]], 2)
    p = GemmProblem(1, 1, 4, 2)
    assert gemm_dequant_after(int8([[1, 1, 1, 1]]), w, p)[0].item() == 13.0
    assert gemm_dequant_before(np.ones((1, 4)), w, p)[0].item() == 13.0
    assert gemm_dequant_after(np.ones((1, 4)), w, p, PEKind.MIXPE_A16)[0].item() == 13.0


def test_identity_scale_is_integer_gemm(rng):
    codes = rng.integers(0, 16, (6, 64))
    x = rng.integers(-128, 128, (3, 64))
    w = qt(codes, np.ones((6, 1)), np.zeros((6, 1), dtype=np.int64), 64)
    y, _ = gemm_dequant_after(int8(x), w, GemmProblem(3, 6, 64, 64))
    assert np.array_equal(y, (x @ codes.T).astype(float))


def test_against_triple_loop(rng):
    p = GemmProblem(4, 8, 256, 128)
    w = quantize(rng.standard_normal((8, 256)), 4, U, Granularity.per_group(128))
    xq = quantize_activations(rng.standard_normal((4, 256)))
    ref = naive_gemm(dequantize(xq), dequantize(w))
    before, _ = gemm_dequant_before(xq, w, p)
    after, _ = gemm_dequant_after(xq, w, p)
    assert rel_err(before, ref) <= 1e-12
    assert rel_err(after, ref) <= 1e-12


def test_a16_against_dense(rng):
    p = GemmProblem(3, 16, 512, 32)
    w = quantize(rng.standard_normal((16, 512)), 4, U, Granularity.per_group(32))
    x = rng.standard_normal((3, 512))
    after, _ = gemm_dequant_after(x, w, p, PEKind.MIXPE_A16)
    xh = half_to_real_array(half_from_real_array(x))
    assert rel_err(after, xh @ dequantize(w).T) <= 1e-12


def test_partial_sums_match_big_integers(rng):
    p = GemmProblem(2, 3, 256, 128)
    codes = rng.integers(0, 16, (3, 256))
    xs = rng.integers(-128, 128, (2, 256))
    w = qt(codes, np.ones((3, 2)), np.zeros((3, 2), dtype=np.int64), 128)
    got = group_partial_sums(xs, w, p, PEKind.MIXPE_A8)
    for i in range(2):
        for j in range(3):
            for G in range(2):
                want = sum(int(a) * int(b) for a, b in zip(xs[i, G * 128:(G + 1) * 128], codes[j, G * 128:(G + 1) * 128]))
                assert int(got[i, j, G]) == want


def test_token_sums():
    p = GemmProblem(1, 1, 4, 2)
    assert precompute_token_group_sums(np.array([[1, 2, 3, 4]]), p).tolist() == [[3, 7]]
    assert not precompute_token_group_sums(np.zeros((1, 4)), p).any()
    x = np.random.default_rng(3).standard_normal((4, 512))
    s = precompute_token_group_sums(x, GemmProblem(4, 1, 512, 64))
    assert np.allclose(s.sum(axis=1), x.sum(axis=1), rtol=1e-12)


@given(st.sampled_from([(64, 1), (128, 1), (256, 4), (512, 128), (4096, 128), (1024, 32)]), st.integers(1, 40))
def test_counter_laws(kg, n):
    k, g = kg
    m = 3
    p = GemmProblem(m, n, k, g)
    rng = np.random.default_rng(n)
    w = quantize(rng.standard_normal((n, k)), 4, U, Granularity.per_group(g))
    xq = quantize_activations(rng.standard_normal((m, k)))
    _, cb = gemm_dequant_before(xq, w, p)
    _, ca = gemm_dequant_after(xq, w, p)
    assert cb.dequant_mults == cb.dequant_subs == n * k
    assert ca.group_dequants == n * k // g
    assert Fraction(ca.group_dequants, cb.dequant_mults) == Fraction(1, g) == dequant_op_ratio(p)
    assert ca.token_sum_adds == m * k + m * n * (k // g)
    assert cb.pe_ops == ca.pe_ops == m * n * k


@pytest.mark.parametrize("g, k, want", [(128, 4096, Fraction(1, 128)), (1, 8, Fraction(1)), (256, 256, Fraction(1, 256))])
def test_dequant_op_ratio(g, k, want):
    assert dequant_op_ratio(GemmProblem(1, 4, k, g)) == want


def test_errors(rng):
    w = quantize(rng.standard_normal((4, 64)), 4, U, Granularity.per_group(32))
    with pytest.raises(ValueError):
        gemm_dequant_before(np.ones((2, 32)), w, GemmProblem(2, 4, 64, 32))
    with pytest.raises(ValueError):
        gemm_dequant_before(np.ones((2, 64)), w, GemmProblem(2, 4, 64, 16))
    with pytest.raises(ValueError):
        gemm_dequant_after(np.ones((2, 64)), w, GemmProblem(2, 4, 64, 32), PEKind.INT8_MUL)
    with pytest.raises(GroupSizeError):
        GemmProblem(2, 4, 100, 32).check_groups()
    with pytest.raises(ValueError):
        GemmProblem(0, 1, 1)
