"""Acceptance criteria, one test per criterion.

Each criterion prints a single ``PASS``/``FAIL`` line (shown at the end of
the module under pytest, or directly with ``python tests/test_acceptance.py``).
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from mixpe import verify
from mixpe.arch import Pipeline, SystolicConfig, default_cost_table, dequant_overhead_fraction, simulate
from mixpe.dse import DesignPoint, QuantScheme, default_design_points, dominates, frontier, snr, snr_for_scheme, sweep
from mixpe.mpgemm import GemmProblem, gemm_dequant_after, gemm_dequant_before
from mixpe.numerics import half_from_real_array, half_to_real_array
from mixpe.pe import PEKind
from mixpe.quant import Granularity, Signedness, dequantize, quantize, quantize_activations
from mixpe.workloads import expand_workload, load_model_config

RESULTS: dict[int, str] = {}


def _rel(a, ref):
    return float(np.max(np.abs(a - ref)) / np.max(np.abs(ref)))


def criterion_1():
    r = verify.check_a8()
    return r.ok and r.checked == 4096, r.summary()


def criterion_2():
    r = verify.check_a16_scale()
    return r.ok and r.checked == 65536 * 4, r.summary()


def _instances(count=100, seed=2024):
    rng = np.random.default_rng(seed)
    shapes = [(16, 64, 4096, 128), (16, 64, 4096, 32)]
    while len(shapes) < count:
        g = int(rng.choice([32, 128]))
        shapes.append((int(rng.integers(1, 17)), int(rng.integers(1, 65)), g * int(rng.integers(1, 4096 // g + 1)), g))
    for m, n, k, g in shapes:
        yield GemmProblem(m, n, k, g), rng


def criterion_3():
    worst = 0.0
    count = 0
    for problem, rng in _instances():
        w = quantize(rng.standard_normal((problem.n, problem.k)), 4, Signedness.UNSIGNED,
                     Granularity.per_group(problem.g))
        x = rng.standard_normal((problem.m, problem.k))
        w_hat = dequantize(w)
        xq = quantize_activations(x)
        x8 = dequantize(xq)
        x16 = half_to_real_array(half_from_real_array(x))
        ref8, ref16 = x8 @ w_hat.T, x16 @ w_hat.T
        worst = max(
            worst,
            _rel(gemm_dequant_after(xq, w, problem, PEKind.MIXPE_A8)[0], ref8),
            _rel(gemm_dequant_before(xq, w, problem)[0], ref8),
            _rel(gemm_dequant_after(x, w, problem, PEKind.MIXPE_A16)[0], ref16),
            _rel(gemm_dequant_before(x16, w, problem)[0], ref16),
        )
        count += 1
    return count == 100 and worst <= 1e-10, f"{count} instances, max rel err {worst:.2e} (<= 1e-10)"


def criterion_4():
    rng = np.random.default_rng(4)
    tested = 0
    for n, k, g in [(1, 128, 128), (7, 256, 32), (64, 4096, 128), (33, 1024, 64), (5, 96, 1), (12, 4096, 4096)]:
        w = quantize(rng.standard_normal((n, k)), 4, Signedness.UNSIGNED, Granularity.per_group(g))
        xq = quantize_activations(rng.standard_normal((2, k)))
        p = GemmProblem(2, n, k, g)
        after = gemm_dequant_after(xq, w, p)[1]
        before = gemm_dequant_before(xq, w, p)[1]
        if Fraction(after.group_dequants, before.dequant_mults) != Fraction(1, g):
            return False, f"ratio broken at n={n}, k={k}, g={g}"
        tested += 1
    return True, f"{tested}/{tested} (n,k,g) exactly 1/g"


def criterion_5():
    batches = (2, 4, 8, 16, 32)
    cfg = SystolicConfig(pe_kind=PEKind.INT8_MUL)
    before = [dequant_overhead_fraction(GemmProblem(m, 4096, 4096, 128), cfg, Pipeline.DEQUANT_BEFORE) for m in batches]
    after = [dequant_overhead_fraction(GemmProblem(m, 4096, 4096, 128), cfg, Pipeline.DEQUANT_AFTER) for m in batches]
    mono = all(a >= b for f in (before, after) for a, b in zip(f, f[1:]))
    below = all(a < b for a, b in zip(after, before))
    detail = "before " + " ".join(f"{v:.3f}" for v in before) + " | after " + " ".join(f"{v:.4f}" for v in after)
    return mono and below, detail


def criterion_6():
    t = default_cost_table()
    ratios = {
        "A8 area": (t[PEKind.MIXPE_A8].area / t[PEKind.INT8_MUL].area, 0.46),
        "A8 power": (t[PEKind.MIXPE_A8].power / t[PEKind.INT8_MUL].power, 0.79),
        "A16 area": (t[PEKind.MIXPE_A16].area / t[PEKind.FP16_MUL].area, 0.77),
        "A16 power": (t[PEKind.MIXPE_A16].power / t[PEKind.FP16_MUL].power, 0.36),
    }
    ok = all(abs(v - want) <= 0.01 for v, want in ratios.values())
    return ok, ", ".join(f"{k} {v:.2f}" for k, (v, _) in ratios.items())


def criterion_7():
    workload = expand_workload(load_model_config("opt-6.7b"), 8)
    order = [PEKind.MIXPE_A8, PEKind.MIXPE_A16, PEKind.OLACCEL_LIKE, PEKind.BITFUSION_LIKE, PEKind.INT8_MUL]
    cycles = {k: sum(simulate(t.problem, SystolicConfig(pe_kind=k)).cycles for t in workload.gemms) for k in order}
    ordered = all(cycles[a] < cycles[b] for a, b in zip(order, order[1:]))
    speedup = cycles[PEKind.INT8_MUL] / cycles[PEKind.MIXPE_A8]
    return ordered and speedup >= 2, f"ordering {'held' if ordered else 'broken'}, MixPE-A8 speedup {speedup:.2f}x"


def criterion_8():
    x = np.random.default_rng(8).standard_normal((64, 1024))
    inf_ok = snr(x, x) == math.inf
    s8 = snr_for_scheme(x, QuantScheme(8, 8, Signedness.SIGNED, Granularity.per_row()))
    s4 = snr_for_scheme(x, QuantScheme(4, 8, granularity=Granularity.per_row()))
    chain = [snr_for_scheme(x, QuantScheme(4, 8, granularity=g)) for g in
             (Granularity.per_group(64), Granularity.per_group(128), Granularity.per_row(), Granularity.per_tensor())]
    refined = all(a >= b for a, b in zip(chain, chain[1:]))
    detail = f"8b {s8:.1f} dB > 4b {s4:.1f} dB; chain " + " >= ".join(f"{v:.2f}" for v in chain)
    return inf_ok and s8 > s4 and refined, detail


def criterion_9():
    data = np.random.default_rng(9).standard_normal((128, 1024))
    acts = np.random.default_rng(10).standard_normal((32, 1024))
    pts = sweep(default_design_points(), data, activations=acts)
    valid = [p for p in pts if p.error is None]
    brute_ok = all(p.dominated == any(dominates(q, p) for q in valid if q is not p) for p in valid)
    # MixPE vs. the multiplier PE that runs the same scheme on the same array
    pairs = {(PEKind.MIXPE_A8, PEKind.INT8_MUL), (PEKind.MIXPE_A16, PEKind.FP16_MUL)}
    beaten = 0
    for mix, mul in pairs:
        for scheme in {p.design.scheme for p in valid if p.design.pe_kind is mix}:
            a = next(p for p in valid if p.design == DesignPoint(scheme, mix))
            b = next(p for p in valid if p.design == DesignPoint(scheme, mul))
            beaten += dominates(a, b) and a.snr_db == b.snr_db
    mixpe_on_front = any(p.design.pe_kind.is_mixpe for p in frontier(pts))
    return brute_ok and beaten > 0 and mixpe_on_front, (
        f"scan == brute force: {brute_ok}; MixPE dominates {beaten} same-scheme multiplier points; "
        f"frontier size {len(frontier(pts))}"
    )


CRITERIA = [
    (1, "W4A8 PE exhaustive equivalence", criterion_1, 1.0),
    (2, "binary16 power-of-two scaling exhaustive", criterion_2, 5.0),
    (3, "dequant-after == dequant-before", criterion_3, 30.0),
    (4, "dequantization frequency 1/g", criterion_4, None),
    (5, "overhead trend over batch", criterion_5, 1.0),
    (6, "cost table ratios", criterion_6, None),
    (7, "OPT-6.7B batch-8 speedup ordering", criterion_7, 10.0),
    (8, "SNR properties", criterion_8, 5.0),
    (9, "Pareto correctness", criterion_9, 5.0),
]


def evaluate(num, name, fn, budget):
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    within = budget is None or elapsed < budget
    limit = f" < {budget:g}s" if budget else ""
    line = f"[{'PASS' if ok and within else 'FAIL'}] {num}. {name}: {detail} ({elapsed:.2f}s{limit})"
    RESULTS[num] = line
    return ok, within, line


@pytest.fixture(scope="module", autouse=True)
def report(request):
    yield
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\nacceptance criteria:")
        for num in sorted(RESULTS):
            print(RESULTS[num])


@pytest.mark.parametrize("num, name, fn, budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(num, name, fn, budget):
    ok, within, line = evaluate(num, name, fn, budget)
    assert ok, line
    assert within, line


if __name__ == "__main__":
    import sys

    failed = 0
    for c in CRITERIA:
        ok, within, line = evaluate(*c)
        print(line)
        failed += not (ok and within)
    sys.exit(1 if failed else 0)
