"""Where dequantization hurts: small batches.

Dequantizing the whole weight matrix costs the same no matter how many
tokens share it, so its share of the runtime shrinks as the batch grows.
Deferring it to a per-group epilogue makes it small at every batch size.
"""
from mixpe import GemmProblem, Pipeline, SystolicConfig, load_model_config, simulate
from mixpe.arch import dequant_overhead_fraction
from mixpe.pe import PEKind
from mixpe.workloads import expand_workload

int8 = SystolicConfig(pe_kind=PEKind.INT8_MUL)
print("batch  before  after     (n = k = 4096, g = 128)")
for m in (2, 4, 8, 16, 32):
    p = GemmProblem(m, 4096, 4096, 128)
    b = dequant_overhead_fraction(p, int8, Pipeline.DEQUANT_BEFORE)
    a = dequant_overhead_fraction(p, int8, Pipeline.DEQUANT_AFTER)
    print(f"{m:>5}  {b:6.1%}  {a:6.2%}")

opt = load_model_config("opt-6.7b")
print(f"\n{opt.name}, whole model, cycles relative to INT8")
for batch in (2, 8, 32):
    gemms = expand_workload(opt, batch).gemms
    cycles = {
        kind: sum(simulate(t.problem, SystolicConfig(pe_kind=kind)).cycles for t in gemms)
        for kind in (PEKind.INT8_MUL, PEKind.BITFUSION_LIKE, PEKind.OLACCEL_LIKE, PEKind.MIXPE_A16, PEKind.MIXPE_A8)
    }
    base = cycles[PEKind.INT8_MUL]
    print(f"batch {batch:>2}: " + "  ".join(f"{k.value} {base / c:.2f}x" for k, c in cycles.items()))
