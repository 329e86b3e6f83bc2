"""Output-stationary systolic-array performance and energy model.

Cycle model (one GEMM, R x C array, MAC throughput ``t`` per PE per cycle)::

    compute  = ceil(m/R) * ceil(n/C) * (ceil(k/t) + R + C - 2)
    before   = dequant_cost * ceil(n*k / (R*C))          # weight upscaling in the main loop
    after    = ceil(m/R) * ceil(n*(k/g) / C)             # per-group epilogue per tile row

``compute`` is the usual tile fill / reduce / drain skew of an
output-stationary array.  With ``t = 1`` and ``dequant_cost = 1`` the model
reduces to the plain formulas above.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .mpgemm import GemmProblem, OpCounters
from .pe import PEKind

SCALE_BYTES = 2
ZERO_BYTES = 1
OUTPUT_BYTES = 4


class Pipeline(enum.Enum):
    DEQUANT_BEFORE = "before"
    DEQUANT_AFTER = "after"

    @classmethod
    def parse(cls, name: str) -> "Pipeline":
        for p in cls:
            if name.lower() in (p.value, p.name.lower()):
                return p
        raise ValueError(f"unknown pipeline {name!r}; choose 'before' or 'after'")


def default_pipeline(kind: PEKind) -> Pipeline:
    return Pipeline.DEQUANT_AFTER if kind.is_mixpe else Pipeline.DEQUANT_BEFORE


@dataclass
class PECost:
    area: float
    power: float
    macs_per_cycle: float = 1.0
    dequant_cost: float = 1.0
    calibrated: bool = False
    source: str = ""

    def __post_init__(self):
        for name in ("area", "power", "macs_per_cycle", "dequant_cost"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class CostTable:
    """Normalized PE area/power plus memory access energies.

    Energies are in arbitrary but consistent units: ``pe_cycle_energy`` is
    the energy of one PE at normalized power 1.0 for one cycle.
    """

    pe: dict[PEKind, PECost]
    dram_energy: float = 100.0
    buffer_energy: float = 1.0
    pe_cycle_energy: float = 20.0
    static_fraction: float = 0.10

    def __post_init__(self):
        for name in ("dram_energy", "buffer_energy", "pe_cycle_energy"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.static_fraction < 1:
            raise ValueError("static_fraction must be in [0, 1)")

    def __getitem__(self, kind: PEKind) -> PECost:
        try:
            return self.pe[kind]
        except KeyError:
            raise KeyError(f"cost table has no entry for {kind.value}") from None

    def to_dict(self) -> dict:
        return {
            "pe": {k.value: asdict(v) for k, v in self.pe.items()},
            "dram_energy": self.dram_energy,
            "buffer_energy": self.buffer_energy,
            "pe_cycle_energy": self.pe_cycle_energy,
            "static_fraction": self.static_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CostTable":
        known = {"pe", "dram_energy", "buffer_energy", "pe_cycle_energy", "static_fraction"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown cost table keys: {sorted(unknown)}")
        pe = {PEKind.parse(k): PECost(**v) for k, v in data["pe"].items()}
        return cls(pe=pe, **{k: v for k, v in data.items() if k != "pe"})

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "CostTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


# FP16 multiplier relative to the INT8 one; not stated numerically anywhere
FP16_AREA = 2.0
FP16_POWER = 2.2


def default_cost_table() -> CostTable:
    """Area/power ratios from the FPGA synthesis results, plus calibrated baselines."""
    synthesis = "FPGA synthesis ratios"
    pe = {
        PEKind.INT8_MUL: PECost(1.00, 1.00, source="reference"),
        PEKind.MIXPE_A8: PECost(0.46, 0.79, macs_per_cycle=2.0, source=synthesis),
        PEKind.FP16_MUL: PECost(FP16_AREA, FP16_POWER, calibrated=True, source="calibration"),
        PEKind.MIXPE_A16: PECost(0.77 * FP16_AREA, 0.36 * FP16_POWER, source=synthesis),
        PEKind.BITFUSION_LIKE: PECost(
            1.10, 1.05, dequant_cost=0.50, calibrated=True, source="calibration"
        ),
        PEKind.OLACCEL_LIKE: PECost(
            1.20, 1.10, dequant_cost=0.25, calibrated=True, source="calibration"
        ),
    }
    return CostTable(pe=pe)


@dataclass
class SystolicConfig:
    rows: int = 4
    cols: int = 4
    pe_kind: PEKind = PEKind.MIXPE_A8
    frequency: float = 250e6
    buffer_bytes: int = 256 * 1024
    group_size: int = 128
    weight_bits: int = 4
    activation_bits: int | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array dimensions must be at least 1")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if self.activation_bits is None:
            self.activation_bits = self.pe_kind.activation_bits

    @property
    def n_pes(self) -> int:
        return self.rows * self.cols

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pe_kind"] = self.pe_kind.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystolicConfig":
        data = dict(data)
        if "pe_kind" in data:
            data["pe_kind"] = PEKind.parse(data["pe_kind"])
        return cls(**data)


@dataclass(frozen=True)
class CycleBreakdown:
    compute: int
    overhead: int

    @property
    def total(self) -> int:
        return self.compute + self.overhead

    @property
    def overhead_fraction(self) -> float:
        return self.overhead / self.total if self.total else 0.0


def cycle_breakdown(
    problem: GemmProblem, cfg: SystolicConfig, pipeline: Pipeline, table: CostTable | None = None
) -> CycleBreakdown:
    cost = (table or default_cost_table())[cfg.pe_kind]
    R, C = cfg.rows, cfg.cols
    tile_rows = math.ceil(problem.m / R)
    steps = math.ceil(problem.k / cost.macs_per_cycle)
    compute = tile_rows * math.ceil(problem.n / C) * (steps + R + C - 2)
    if pipeline is Pipeline.DEQUANT_BEFORE:
        overhead = math.ceil(cost.dequant_cost * math.ceil(problem.n * problem.k / (R * C)))
    else:
        overhead = tile_rows * math.ceil(problem.n * problem.n_groups / C)
    return CycleBreakdown(compute, overhead)


def cycle_model(
    problem: GemmProblem, cfg: SystolicConfig, pipeline: Pipeline, table: CostTable | None = None
) -> int:
    return cycle_breakdown(problem, cfg, pipeline, table).total


def dequant_overhead_fraction(
    problem: GemmProblem, cfg: SystolicConfig, pipeline: Pipeline, table: CostTable | None = None
) -> float:
    return cycle_breakdown(problem, cfg, pipeline, table).overhead_fraction


def pipeline_counters(problem: GemmProblem, pipeline: Pipeline) -> OpCounters:
    """Closed-form counters; equal to what the functional pipelines report."""
    if pipeline is Pipeline.DEQUANT_BEFORE:
        nk = problem.n * problem.k
        return OpCounters(dequant_mults=nk, dequant_subs=nk, pe_ops=problem.macs)
    groups = problem.n_groups
    return OpCounters(
        pe_ops=problem.macs,
        group_dequants=problem.n * groups,
        token_sum_adds=problem.m * problem.k + problem.m * problem.n * groups,
    )


@dataclass
class SimReport:
    cycles: int
    latency_seconds: float
    energy_total: float
    energy_breakdown: dict[str, float]
    bytes_moved: dict[str, int]
    op_counters: OpCounters
    dequant_overhead_fraction: float
    overhead_cycles: int = 0
    calibrated: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cycles": self.cycles,
            "latency_seconds": self.latency_seconds,
            "energy_total": self.energy_total,
            "energy_breakdown": dict(self.energy_breakdown),
            "bytes_moved": dict(self.bytes_moved),
            "op_counters": self.op_counters.as_dict(),
            "dequant_overhead_fraction": self.dequant_overhead_fraction,
            "overhead_cycles": self.overhead_cycles,
            "calibrated": self.calibrated,
            "meta": dict(self.meta),
        }


def traffic(problem: GemmProblem, cfg: SystolicConfig) -> tuple[dict[str, int], int]:
    """DRAM bytes per operand and total on-chip buffer bytes accessed.

    Weights (with their group parameters) are fetched once if they fit in
    half of the buffer, else once per tile row.  Activations are fetched once
    if one tile row's slab fits in half of the buffer, else once per tile
    column.
    """
    tile_rows = math.ceil(problem.m / cfg.rows)
    tile_cols = math.ceil(problem.n / cfg.cols)
    w = math.ceil(problem.n * problem.k * cfg.weight_bits / 8)
    a = math.ceil(problem.m * problem.k * cfg.activation_bits / 8)
    o = problem.m * problem.n * OUTPUT_BYTES
    p = problem.n * problem.n_groups * (SCALE_BYTES + ZERO_BYTES)
    half = cfg.buffer_bytes / 2
    w_reads = 1 if w + p <= half else tile_rows
    slab = math.ceil(min(problem.m, cfg.rows) * problem.k * cfg.activation_bits / 8)
    a_reads = 1 if slab <= half else tile_cols
    dram = {
        "weights": w * w_reads,
        "activations": a * a_reads,
        "outputs": o,
        "group_params": p * w_reads,
    }
    buffer = w * tile_rows + a * tile_cols + o + p * tile_rows
    return dram, buffer


def energy_model(
    problem: GemmProblem,
    cfg: SystolicConfig,
    cycles: int,
    counters: OpCounters,
    table: CostTable | None = None,
    overhead_cycles: int = 0,
) -> SimReport:
    table = table or default_cost_table()
    cost = table[cfg.pe_kind]
    dram_bytes, buffer_bytes = traffic(problem, cfg)
    core = cycles * cfg.n_pes * cost.power * table.pe_cycle_energy
    dram = sum(dram_bytes.values()) * table.dram_energy
    buffer = buffer_bytes * table.buffer_energy
    static = table.static_fraction * (core + dram + buffer)
    breakdown = {"dram": dram, "buffer": buffer, "core": core, "static": static}
    return SimReport(
        cycles=cycles,
        latency_seconds=cycles / cfg.frequency,
        energy_total=dram + buffer + core + static,
        energy_breakdown=breakdown,
        bytes_moved=dram_bytes,
        op_counters=counters,
        dequant_overhead_fraction=overhead_cycles / cycles if cycles else 0.0,
        overhead_cycles=overhead_cycles,
        calibrated=cost.calibrated,
    )


def simulate(
    problem: GemmProblem,
    cfg: SystolicConfig,
    pipeline: Pipeline | None = None,
    table: CostTable | None = None,
) -> SimReport:
    """Cycle and energy estimate for one GEMM."""
    table = table or default_cost_table()
    pipeline = pipeline or default_pipeline(cfg.pe_kind)
    cyc = cycle_breakdown(problem, cfg, pipeline, table)
    report = energy_model(
        problem, cfg, cyc.total, pipeline_counters(problem, pipeline), table, cyc.overhead
    )
    report.meta.update(pe_kind=cfg.pe_kind.value, pipeline=pipeline.value)
    return report
