"""Bit-accurate model of a shift-and-add mixed-precision GEMM accelerator."""

__version__ = "0.1.0"

from .numerics import Half, half_from_real, half_to_real, round_half_even
from .quant import Granularity, QuantizedTensor, QuantParams, Signedness, dequantize, quantize
from .pe import PEKind, mixpe_a8, mixpe_a16, mixpe_a16_scale, reference_pe
from .mpgemm import GemmProblem, OpCounters, gemm_dequant_after, gemm_dequant_before
from .arch import CostTable, Pipeline, SimReport, SystolicConfig, cycle_model, default_cost_table, simulate
from .dse import DesignPoint, ParetoPoint, QuantScheme, snr, snr_for_scheme, sweep
from .workloads import ModelSpec, expand_workload, load_activation_samples, load_model_config, synth_weights

__all__ = [
    "CostTable", "DesignPoint", "GemmProblem", "Granularity", "Half", "ModelSpec", "OpCounters",
    "PEKind", "ParetoPoint", "Pipeline", "QuantParams", "QuantScheme", "QuantizedTensor",
    "Signedness", "SimReport", "SystolicConfig", "cycle_model", "default_cost_table", "dequantize",
    "expand_workload", "gemm_dequant_after", "gemm_dequant_before", "half_from_real",
    "half_to_real", "load_activation_samples", "load_model_config", "mixpe_a16",
    "mixpe_a16_scale", "mixpe_a8", "quantize", "reference_pe", "round_half_even", "simulate",
    "snr", "snr_for_scheme", "sweep", "synth_weights",
]
