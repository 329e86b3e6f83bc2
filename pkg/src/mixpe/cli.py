"""Command-line entry point: ``mixpe {verify-pe,gemm-check,simulate,dse}``.

Exit codes: 0 success, 1 verification or tolerance failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, verify
from .arch import (
    CostTable,
    Pipeline,
    SystolicConfig,
    default_cost_table,
    default_pipeline,
    simulate,
)
from .dse import DesignPoint, QuantScheme, default_design_points, frontier, dominates, sweep
from .mpgemm import GemmProblem, gemm_dequant_after, gemm_dequant_before
from .numerics import half_from_real_array, half_to_real_array
from .pe import PEKind
from .quant import Granularity, GroupSizeError, Signedness, dequantize, quantize, quantize_activations
from .workloads import expand_workload, load_activation_samples, load_model_config, synth_weights

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SIMULATE_COLUMNS = [
    "model", "batch", "layer", "role", "m", "n", "k", "g", "pe_kind", "pipeline",
    "cycles", "overhead_cycles", "latency_seconds", "dequant_overhead_fraction",
    "energy_total", "energy_dram", "energy_buffer", "energy_core", "energy_static",
    "bytes_weights", "bytes_activations", "bytes_outputs", "bytes_group_params",
    "speedup", "energy_reduction", "calibrated",
]
DSE_COLUMNS = ["snr_db", "hw_cost", "design", "scheme", "pe_kind", "rows", "cols", "dominated", "error"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "json"
    seed: int = 0
    strict: bool = False


def threads() -> int:
    try:
        return max(1, int(os.environ.get("MPX_THREADS", "1")))
    except ValueError:
        return 1


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _load_table(path: str | None) -> CostTable:
    if not path:
        return default_cost_table()
    try:
        return CostTable.load(path)
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise UsageError(f"cannot load cost table {path}: {e}") from None


# ---------------------------------------------------------------------------
# verify-pe

def cmd_verify_pe(run: RunConfig, a8_fn=None, scale_fn=None) -> tuple[int, dict]:
    a8 = verify.check_a8(a8_fn)
    a16 = verify.check_a16_scale(scale_fn)
    ok = a8.ok and a16.ok
    report = {
        "command": "verify-pe",
        "ok": ok,
        "checks": [a8.to_dict(), a16.to_dict()],
        "summary": f"{a8.summary()}; {a16.summary()}",
    }
    return (EXIT_OK if ok else EXIT_FAIL), report


# ---------------------------------------------------------------------------
# gemm-check

def _pad_k(a: np.ndarray, k: int) -> np.ndarray:
    return np.pad(a, ((0, 0), (0, k - a.shape[1])))


def cmd_gemm_check(run: RunConfig) -> tuple[int, dict]:
    cfg = run.inputs
    m, n, k, g = cfg["m"], cfg["n"], cfg["k"], cfg["group_size"]
    kinds = [PEKind.parse(p) for p in cfg["pe"]]
    for kind in kinds:
        if not kind.is_mixpe:
            raise UsageError(f"{kind.value} has no dequantize-after-GEMM model")
    if k % g:
        if run.strict:
            raise UsageError(f"group size {g} does not divide k={k}")
        k = -(-k // g) * g  # zero-pad the reduction dim
    rng = np.random.default_rng(run.seed)
    tol = cfg["tolerance"]
    results = []
    worst = 0.0
    for inst in range(cfg["instances"]):
        problem = GemmProblem(m, n, k, g)
        w = quantize(
            _pad_k(rng.standard_normal((n, cfg["k"])), k), 4, Signedness.UNSIGNED, Granularity.per_group(g)
        )
        x = _pad_k(rng.standard_normal((m, cfg["k"])), k)
        for kind in kinds:
            if kind is PEKind.MIXPE_A8:
                xin = quantize_activations(x)
                ref_x = dequantize(xin)
            else:
                xin = x
                ref_x = half_to_real_array(half_from_real_array(x))
            after, _ = gemm_dequant_after(xin, w, problem, kind)
            before, _ = gemm_dequant_before(ref_x, w, problem)
            dense = ref_x @ dequantize(w).T
            scale = max(float(np.abs(dense).max()), np.finfo(float).tiny)
            err = max(float(np.abs(after - dense).max()), float(np.abs(before - dense).max())) / scale
            worst = max(worst, err)
            results.append({"instance": inst, "pe_kind": kind.value, "max_rel_err": err})
    ok = worst <= tol
    report = {
        "command": "gemm-check",
        "ok": ok,
        "config": {"m": m, "n": n, "k": k, "group_size": g, "instances": cfg["instances"],
                   "seed": run.seed, "tolerance": tol, "pe": [kd.value for kd in kinds]},
        "max_rel_err": worst,
        "exact": worst == 0.0,
        "results": results,
    }
    return (EXIT_OK if ok else EXIT_FAIL), report


# ---------------------------------------------------------------------------
# simulate

def _sim_rows(model, batch, cfg, pipeline, table) -> list[dict]:
    workload = expand_workload(model, batch, cfg.group_size)
    rows = []
    for t in workload.gemms:
        r = simulate(t.problem, cfg, pipeline, table)
        rows.append({
            "model": model.name, "batch": batch, "layer": t.layer, "role": t.role.value,
            "m": t.problem.m, "n": t.problem.n, "k": t.problem.k, "g": t.problem.g,
            "pe_kind": cfg.pe_kind.value, "pipeline": pipeline.value,
            "cycles": r.cycles, "overhead_cycles": r.overhead_cycles,
            "latency_seconds": r.latency_seconds,
            "dequant_overhead_fraction": r.dequant_overhead_fraction,
            "energy_total": r.energy_total,
            **{f"energy_{k}": v for k, v in r.energy_breakdown.items()},
            **{f"bytes_{k}": v for k, v in r.bytes_moved.items()},
            "calibrated": r.calibrated,
        })
    return rows


def _aggregate(rows: list[dict], model: str, batch: int, pe_kind: str, pipeline: str) -> dict:
    agg = {"model": model, "batch": batch, "layer": "all", "role": "aggregate",
           "m": batch, "n": "", "k": "", "g": rows[0]["g"], "pe_kind": pe_kind, "pipeline": pipeline,
           "calibrated": rows[0]["calibrated"]}
    for key in SIMULATE_COLUMNS:
        if (key.startswith(("energy_", "bytes_")) and key != "energy_reduction") or key in ("cycles", "overhead_cycles", "latency_seconds"):
            agg[key] = sum(r[key] for r in rows)
    agg["dequant_overhead_fraction"] = agg["overhead_cycles"] / agg["cycles"]
    return agg


def cmd_simulate(run: RunConfig) -> tuple[int, dict]:
    cfg_in = run.inputs
    table = _load_table(cfg_in.get("cost_table"))
    try:
        model = load_model_config(cfg_in["model"])
    except (OSError, ValueError) as e:
        raise UsageError(str(e)) from None
    kind = PEKind.parse(cfg_in["pe"])
    baseline_kind = PEKind.parse(cfg_in["baseline"])
    pipeline = Pipeline.parse(cfg_in["pipeline"]) if cfg_in.get("pipeline") else default_pipeline(kind)
    if pipeline is Pipeline.DEQUANT_AFTER and not kind.is_mixpe:
        raise UsageError(f"{kind.value} cannot run the dequantize-after-GEMM pipeline")
    for k in (kind, baseline_kind):
        if k not in table.pe:
            raise UsageError(f"cost table has no entry for {k.value}")
    geometry = dict(rows=cfg_in["rows"], cols=cfg_in["cols"], group_size=cfg_in["group_size"],
                    buffer_bytes=cfg_in["buffer_bytes"])
    cfg = SystolicConfig(pe_kind=kind, **geometry)
    base_cfg = SystolicConfig(pe_kind=baseline_kind, **geometry)
    base_pipeline = default_pipeline(baseline_kind)

    def one_batch(batch: int):
        rows = _sim_rows(model, batch, cfg, pipeline, table)
        base = _sim_rows(model, batch, base_cfg, base_pipeline, table)
        for r, b in zip(rows, base):
            r["speedup"] = b["cycles"] / r["cycles"]
            r["energy_reduction"] = b["energy_total"] / r["energy_total"]
        agg = _aggregate(rows, model.name, batch, kind.value, pipeline.value)
        base_agg = _aggregate(base, model.name, batch, baseline_kind.value, base_pipeline.value)
        agg["speedup"] = base_agg["cycles"] / agg["cycles"]
        agg["energy_reduction"] = base_agg["energy_total"] / agg["energy_total"]
        return rows, agg

    try:
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            results = list(pool.map(one_batch, cfg_in["batch"]))
    except GroupSizeError as e:
        raise UsageError(str(e)) from None
    report = {
        "command": "simulate",
        "config": {
            "model": {"name": model.name, "hidden_size": model.hidden_size, "num_layers": model.num_layers,
                      "ffn_mult": model.ffn_mult, "num_heads": model.num_heads},
            "batches": list(cfg_in["batch"]),
            "systolic": cfg.to_dict(),
            "pipeline": pipeline.value,
            "baseline": {"pe_kind": baseline_kind.value, "pipeline": base_pipeline.value},
            "cost_table": table.to_dict(),
            "shape_regime": "dense batch-m GEMMs (prefill-like)",
        },
        "rows": [r for rows, _ in results for r in rows],
        "aggregate": [agg for _, agg in results],
    }
    return EXIT_OK, report


# ---------------------------------------------------------------------------
# dse

SWEEP_KEYS = {"weights", "activations", "points", "weight_rows", "k", "activation_rows"}


def _parse_points(entries: list[dict]) -> list[DesignPoint]:
    points = []
    for e in entries:
        unknown = set(e) - {"weight_bits", "activation_bits", "signedness", "granularity", "pe", "rows", "cols"}
        if unknown:
            raise UsageError(f"unknown design point keys: {sorted(unknown)}")
        scheme = QuantScheme(
            weight_bits=e.get("weight_bits", 4),
            activation_bits=e.get("activation_bits", 8),
            weight_signedness=Signedness(e.get("signedness", "unsigned")),
            granularity=Granularity.parse(e.get("granularity", "g128")),
        )
        points.append(DesignPoint(scheme, PEKind.parse(e["pe"]), e.get("rows", 4), e.get("cols", 4)))
    return points


def cmd_dse(run: RunConfig) -> tuple[int, dict]:
    cfg = dict(run.inputs.get("sweep") or {})
    unknown = set(cfg) - SWEEP_KEYS
    if unknown:
        raise UsageError(f"unknown sweep config keys: {sorted(unknown)}")
    table = _load_table(run.inputs.get("cost_table"))
    try:
        points = _parse_points(cfg["points"]) if "points" in cfg else default_design_points()
        k = cfg.get("k", 1024)
        if cfg.get("weights"):
            weights = load_activation_samples(cfg["weights"])
        else:
            weights = synth_weights(cfg.get("weight_rows", 256), k, run.seed)
        act_path = cfg.get("activations") or run.inputs.get("activations")
        if act_path:
            acts = load_activation_samples(act_path)
        else:
            acts = np.random.default_rng(run.seed + 1).standard_normal((cfg.get("activation_rows", 128), weights.shape[1]))
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(str(e)) from None
    if acts.shape[1] != weights.shape[1]:
        raise UsageError(f"activations have {acts.shape[1]} columns, weights {weights.shape[1]}")
    if not points:
        raise UsageError("sweep has no design points")

    results = sweep(points, weights, table, activations=acts)
    valid = [p for p in results if p.error is None]
    # cross-check the scan against brute force before writing anything
    for p in valid:
        brute = any(dominates(q, p) for q in valid if q is not p)
        if brute != p.dominated:
            raise AssertionError(f"frontier scan disagrees with brute force at {p.design.label}")
    report = {
        "command": "dse",
        "ok": bool(valid),
        "config": {
            "seed": run.seed,
            "weights_shape": list(weights.shape),
            "activations_shape": list(acts.shape),
            "cost_axis": "whole-array normalized area x power (4x4 INT8 array = 1)",
            "snr_axis": "GEMM output SNR in dB, 10*log10",
            "cost_table": table.to_dict(),
        },
        "points": [p.to_dict() for p in results],
        "frontier": [p.to_dict() for p in frontier(results)],
    }
    return (EXIT_OK if valid else EXIT_FAIL), report


# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--strict", action="store_true", help="reject group sizes that do not divide k")
    common.add_argument("--cost-table", help="JSON cost table (default: built-in)")

    parser = argparse.ArgumentParser(prog="mixpe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("verify-pe", parents=[common], help="exhaustive MixPE equivalence checks")

    p = sub.add_parser("gemm-check", parents=[common], help="dequant-after vs dequant-before on random GEMMs")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--k", type=int, default=1024)
    p.add_argument("--group-size", type=int, default=128)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--pe", nargs="+", default=["mixpe-a8", "mixpe-a16"])
    p.add_argument("--tolerance", type=float, default=1e-10)

    p = sub.add_parser("simulate", parents=[common], help="cycle/energy model over a model's GEMMs")
    p.add_argument("--model", default="opt-6.7b", help="model config path or bundled name")
    p.add_argument("--batch", type=_int_list, default=[8], help="batch size(s), e.g. 8 or 2,4,8")
    p.add_argument("--pe", default="mixpe-a8")
    p.add_argument("--pipeline", choices=["before", "after"])
    p.add_argument("--baseline", default="int8")
    p.add_argument("--group-size", type=int, default=128)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--buffer-bytes", type=int, default=256 * 1024)

    p = sub.add_parser("dse", parents=[common], help="SNR vs area-power sweep and Pareto frontier")
    p.add_argument("--config", help="JSON sweep config")
    p.add_argument("--activations", help="activation sample file (text or MPXT binary)")
    p.add_argument("--out-dir", help="write frontier.{json,csv} and points.{json,csv} here")
    return parser


def _run_config(args) -> RunConfig:
    inputs = {k: v for k, v in vars(args).items()
              if k not in ("command", "out", "format", "seed", "strict")}
    if args.command == "dse" and args.config:
        try:
            inputs["sweep"] = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot read sweep config: {e}") from None
    return RunConfig(args.command, inputs, args.out, args.format, args.seed, args.strict)


def _render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    cmd = report["command"]
    if cmd == "simulate":
        return _csv(report["rows"] + report["aggregate"], SIMULATE_COLUMNS)
    if cmd == "dse":
        return _csv(report["points"], DSE_COLUMNS)
    if cmd == "gemm-check":
        return _csv(report["results"], ["instance", "pe_kind", "max_rel_err"])
    return _csv([{k: v for k, v in c.items() if k != "first_failure"} | {"first_failure": json.dumps(c["first_failure"])}
                 for c in report["checks"]], ["name", "checked", "passed", "ok", "first_failure"])


COMMANDS = {
    "verify-pe": cmd_verify_pe,
    "gemm-check": cmd_gemm_check,
    "simulate": cmd_simulate,
    "dse": cmd_dse,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _run_config(args)
        code, report = COMMANDS[args.command](run)
    except (UsageError, ValueError) as e:
        print(f"mixpe: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "dse" and args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "points.json").write_text(json.dumps(report["points"], indent=2) + "\n")
        (out / "frontier.json").write_text(json.dumps(report["frontier"], indent=2) + "\n")
        (out / "points.csv").write_text(_csv(report["points"], DSE_COLUMNS))
        (out / "frontier.csv").write_text(_csv(report["frontier"], DSE_COLUMNS))
    _emit(_render(report, run.format), run.out)
    if args.command == "verify-pe":
        print(report["summary"], file=sys.stderr)
        if not report["ok"]:
            for c in report["checks"]:
                if c["first_failure"]:
                    print(f"counterexample ({c['name']}): {c['first_failure']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
