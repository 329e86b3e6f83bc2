"""Transformer GEMM workloads and activation/weight data sources."""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .mpgemm import GemmProblem

BINARY_MAGIC = b"MPXT"


class GemmRole(enum.Enum):
    QKV = "qkv"
    OUT_PROJ = "out_proj"
    FFN_UP = "ffn_up"
    FFN_DOWN = "ffn_down"


@dataclass(frozen=True)
class ModelSpec:
    name: str
    hidden_size: int
    num_layers: int
    ffn_mult: float
    num_heads: int

    def __post_init__(self):
        if self.hidden_size <= 0 or self.num_layers <= 0 or self.num_heads <= 0:
            raise ValueError(f"{self.name}: dimensions must be positive")
        if self.ffn_mult < 1:
            raise ValueError(f"{self.name}: ffn_mult must be at least 1")
        if abs(self.ffn_dim - self.ffn_mult * self.hidden_size) > 1e-6:
            raise ValueError(f"{self.name}: ffn_mult * hidden_size is not an integer")

    @property
    def ffn_dim(self) -> int:
        return round(self.ffn_mult * self.hidden_size)


@dataclass(frozen=True)
class TaggedGemm:
    layer: int
    role: GemmRole
    problem: GemmProblem


@dataclass
class WorkloadSpec:
    model: ModelSpec
    batch: int
    gemms: list[TaggedGemm] = field(default_factory=list)

    @property
    def total_macs(self) -> int:
        return sum(t.problem.macs for t in self.gemms)


_MODEL_KEYS = {"name": str, "hidden_size": int, "num_layers": int, "ffn_mult": float, "num_heads": int}


def parse_model_config(text: str, origin: str = "<string>") -> ModelSpec:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _MODEL_KEYS:
            raise ValueError(f"{origin}:{lineno}: expected one of {sorted(_MODEL_KEYS)} = value")
        values[key] = _MODEL_KEYS[key](value.strip())
    missing = set(_MODEL_KEYS) - set(values)
    if missing:
        raise ValueError(f"{origin}: missing keys {sorted(missing)}")
    return ModelSpec(**values)


def load_model_config(path) -> ModelSpec:
    """Read a model config from ``path`` or a bundled name such as ``opt-6.7b``."""
    p = Path(path)
    if p.exists():
        return parse_model_config(p.read_text(), str(p))
    bundled = resources.files("mixpe") / "data" / "models" / f"{path}.cfg"
    if bundled.is_file():
        return parse_model_config(bundled.read_text(), str(path))
    raise FileNotFoundError(f"no model config at {path!r} and no bundled model of that name")


def bundled_models() -> list[str]:
    root = resources.files("mixpe") / "data" / "models"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def expand_workload(model: ModelSpec, batch: int, group_size: int = 128) -> WorkloadSpec:
    """Weight-bearing GEMMs of every layer; attention score GEMMs are excluded."""
    if batch <= 0:
        raise ValueError("batch must be positive")
    h, f, m = model.hidden_size, model.ffn_dim, batch
    shapes = [
        (GemmRole.QKV, 3 * h, h),
        (GemmRole.OUT_PROJ, h, h),
        (GemmRole.FFN_UP, f, h),
        (GemmRole.FFN_DOWN, h, f),
    ]
    gemms = [
        TaggedGemm(layer, role, GemmProblem(m, n, k, group_size))
        for layer in range(model.num_layers)
        for role, n, k in shapes
    ]
    return WorkloadSpec(model, batch, gemms)


def synth_weights(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Standard-normal weights from a seeded generator."""
    if n <= 0 or k <= 0:
        raise ValueError("dimensions must be positive")
    return np.random.default_rng(seed).standard_normal((n, k))


def save_activation_samples(path, x: np.ndarray, binary: bool = False) -> None:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("activation samples must be 2-D")
    if binary:
        with open(path, "wb") as f:
            f.write(BINARY_MAGIC + struct.pack("<QQ", *x.shape))
            f.write(x.astype("<f8").tobytes())
        return
    with open(path, "w") as f:
        f.write(f"{x.shape[0]} {x.shape[1]}\n")
        for row in x:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def _validate(x: np.ndarray, origin) -> np.ndarray:
    bad = ~np.isfinite(x)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"{origin}: non-finite value {x[r, c]!r} at row {r}, column {c}")
    return x


def load_activation_samples(path) -> np.ndarray:
    """Load an (m, k) activation sample file, text or binary."""
    raw = Path(path).read_bytes()
    if raw.startswith(BINARY_MAGIC):
        header = len(BINARY_MAGIC) + 16
        if len(raw) < header:
            raise ValueError(f"{path}: truncated header")
        rows, cols = struct.unpack("<QQ", raw[len(BINARY_MAGIC) : header])
        body = raw[header:]
        if len(body) != rows * cols * 8:
            raise ValueError(f"{path}: header says {rows}x{cols} but payload has {len(body)} bytes")
        return _validate(np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64), path)

    lines = [ln for ln in raw.decode().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError:
        raise ValueError(f"{path}: first line must be 'rows cols'") from None
    tokens = " ".join(lines[1:]).split()
    if len(tokens) != rows * cols:
        raise ValueError(f"{path}: header says {rows}x{cols} but found {len(tokens)} values")
    try:
        x = np.array([float(t) for t in tokens]).reshape(rows, cols)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from None
    return _validate(x, path)
