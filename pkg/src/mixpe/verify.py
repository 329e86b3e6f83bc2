"""Exhaustive equivalence checks of the MixPE kernels against plain multiplies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pe
from .numerics import is_nan_bits


@dataclass
class CheckResult:
    name: str
    checked: int
    passed: int
    first_failure: dict | None = None

    @property
    def ok(self) -> bool:
        return self.passed == self.checked

    def summary(self) -> str:
        return f"{self.passed}/{self.checked} ok" if self.ok else f"{self.passed}/{self.checked} FAILED"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "checked": self.checked,
            "passed": self.passed,
            "ok": self.ok,
            "first_failure": self.first_failure,
        }


def check_a8(fn=None) -> CheckResult:
    """All 16 x 256 (UINT4, INT8) pairs against an integer multiply."""
    fn = fn or pe.mixpe_a8
    checked = passed = 0
    first = None
    for w in range(16):
        for x in range(-128, 128):
            checked += 1
            got, want = fn(w, x), w * x
            if got == want:
                passed += 1
            elif first is None:
                first = {"w": w, "x": x, "got": int(got), "expected": want}
    return CheckResult("w4a8", checked, passed, first)


def ieee_pow2_oracle(i: int) -> np.ndarray:
    """Every binary16 pattern times 2**i, rounded by numpy's float16 multiply."""
    x = np.arange(1 << 16, dtype=np.uint16).view(np.float16)
    with np.errstate(over="ignore", invalid="ignore"):
        return (x * np.float16(2**i)).view(np.uint16)


def check_a16_scale(fn=None) -> CheckResult:
    """All 65536 binary16 patterns x shifts 0..3, bit-exact (NaNs by class)."""
    fn = fn or pe.mixpe_a16_scale
    checked = passed = 0
    first = None
    for i in range(4):
        want = ieee_pow2_oracle(i).tolist()
        want_nan = is_nan_bits(np.asarray(want)).tolist()
        for bits in range(1 << 16):
            checked += 1
            got = fn(bits, i)
            if got == want[bits] or (want_nan[bits] and bool(is_nan_bits(got))):
                passed += 1
            elif first is None:
                first = {"x": f"{bits:#06x}", "i": i, "got": f"{got:#06x}", "expected": f"{want[bits]:#06x}"}
    return CheckResult("w4a16_scale", checked, passed, first)
