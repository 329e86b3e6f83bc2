import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def rel_err(a, ref) -> float:
    """Normwise relative error max|a - ref| / max|ref|."""
    a, ref = np.asarray(a, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    scale = np.max(np.abs(ref))
    diff = np.max(np.abs(a - ref)) if a.size else 0.0
    return float(diff / scale) if scale else float(diff)


def naive_gemm(x, w):
    """Triple-loop (m, k) x (n, k)^T in Python floats."""
    m, k = len(x), len(x[0])
    n = len(w)
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(x[i][t]) * float(w[j][t])
            out[i, j] = acc
    return out


def load_schema(name):
    text = (resources.files("mixpe") / "schemas" / f"{name}.schema.json").read_text()
    return json.loads(text)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
