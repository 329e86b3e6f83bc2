import math

import numpy as np
import pytest

from mixpe.workloads import (
    GemmRole,
    ModelSpec,
    bundled_models,
    expand_workload,
    load_activation_samples,
    load_model_config,
    parse_model_config,
    save_activation_samples,
    synth_weights,
)


def test_bundled_models():
    assert {"opt-6.7b", "llama-2-13b", "vit-base", "vit-huge"} <= set(bundled_models())
    opt = load_model_config("opt-6.7b")
    assert (opt.hidden_size, opt.num_layers, opt.ffn_mult) == (4096, 32, 4.0)


def test_opt_expansion():
    w = expand_workload(load_model_config("opt-6.7b"), 8)
    assert len(w.gemms) == 32 * 4
    qkv = w.gemms[0]
    assert qkv.role is GemmRole.QKV
    assert (qkv.problem.m, qkv.problem.n, qkv.problem.k) == (8, 12288, 4096)


@pytest.mark.parametrize("name", ["opt-6.7b", "llama-2-13b", "vit-base", "vit-huge"])
@pytest.mark.parametrize("m", [1, 8])
def test_shape_invariants_and_macs(name, m):
    model = load_model_config(name)
    w = expand_workload(model, m)
    h, f = model.hidden_size, model.ffn_dim
    want = {GemmRole.QKV: (3 * h, h), GemmRole.OUT_PROJ: (h, h), GemmRole.FFN_UP: (f, h), GemmRole.FFN_DOWN: (h, f)}
    for t in w.gemms:
        assert (t.problem.m, t.problem.n, t.problem.k) == (m, *want[t.role])
    closed = model.num_layers * (3 * h * h + h * h + 2 * model.ffn_mult * h * h) * m
    assert w.total_macs == pytest.approx(closed, rel=1e-12)


def test_config_parsing_errors(tmp_path):
    with pytest.raises(ValueError, match="missing"):
        parse_model_config("name = x\nhidden_size = 4")
    with pytest.raises(ValueError):
        parse_model_config("colour = blue")
    with pytest.raises(ValueError):
        ModelSpec("x", 8, 1, 0.5, 1)
    with pytest.raises(FileNotFoundError):
        load_model_config("no-such-model")
    p = tmp_path / "m.cfg"
    p.write_text("# tiny\nname = t\nhidden_size = 8\nnum_layers = 2\nffn_mult = 2\nnum_heads = 1\n")
    assert load_model_config(p).ffn_dim == 16


@pytest.mark.parametrize("binary", [False, True])
def test_activation_round_trip(tmp_path, binary):
    x = np.random.default_rng(0).standard_normal((2, 4))
    path = tmp_path / "acts"
    save_activation_samples(path, x, binary=binary)
    assert np.array_equal(load_activation_samples(path), x)


def test_nan_rejected_with_position(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 3\n1 2 3\n4 nan 6\n")
    with pytest.raises(ValueError, match="row 1, column 1"):
        load_activation_samples(p)


def test_header_mismatch(tmp_path):
    p = tmp_path / "short.txt"
    p.write_text("2 3\n1 2 3\n")
    with pytest.raises(ValueError, match="2x3"):
        load_activation_samples(p)
    b = tmp_path / "short.bin"
    save_activation_samples(b, np.ones((2, 2)), binary=True)
    b.write_bytes(b.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_activation_samples(b)


def test_synth_weights_determinism_and_mean():
    a, b = synth_weights(1000, 1000, seed=5), synth_weights(1000, 1000, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, synth_weights(1000, 1000, seed=6))
    assert abs(a.mean()) < 5 / math.sqrt(a.size)
    assert a[0, 0] == np.random.default_rng(5).standard_normal()
