import struct

import numpy as np
import pytest

from pagesum.checkpoint import load_checkpoint, save_checkpoint
from pagesum.exceptions import ConfigError, FormatError
from pagesum.model import ModelConfig, init_params
from pagesum.numerics import OptimizerState, adam_step

CFG = ModelConfig.tiny()


def test_round_trip_is_bit_identical(tmp_path):
    params = init_params(CFG, seed=1)
    path = tmp_path / "m.pgsm"
    save_checkpoint(path, CFG, params)
    cfg, loaded, opt = load_checkpoint(path, expected_cfg=CFG)
    assert cfg == CFG and opt is None
    for name, p in params.items():
        assert loaded[name].data.tobytes() == p.data.tobytes()


def test_optimizer_state_round_trip(tmp_path):
    params = init_params(CFG, seed=1)
    state = OptimizerState(warmup=50, base_lr=0.01)
    grads = {k: np.full(p.shape, 0.5, dtype=np.float32) for k, p in params.items()}
    adam_step(params, grads, state)
    save_checkpoint(tmp_path / "m.pgsm", CFG, params, state)
    _, _, loaded = load_checkpoint(tmp_path / "m.pgsm")
    assert (loaded.step, loaded.warmup, loaded.base_lr) == (1, 50, 0.01)
    for k in params:
        assert np.array_equal(loaded.m[k], state.m[k]) and np.array_equal(loaded.v[k], state.v[k])


def test_truncated_file_is_rejected(tmp_path):
    path = tmp_path / "m.pgsm"
    save_checkpoint(path, CFG, init_params(CFG))
    blob = path.read_bytes()
    for cut in (3, 10, len(blob) // 2, len(blob) - 1):
        (tmp_path / "cut.pgsm").write_bytes(blob[:cut])
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "cut.pgsm")


def test_truncation_at_a_record_boundary_is_rejected(tmp_path):
    path = tmp_path / "m.pgsm"
    save_checkpoint(path, CFG, init_params(CFG))
    blob = path.read_bytes()
    (header_len,) = struct.unpack("<I", blob[8:12])
    (tmp_path / "cut.pgsm").write_bytes(blob[: 12 + header_len])
    with pytest.raises(FormatError, match="missing"):
        load_checkpoint(tmp_path / "cut.pgsm")


def test_bad_magic_and_missing_file(tmp_path):
    (tmp_path / "x.pgsm").write_bytes(b"NOPE" + b"\0" * 20)
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "x.pgsm")
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "absent.pgsm")


def test_config_mismatch(tmp_path):
    path = tmp_path / "m.pgsm"
    save_checkpoint(path, CFG, init_params(CFG))
    with pytest.raises(ConfigError):
        load_checkpoint(path, expected_cfg=ModelConfig.tiny(d_model=32))
    load_checkpoint(path, expected_cfg=ModelConfig.tiny(dropout=0.1))


def test_save_is_atomic_on_failure(tmp_path):
    path = tmp_path / "m.pgsm"
    save_checkpoint(path, CFG, init_params(CFG, seed=1))
    before = path.read_bytes()
    broken = init_params(CFG)
    del broken["tok_emb"]
    with pytest.raises(Exception):
        save_checkpoint(path, CFG, broken)
    assert path.read_bytes() == before
    assert sorted(p.name for p in tmp_path.iterdir()) == ["m.pgsm"]
