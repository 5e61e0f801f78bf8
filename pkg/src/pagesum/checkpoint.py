"""Binary checkpoint format.

Layout (little-endian)::

    b"PGSM"  u32 version  u32 n  <n bytes UTF-8 JSON header>
    repeated:  u32 n  <n bytes name>  u32 rank  rank * u64 dims  float32 data

The JSON header is the model config; when optimizer state is stored it
carries an extra ``"optimizer"`` object and the moment tensors follow the
weights as ``optim.m/<name>`` and ``optim.v/<name>``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, FormatError
from .model import ModelConfig, check_params, param_shapes
from .numerics.optim import OptimizerState
from .numerics.tensor import Tensor

MAGIC = b"PGSM"
VERSION = 1
_OPT_KEYS = ("warmup", "base_lr", "beta1", "beta2", "eps", "step")
_ARCH_KEYS = (
    "vocab_size",
    "d_model",
    "n_heads",
    "n_encoder_layers",
    "n_decoder_layers",
    "d_ff",
    "max_positions",
)


def _tensor_record(name: str, arr: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<I", len(encoded)) + encoded + struct.pack("<I", arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes()


def save_checkpoint(path, cfg: ModelConfig, params: dict, opt_state: OptimizerState = None) -> None:
    check_params(params, cfg)
    header = cfg.to_dict()
    tensors = [(name, params[name].data) for name in param_shapes(cfg)]
    if opt_state is not None:
        header["optimizer"] = {k: getattr(opt_state, k) for k in _OPT_KEYS}
        for name in param_shapes(cfg):
            if name in opt_state.m:
                tensors.append((f"optim.m/{name}", opt_state.m[name]))
                tensors.append((f"optim.v/{name}", opt_state.v[name]))
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    chunks.extend(_tensor_record(name, arr) for name, arr in tensors)

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.path}: truncated checkpoint")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def done(self) -> bool:
        return self.pos == len(self.buf)


def load_checkpoint(path, expected_cfg: ModelConfig = None):
    """Read a checkpoint; returns ``(cfg, params, opt_state_or_None)``.

    The whole file is parsed before anything is returned, so a corrupt or
    truncated file never yields a partial model.
    """
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc.strerror}") from exc
    r = _Reader(buf, path)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: not a pagesum checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    (n,) = r.unpack("<I")
    try:
        header = json.loads(r.take(n).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint header") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: checkpoint header is not an object")
    opt_header = header.pop("optimizer", None)
    cfg = ModelConfig.from_dict(header)

    tensors = {}
    while not r.done:
        (name_len,) = r.unpack("<I")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: corrupt tensor name") from exc
        (rank,) = r.unpack("<I")
        dims = r.unpack(f"<{rank}Q") if rank else ()
        count = int(np.prod(dims, dtype=np.int64))
        data = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(dims)
        if name in tensors:
            raise FormatError(f"{path}: duplicate tensor {name!r}")
        tensors[name] = data.astype(np.float32)

    shapes = param_shapes(cfg)
    missing = [k for k in shapes if k not in tensors]
    if missing:
        raise FormatError(f"{path}: missing tensors {missing[:3]} (truncated?)")
    params = {k: Tensor(tensors[k], requires_grad=True) for k in shapes}
    check_params(params, cfg)

    opt_state = None
    if opt_header is not None:
        opt_state = OptimizerState(**{k: opt_header[k] for k in _OPT_KEYS})
        for k in shapes:
            m, v = tensors.get(f"optim.m/{k}"), tensors.get(f"optim.v/{k}")
            if (m is None) != (v is None):
                raise FormatError(f"{path}: incomplete optimizer moments for {k!r}")
            if m is not None:
                opt_state.m[k], opt_state.v[k] = m, v
        if opt_state.step > 0 and len(opt_state.m) != len(shapes):
            raise FormatError(f"{path}: optimizer moments missing (truncated?)")

    if expected_cfg is not None:
        diffs = {
            k: (getattr(cfg, k), getattr(expected_cfg, k))
            for k in _ARCH_KEYS
            if getattr(expected_cfg, k) != getattr(cfg, k)
        }
        if diffs:
            raise ConfigError(f"checkpoint does not fit the requested model (saved, requested): {diffs}")
    return cfg, params, opt_state
