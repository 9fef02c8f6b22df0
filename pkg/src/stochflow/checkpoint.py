"""Flat binary checkpoint format.

Layout: magic "STFL", little-endian u32 version, then one record per
array: u32 name length, utf-8 name bytes, u32 rank, u32 dims, raw
little-endian float64 payload. Records run to end of file. Round trips
are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .net import PARAM_KEYS, VelocityScoreModel

MAGIC = b"STFL"
VERSION = 1

EMA_PREFIX = "ema_"


class CheckpointError(RuntimeError):
    pass


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    arrays: dict[str, np.ndarray] = {}
    off = 8
    while off < len(data):
        try:
            (name_len,) = struct.unpack_from("<I", data, off)
            off += 4
            name = data[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", data, off)
            off += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(dims)
            off += 8 * count
        except (struct.error, ValueError) as exc:
            raise CheckpointError(f"{path}: truncated or corrupt record") from exc
        arrays[name] = arr.copy()
    return arrays


def save_model(path: str | Path, model: VelocityScoreModel,
               ema_params: dict[str, np.ndarray] | None = None) -> None:
    """Write model parameters, optionally followed by EMA shadow arrays."""
    arrays = dict(model.params)
    if ema_params is not None:
        for k, a in ema_params.items():
            arrays[EMA_PREFIX + k] = a
    save_arrays(path, arrays)


def _model_from(params: dict[str, np.ndarray]) -> VelocityScoreModel:
    missing = [k for k in PARAM_KEYS if k not in params]
    if missing:
        raise CheckpointError(f"checkpoint missing parameters: {missing}")
    hidden, dim = params["w_v"].shape
    return VelocityScoreModel(dim=int(dim), hidden=int(hidden), params=params)


def load_model(path: str | Path, ema: bool = False) -> VelocityScoreModel:
    """Rebuild a model from a checkpoint; ema=True selects the shadow weights."""
    arrays = load_arrays(path)
    if ema:
        params = {k[len(EMA_PREFIX):]: a for k, a in arrays.items() if k.startswith(EMA_PREFIX)}
        if not params:
            raise CheckpointError(f"{path}: no EMA weights stored")
    else:
        params = {k: a for k, a in arrays.items() if not k.startswith(EMA_PREFIX)}
    return _model_from(params)


def has_ema(path: str | Path) -> bool:
    return any(k.startswith(EMA_PREFIX) for k in load_arrays(path))
