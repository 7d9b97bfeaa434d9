"""Binary checkpoint container.

Layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"RESPCKPT"
    8       4     u32 format version (currently 1)
    12      4     u32 header length L
    16      L     UTF-8 JSON header, keys sorted, no whitespace
    16+L    P     payload: float64 LE arrays, C order, concatenated as
                  model arrays, then Adam first moments, then second moments,
                  each group in the declared parameter order
    16+L+P  4     u32 CRC-32 of everything before it

The header records the architecture, dims, fixed input map, array names/shapes, the payload
size P, the Adam step/hyperparameters, and training metadata (epoch counter,
seed lineage, preprocessing config). No timestamps are stored, so identical
runs produce identical bytes.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import atomic_write
from .nn.model import ModelDims, ModelParams, init_params
from .nn.optim import AdamState

MAGIC = b"RESPCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


class CheckpointError(ValueError):
    pass


class NotACheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    model: ModelParams
    optimizer: AdamState
    meta: dict = field(default_factory=dict)


def to_bytes(ckpt: Checkpoint) -> bytes:
    model, opt = ckpt.model, ckpt.optimizer
    arrays = model.named_arrays()
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for group in ([a for _, a in arrays], [opt.m[k] for k, _ in arrays], [opt.v[k] for k, _ in arrays])
        for a in group
    )
    header = {
        "arch": model.arch,
        "dims": {
            "input_dim": model.dims.input_dim,
            "hidden": model.dims.hidden,
            "attention": model.dims.attention,
            "classes": model.dims.classes,
        },
        "arrays": [[k, list(a.shape)] for k, a in arrays],
        "input_map": [model.input_shift, model.input_scale],
        "payload_bytes": len(payload),
        "optimizer": {"step": int(opt.step)},
        "meta": ckpt.meta,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = _PREFIX.pack(MAGIC, VERSION, len(hbytes)) + hbytes + payload
    return body + struct.pack("<I", zlib.crc32(body))


def from_bytes(raw: bytes) -> Checkpoint:
    if len(raw) < _PREFIX.size or raw[:8] != MAGIC:
        raise NotACheckpointError("not a checkpoint (bad magic header)")
    _, version, hlen = _PREFIX.unpack_from(raw)
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, this build reads {VERSION}")
    if len(raw) < _PREFIX.size + hlen:
        raise CheckpointTruncatedError("checkpoint truncated inside the header")
    try:
        header = json.loads(raw[_PREFIX.size : _PREFIX.size + hlen].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointTruncatedError(f"checkpoint header unreadable: {exc}") from exc
    start = _PREFIX.size + hlen
    end = start + header["payload_bytes"]
    if len(raw) < end + 4:
        raise CheckpointTruncatedError(
            f"checkpoint truncated: {len(raw)} bytes, expected {end + 4}"
        )
    (crc,) = struct.unpack_from("<I", raw, end)
    if crc != zlib.crc32(raw[:end]):
        raise CheckpointTruncatedError("checkpoint checksum mismatch (corrupted or truncated)")

    dims = ModelDims(**header["dims"])
    shift, scale = header.get("input_map", [0.0, 1.0])
    model = init_params(
        header["arch"], dims, np.random.default_rng(0), input_shift=shift, input_scale=scale
    )
    expected = [[k, list(a.shape)] for k, a in model.named_arrays()]
    if header["arrays"] != expected:
        raise CheckpointShapeError(
            f"array layout {header['arrays']} does not match {header['arch']} with dims {dims}"
        )
    n_values = sum(a.size for _, a in model.named_arrays())
    if header["payload_bytes"] != 3 * 8 * n_values:
        raise CheckpointShapeError("payload size does not match the declared arrays")
    flat = np.frombuffer(raw, dtype="<f8", count=3 * n_values, offset=start).astype(np.float64)
    pos = 0
    groups = []
    for _ in range(3):
        out = {}
        for k, a in model.named_arrays():
            out[k] = flat[pos : pos + a.size].reshape(a.shape).copy()
            pos += a.size
        groups.append(out)
    for k, a in model.named_arrays():
        a[...] = groups[0][k]
    opt = AdamState(m=groups[1], v=groups[2], step=int(header["optimizer"]["step"]))
    return Checkpoint(model=model, optimizer=opt, meta=header.get("meta", {}))


def save_checkpoint(model: ModelParams, optimizer: AdamState, path, meta: dict | None = None) -> None:
    raw = to_bytes(Checkpoint(model, optimizer, dict(meta or {})))
    with atomic_write(path, "wb") as fh:
        fh.write(raw)


def load_checkpoint(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
