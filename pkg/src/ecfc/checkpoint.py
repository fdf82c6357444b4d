"""Self-contained checkpoint files.

Layout::

    b"ECFC-CKPT" | version (1 byte) | header length (u32 LE) | header JSON
    | tensors, float64 LE, in manifest order | CRC32 (u32 LE)

The CRC covers everything between the version byte and the CRC itself.
The header holds the training config, normalizer statistics, epoch
record, Adam hyper-parameters and the tensor manifest (name, shape, byte
offset into the tensor block).
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from .features import Normalizer
from .model import LayerWeights, LstmModel, LstmState
from .optim import AdamState

MAGIC = b"ECFC-CKPT"
FORMAT_VERSION = 1
_PREFIX = len(MAGIC) + 1 + 4


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mae: float
    val_mae: float
    val_mape: float

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_mae": self.train_mae,
                "val_mae": self.val_mae, "val_mape": self.val_mape}


@dataclass
class Checkpoint:
    config: TrainConfig
    normalizer: Normalizer
    model: LstmModel
    state: LstmState
    epoch: int
    record: EpochRecord | None = None
    adam: AdamState | None = None
    version: int = FORMAT_VERSION


def _tensors(ckpt: Checkpoint) -> list:
    out = list(ckpt.model.params().items())
    for k, (h, c) in enumerate(zip(ckpt.state.h, ckpt.state.c)):
        out.append((f"state.h.{k}", h))
        out.append((f"state.c.{k}", c))
    if ckpt.adam is not None and ckpt.adam.m:
        for name in ckpt.model.params():
            out.append((f"adam.m.{name}", ckpt.adam.m[name]))
            out.append((f"adam.v.{name}", ckpt.adam.v[name]))
    return out


def to_bytes(ckpt: Checkpoint) -> bytes:
    manifest = []
    blobs = []
    offset = 0
    for name, arr in _tensors(ckpt):
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = {
        "config": ckpt.config.to_dict(),
        "normalizer": ckpt.normalizer.to_dict(),
        "model": {
            "layer_count": len(ckpt.model.layers),
            "dropout_keep": ckpt.model.dropout_keep,
            "input_mode": ckpt.model.input_mode,
        },
        "epoch": ckpt.epoch,
        "record": None if ckpt.record is None else ckpt.record.to_dict(),
        "adam": None if ckpt.adam is None else ckpt.adam.hyper(),
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = struct.pack("<I", len(header_bytes)) + header_bytes + b"".join(blobs)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return MAGIC + bytes([FORMAT_VERSION]) + payload + struct.pack("<I", crc)


def from_bytes(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) and MAGIC.startswith(data):
        raise CheckpointTruncatedError("file ends inside the magic bytes")
    if not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < _PREFIX:
        raise CheckpointTruncatedError("checkpoint ends inside its prefix")
    version = data[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    (hlen,) = struct.unpack_from("<I", data, len(MAGIC) + 1)
    if len(data) < _PREFIX + hlen + 4:
        raise CheckpointTruncatedError("checkpoint ends inside its header")

    def crc_ok():
        (stored,) = struct.unpack_from("<I", data, len(data) - 4)
        return zlib.crc32(data[len(MAGIC) + 1 : -4]) & 0xFFFFFFFF == stored

    try:
        header = json.loads(data[_PREFIX : _PREFIX + hlen].decode("utf-8"))
        manifest = header["tensors"]
        total = sum(8 * int(np.prod(t["shape"], dtype=np.int64)) for t in manifest)
    except (ValueError, KeyError, TypeError):
        if not crc_ok():
            raise CheckpointChecksumError("checkpoint checksum mismatch") from None
        raise CheckpointError("checkpoint header is unreadable") from None
    if len(data) != _PREFIX + hlen + total + 4:
        if len(data) < _PREFIX + hlen + total + 4:
            raise CheckpointTruncatedError(
                f"checkpoint payload has {len(data) - _PREFIX - hlen - 4} tensor bytes, "
                f"manifest needs {total}"
            )
        raise CheckpointError("checkpoint has trailing bytes")
    if not crc_ok():
        raise CheckpointChecksumError("checkpoint checksum mismatch")

    base = _PREFIX + hlen
    tensors = {}
    for t in manifest:
        shape = tuple(t["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=base + t["offset"])
        tensors[t["name"]] = arr.astype(np.float64).reshape(shape)

    meta = header["model"]
    layers = [
        LayerWeights(tensors[f"layers.{k}.W"], tensors[f"layers.{k}.U"], tensors[f"layers.{k}.b"])
        for k in range(meta["layer_count"])
    ]
    model = LstmModel(layers, tensors["head.w"], tensors["head.b"],
                      meta["dropout_keep"], meta["input_mode"])
    state = LstmState(
        [tensors[f"state.h.{k}"] for k in range(len(layers))],
        [tensors[f"state.c.{k}"] for k in range(len(layers))],
    )
    adam = None
    if header["adam"] is not None:
        hyper = header["adam"]
        adam = AdamState(hyper["lr"], hyper["beta1"], hyper["beta2"], hyper["eps"], hyper["t"])
        names = list(model.params())
        if all(f"adam.m.{n}" in tensors for n in names):
            adam.m = {n: tensors[f"adam.m.{n}"] for n in names}
            adam.v = {n: tensors[f"adam.v.{n}"] for n in names}
    record = header["record"]
    return Checkpoint(
        TrainConfig.from_dict(header["config"]),
        Normalizer.from_dict(header["normalizer"]),
        model,
        state,
        header["epoch"],
        None if record is None else EpochRecord(**record),
        adam,
        version,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
