"""Binary checkpoint format.

Layout::

    b"IMCL" | uint32 version | uint32 header length | JSON header | tensors

All integers and tensor payloads are little-endian; tensors are float32 in
the order of the header's manifest. The header is written with sorted keys
and no whitespace so equal models give equal bytes.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import CheckpointError, CheckpointVersionMismatch
from .model import GinModel

MAGIC = b"IMCL"
FORMAT_VERSION = 1


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_bytes(model: GinModel, meta: dict | None = None) -> bytes:
    header = {
        "d": model.d,
        "d_h": model.d_h,
        "d_z": model.d_z,
        "n_layers": model.n_layers,
        "n_targets": model.n_targets,
        "feature_set": model.feature_set,
        "node_vocab": {n: int(model.params[f"node_emb.{n}"].shape[0]) for n in model.node_feature_names},
        "edge_vocab": {n: int(model.params[f"edge_emb.{n}"].shape[0]) for n in model.edge_feature_names},
        "tensors": [[k, list(v.shape)] for k, v in model.params.items()],
        "meta": meta or {},
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(text)), text]
    for v in model.params.values():
        if not np.all(np.isfinite(v)):
            raise CheckpointError("refusing to save non-finite parameters")
        chunks.append(np.ascontiguousarray(v, dtype="<f4").tobytes())
    return b"".join(chunks)


def from_bytes(data: bytes) -> tuple[GinModel, dict]:
    if len(data) < 12 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointVersionMismatch(f"checkpoint format {version}, this build reads {FORMAT_VERSION}")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    offset = 12 + hlen
    params = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 4 * count
        if end > len(data):
            raise CheckpointError(f"checkpoint truncated inside tensor {name!r}")
        params[name] = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape).astype(np.float32)
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after the last tensor")
    model = GinModel(params, header["feature_set"], header["d"], header["d_h"], header["d_z"],
                     header["n_layers"], header["n_targets"])
    return model, header.get("meta", {})


def save_checkpoint(model: GinModel, path, meta: dict | None = None) -> None:
    atomic_write(path, to_bytes(model, meta))


def load_checkpoint(path) -> tuple[GinModel, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return from_bytes(data)
