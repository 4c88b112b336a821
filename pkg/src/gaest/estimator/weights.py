"""Versioned binary weight files.

Layout (all integers little-endian)::

    b"GAWT"                 magic
    u16 version             currently 1
    u32 meta_len, bytes     UTF-8 JSON: architecture, modality, transform, header
    u32 n_tensors
    per tensor: u16 name_len, name, u8 ndim, u32 dims[ndim], float32 data[prod(dims)]
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from gaest.errors import ValidationError
from gaest.estimator.networks import HeteroscedasticNet, build_network

MAGIC = b"GAWT"
VERSION = 1


def weights_bytes(net: HeteroscedasticNet, header: dict | None = None) -> bytes:
    meta = {"architecture": net.architecture(), "modality": net.modality,
            "transform": asdict(net.transform), "header": header}
    meta_raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(meta_raw)), meta_raw,
             struct.pack("<I", len(net.params))]
    for name, arr in net.params.items():
        raw_name = name.encode()
        parts.append(struct.pack("<HB", len(raw_name), arr.ndim) + raw_name)
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def save_weights(net: HeteroscedasticNet, path, header: dict | None = None) -> None:
    Path(path).write_bytes(weights_bytes(net, header))


def load_weights(path) -> tuple[HeteroscedasticNet, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValidationError(f"{path}: not a gaest weight file")
    version, meta_len = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported weight file version {version}")
    pos = 10
    meta = json.loads(raw[pos:pos + meta_len])
    pos += meta_len
    net = build_network(meta["architecture"])
    (n_tensors,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    for _ in range(n_tensors):
        name_len, ndim = struct.unpack_from("<HB", raw, pos)
        pos += 3
        name = raw[pos:pos + name_len].decode()
        pos += name_len
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=pos).reshape(shape)
        pos += 4 * count
        if name not in net.params or net.params[name].shape != arr.shape:
            raise ValidationError(f"{path}: tensor {name} {shape} does not fit {meta['architecture']['class']}")
        net.params[name] = arr.astype(np.float32)
    return net, meta
