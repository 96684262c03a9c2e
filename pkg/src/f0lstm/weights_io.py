"""Versioned binary weight files.

Layout (all integers little-endian)::

    magic        8 bytes   b"F0LSTMW\\x00"
    version      uint32
    header_len   uint32
    header       header_len bytes of UTF-8 JSON (sorted keys): architecture, feature_dim,
                 init_kind, gate_order, block count, extra metadata
    blocks       repeated: name_len uint16, name (UTF-8), ndim uint8, shape uint32 * ndim,
                 data float64 little-endian, C order

Per-gate blocks are written as ``layer{k}.{gate}.{Wx|Wh|b}``; the standardization stats
as ``input_mean`` / ``input_std``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .lstm import GATES, Architecture, LstmWeights

MAGIC = b"F0LSTMW\x00"
VERSION = 1


class WeightFormatError(ValueError):
    pass


def _blocks(w: LstmWeights):
    for k in range(len(w.layers)):
        for gate in GATES:
            for key, arr in w.gate(k, gate).items():
                yield f"layer{k}.{gate}.{key}", arr
    yield "proj.W", w.proj_W
    yield "proj.b", w.proj_b
    yield "input_mean", w.input_mean
    yield "input_std", w.input_std


def dumps(w: LstmWeights, metadata: Optional[dict] = None) -> bytes:
    blocks = list(_blocks(w))
    header = {
        "architecture": {"input_dim": w.arch.input_dim, "hidden": list(w.arch.hidden), "output_dim": w.arch.output_dim},
        "feature_dim": w.arch.input_dim,
        "init_kind": w.init_kind,
        "gate_order": list(GATES),
        "n_blocks": len(blocks),
        "metadata": metadata or {},
    }
    head = json.dumps(header, sort_keys=True).encode()
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(head))
    out += head
    for name, arr in blocks:
        raw = name.encode()
        out += struct.pack("<HB", len(raw), arr.ndim) + raw
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return bytes(out)


def loads(data: bytes) -> tuple[LstmWeights, dict]:
    """Parse a weight file; returns the weights and the header dict."""
    if data[:8] != MAGIC:
        raise WeightFormatError("not a weight file (bad magic)")
    try:
        version, head_len = struct.unpack_from("<II", data, 8)
        if version != VERSION:
            raise WeightFormatError(f"unsupported format version {version}")
        pos = 16
        header = json.loads(data[pos : pos + head_len])
        pos += head_len
        blocks = {}
        for _ in range(header["n_blocks"]):
            name_len, ndim = struct.unpack_from("<HB", data, pos)
            pos += 3
            name = data[pos : pos + name_len].decode()
            pos += name_len
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            blocks[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
            pos += 8 * count
    except WeightFormatError:
        raise
    except (struct.error, ValueError, KeyError) as exc:
        raise WeightFormatError(f"truncated or corrupt weight file: {exc}") from None
    if pos != len(data):
        raise WeightFormatError("trailing bytes after the last block")

    a = header["architecture"]
    arch = Architecture(a["input_dim"], tuple(a["hidden"]), a["output_dim"])
    try:
        layers = [
            {key: np.concatenate([blocks[f"layer{k}.{g}.{key}"] for g in GATES]) for key in ("Wx", "Wh", "b")}
            for k in range(len(arch.hidden))
        ]
        w = LstmWeights(arch, layers, blocks["proj.W"], blocks["proj.b"],
                        blocks["input_mean"], blocks["input_std"], header["init_kind"])
    except KeyError as exc:
        raise WeightFormatError(f"missing block {exc}") from None
    return w, header


def save(path, w: LstmWeights, metadata: Optional[dict] = None) -> Path:
    path = Path(path)
    path.write_bytes(dumps(w, metadata))
    return path


def load(path) -> LstmWeights:
    return loads(Path(path).read_bytes())[0]
