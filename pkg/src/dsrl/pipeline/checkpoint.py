"""Versioned binary checkpoints with the feature-file magic/CRC discipline.

Layout (little-endian)::

    b"DSRK" | u32 version | u32 header_len | header (UTF-8 JSON)
    f64 payload (parameters in header order, row-major) | u32 crc32(all preceding bytes)

The header holds the model config and the ordered (name, shape) list.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .. import tensor_diff as td
from ..errors import BadMagicError, ChecksumError, TruncationError, VersionError
from .model import Model, ModelConfig

MAGIC = b"DSRK"
VERSION = 1


def encode_checkpoint(model):
    names = sorted(model.params)
    header = {
        "config": model.cfg.to_dict(),
        "params": [[n, list(model.params[n].shape)] for n in names],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    payload = b"".join(np.ascontiguousarray(model.params[n].data, dtype="<f8").tobytes() for n in names)
    body = MAGIC + struct.pack("<II", VERSION, len(hbytes)) + hbytes + payload
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_checkpoint(model, path):
    path = Path(path)
    path.write_bytes(encode_checkpoint(model))
    return path


def load_checkpoint(path):
    path = Path(path)
    buf = path.read_bytes()
    if buf[:4] != MAGIC:
        raise BadMagicError(f"bad checkpoint magic {buf[:4]!r}", path)
    if len(buf) < 16:
        raise TruncationError("checkpoint shorter than header", path)
    version, hlen = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise VersionError(f"checkpoint version {version}, expected {VERSION}", path)
    if len(buf) < 12 + hlen + 4:
        raise TruncationError("checkpoint header truncated", path)
    header = json.loads(buf[12 : 12 + hlen].decode())
    count = sum(int(np.prod(shape)) for _, shape in header["params"])
    end = 12 + hlen + 8 * count
    if len(buf) < end + 4:
        raise TruncationError(f"expected {end + 4} bytes, found {len(buf)}", path)
    (crc,) = struct.unpack_from("<I", buf, end)
    if zlib.crc32(buf[:end]) & 0xFFFFFFFF != crc:
        raise ChecksumError("CRC32 mismatch", path)
    flat = np.frombuffer(buf, dtype="<f8", count=count, offset=12 + hlen)
    params, off = {}, 0
    for name, shape in header["params"]:
        n = int(np.prod(shape))
        params[name] = td.parameter(flat[off : off + n].reshape(shape), name=name)
        off += n
    return Model(ModelConfig.from_dict(header["config"]), params)
