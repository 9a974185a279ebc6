"""Binary feature files and JSON manifests.

Layout (little-endian)::

    b"DSRF" | u32 version | u32 T | u32 d_v | u32 d_a | u8 has_frame_labels
    f32 visual[T*d_v] | f32 audio[T*d_a] | u8 frame_labels[T] (optional)
    u8 video_label | u32 crc32(all preceding bytes)

The id is not stored; it is the file stem or the manifest entry.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, ChecksumError, ContractError, TruncationError, VersionError

MAGIC = b"DSRF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIB")


@dataclass
class FeatureSequence:
    visual: np.ndarray
    audio: np.ndarray | None = None
    frame_labels: np.ndarray | None = None
    video_label: int = 0
    id: str = ""

    def __post_init__(self):
        self.visual = np.asarray(self.visual)
        if self.visual.ndim != 2:
            raise ContractError(f"visual features must be T x d, got {self.visual.shape}")
        T = self.visual.shape[0]
        if self.audio is not None:
            self.audio = np.asarray(self.audio)
            if self.audio.ndim != 2 or self.audio.shape[0] != T:
                raise ContractError(f"audio shape {self.audio.shape} does not match T={T}")
        if self.frame_labels is not None:
            self.frame_labels = np.asarray(self.frame_labels, dtype=np.uint8)
            if self.frame_labels.shape != (T,):
                raise ContractError(f"frame labels shape {self.frame_labels.shape} != ({T},)")
            if int(self.video_label) != int(self.frame_labels.any()):
                raise ContractError("video label must equal OR of frame labels")
        self.video_label = int(self.video_label)

    @property
    def T(self):
        return self.visual.shape[0]


def encode(f: FeatureSequence) -> bytes:
    d_a = 0 if f.audio is None else f.audio.shape[1]
    has = f.frame_labels is not None
    parts = [
        _HEADER.pack(MAGIC, VERSION, f.T, f.visual.shape[1], d_a, int(has)),
        np.ascontiguousarray(f.visual, dtype="<f4").tobytes(),
    ]
    if f.audio is not None:
        parts.append(np.ascontiguousarray(f.audio, dtype="<f4").tobytes())
    if has:
        parts.append(np.asarray(f.frame_labels, dtype=np.uint8).tobytes())
    parts.append(struct.pack("<B", f.video_label))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode(buf: bytes, path=None, id="") -> FeatureSequence:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:4]!r}", path)
    if len(buf) < _HEADER.size:
        raise TruncationError("file shorter than header", path)
    _, version, T, d_v, d_a, has = _HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise VersionError(f"unsupported version {version} (expected {VERSION})", path)
    need = _HEADER.size + 4 * T * (d_v + d_a) + (T if has else 0) + 1 + 4
    if len(buf) < need:
        raise TruncationError(f"expected {need} bytes, found {len(buf)}", path)
    body, (crc,) = buf[: need - 4], struct.unpack_from("<I", buf, need - 4)
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumError("CRC32 mismatch", path)
    off = _HEADER.size
    visual = np.frombuffer(buf, dtype="<f4", count=T * d_v, offset=off).reshape(T, d_v).astype(np.float32)
    off += 4 * T * d_v
    audio = None
    if d_a:
        audio = np.frombuffer(buf, dtype="<f4", count=T * d_a, offset=off).reshape(T, d_a).astype(np.float32)
        off += 4 * T * d_a
    labels = None
    if has:
        labels = np.frombuffer(buf, dtype=np.uint8, count=T, offset=off).copy()
        off += T
    return FeatureSequence(visual, audio, labels, buf[off], id)


def write_feature_file(f: FeatureSequence, path):
    path = Path(path)
    path.write_bytes(encode(f))
    return path


def read_feature_file(path, id=None) -> FeatureSequence:
    path = Path(path)
    return decode(path.read_bytes(), path, id if id is not None else path.stem)


def write_manifest(entries, path):
    """entries: iterable of dicts with keys id, path, split."""
    entries = [{"id": e["id"], "path": str(e["path"]), "split": e["split"]} for e in entries]
    for e in entries:
        if e["split"] not in ("train", "val", "test"):
            raise ContractError(f"bad split {e['split']!r} for {e['id']}")
    Path(path).write_text(json.dumps(entries, indent=2) + "\n")


def read_manifest(path):
    path = Path(path)
    entries = json.loads(path.read_text())
    for e in entries:
        p = Path(e["path"])
        if not p.is_absolute():
            e["path"] = str(path.parent / p)
    return entries


def load_split(manifest_path, split):
    return [read_feature_file(e["path"], e["id"]) for e in read_manifest(manifest_path) if e["split"] == split]
