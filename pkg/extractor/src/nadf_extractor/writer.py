"""Stand-alone NADF writer.

Implements the activation-bundle container from its format description
rather than reusing the analysis toolkit's serializer, so the two sides can
cross-check each other.  Layout:

    bytes 0..3    magic ``NADF``
    bytes 4..7    uint32 version (1), little-endian
    bytes 8..15   uint64 header length, little-endian
    header        compact sorted-keys UTF-8 JSON:
                  {"meta": {...}, "tensors": {name: {dtype, shape,
                  byte_offset, byte_len}}}
    padding       zeros to the next 64-byte file boundary
    payload       little-endian float32 blobs; ``byte_offset`` is relative
                  to the payload start and each offset is a multiple of 64

Only float32 is written (version 1 readers accept nothing else).
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .errors import ExtractorError

_MAGIC = b"NADF"
_VERSION = 1
_ALIGN = 64


def _pad_to(n: int) -> int:
    rem = n % _ALIGN
    return 0 if rem == 0 else _ALIGN - rem


def serialize(meta: dict, tensors: dict[str, np.ndarray]) -> bytes:
    """Encode ``tensors`` plus ``meta`` into one NADF byte string."""
    index: dict[str, dict] = {}
    payload = bytearray()
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype="<f4")
        if arr.ndim < 1 or 0 in arr.shape:
            raise ExtractorError(f"tensor {name!r} has empty shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ExtractorError(f"tensor {name!r} contains NaN/Inf")
        payload.extend(b"\x00" * _pad_to(len(payload)))
        blob = arr.tobytes()
        index[name] = {
            "dtype": "f32",
            "shape": list(arr.shape),
            "byte_offset": len(payload),
            "byte_len": len(blob),
        }
        payload.extend(blob)

    header = json.dumps(
        {"meta": meta, "tensors": index},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    prefix = _MAGIC + struct.pack("<I", _VERSION) + struct.pack("<Q", len(header))
    head = prefix + header
    return head + b"\x00" * _pad_to(len(head)) + bytes(payload)


def write_bundle(path, config: dict, tensors: dict[str, np.ndarray],
                 preprocessing: dict | None = None) -> None:
    """Write one activation bundle (``kind: activation_bundle``) to disk."""
    meta: dict = {"kind": "activation_bundle", "config": config}
    if preprocessing is not None:
        meta["preprocessing"] = preprocessing
    with open(path, "wb") as fh:
        fh.write(serialize(meta, tensors))


def tensor_checksums(tensors: dict[str, np.ndarray]) -> dict[str, str]:
    """SHA-256 of each tensor's little-endian float32 payload bytes."""
    return {
        name: hashlib.sha256(
            np.ascontiguousarray(value, dtype="<f4").tobytes()).hexdigest()
        for name, value in sorted(tensors.items())
    }
