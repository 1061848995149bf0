"""NADF container: a binary one-file tensor archive.

Layout (all integers little-endian):

    bytes 0..3    magic ``NADF``
    bytes 4..7    uint32 format version (currently 1)
    bytes 8..15   uint64 length of the UTF-8 JSON header that follows
    header JSON   ``{"meta": {...}, "tensors": {name: {dtype, shape,
                  byte_offset, byte_len}}}``
    zero padding  up to the first 64-byte boundary past the header
    payload       raw little-endian float32 blobs

``byte_offset`` is relative to the start of the payload region; the payload
region itself begins at a 64-byte boundary of the file, so every tensor is
64-byte aligned in the file as well.  Offsets are strictly increasing,
non-overlapping, and each is a multiple of 64.

Only float32 payloads are accepted in version 1.  ``f16`` exists in the dtype
enum for forward compatibility but readers reject it.
"""

from __future__ import annotations

import io
import json
import struct
from typing import BinaryIO

import numpy as np

from .errors import InvalidBundle, NonFiniteData, NotABundle, Truncated

MAGIC = b"NADF"
VERSION = 1
ALIGN = 64

DTYPES = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}
SUPPORTED_DTYPES = {"f32"}


def _align_up(n: int) -> int:
    return (n + ALIGN - 1) // ALIGN * ALIGN


def _encode_header(meta: dict, index: dict) -> bytes:
    doc = {"meta": meta, "tensors": index}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_nadf(
    sink: BinaryIO,
    meta: dict,
    tensors: dict[str, np.ndarray],
    allow_nonfinite: bool = False,
) -> int:
    """Write ``tensors`` (name -> array) plus ``meta`` to ``sink``.

    Returns the total byte count written.  Arrays are converted to
    little-endian float32; non-finite values are rejected unless
    ``allow_nonfinite`` is set.
    """
    blobs: dict[str, bytes] = {}
    index: dict[str, dict] = {}
    offset = 0
    for name in tensors:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        if arr.ndim < 1 or any(d < 1 for d in arr.shape):
            raise InvalidBundle(f"tensor {name!r} has invalid shape {arr.shape}")
        if not allow_nonfinite and not np.all(np.isfinite(arr)):
            raise NonFiniteData(f"tensor {name!r} contains NaN/Inf")
        blob = arr.tobytes()
        index[name] = {
            "dtype": "f32",
            "shape": list(arr.shape),
            "byte_offset": offset,
            "byte_len": len(blob),
        }
        blobs[name] = blob
        offset = _align_up(offset + len(blob))

    header = _encode_header(meta, index)
    written = 0
    written += sink.write(MAGIC)
    written += sink.write(struct.pack("<I", VERSION))
    written += sink.write(struct.pack("<Q", len(header)))
    written += sink.write(header)
    payload_base = _align_up(written)
    written += sink.write(b"\x00" * (payload_base - written))
    pos = 0
    for name, blob in blobs.items():
        entry = index[name]
        written += sink.write(b"\x00" * (entry["byte_offset"] - pos))
        written += sink.write(blob)
        pos = entry["byte_offset"] + len(blob)
    return written


def read_nadf(source: BinaryIO, permissive: bool = False) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a NADF stream into ``(meta, tensors)``.

    Validates magic, version, alignment, offset monotonicity, and payload
    finiteness (skipped when ``permissive``).
    """
    head = source.read(16)
    if len(head) < 4 or head[:4] != MAGIC:
        raise NotABundle("stream does not start with NADF magic")
    if len(head) < 16:
        raise Truncated("stream ends inside the fixed header")
    version = struct.unpack("<I", head[4:8])[0]
    if version != VERSION:
        raise InvalidBundle(f"unsupported NADF version {version}")
    header_len = struct.unpack("<Q", head[8:16])[0]
    header = source.read(header_len)
    if len(header) < header_len:
        raise Truncated("stream ends inside the JSON header")
    try:
        doc = json.loads(header.decode("utf-8"))
        meta = doc["meta"]
        index = doc["tensors"]
    except (ValueError, KeyError) as exc:
        raise InvalidBundle(f"malformed header JSON: {exc}") from exc

    payload_base = _align_up(16 + header_len)
    pad = source.read(payload_base - 16 - header_len)
    if len(pad) < payload_base - 16 - header_len:
        raise Truncated("stream ends before the payload region")

    entries = sorted(index.items(), key=lambda kv: kv[1]["byte_offset"])
    prev_end = 0
    for name, entry in entries:
        if entry["dtype"] not in DTYPES:
            raise InvalidBundle(f"unknown dtype {entry['dtype']!r} for {name!r}")
        if entry["dtype"] not in SUPPORTED_DTYPES:
            raise InvalidBundle(f"dtype {entry['dtype']!r} not supported in v1 ({name!r})")
        shape = entry["shape"]
        if len(shape) < 1 or any(d < 1 for d in shape):
            raise InvalidBundle(f"invalid shape {shape} for {name!r}")
        expect = 4 * int(np.prod(shape))
        if entry["byte_len"] != expect:
            raise InvalidBundle(f"byte_len mismatch for {name!r}")
        if entry["byte_offset"] % ALIGN != 0:
            raise InvalidBundle(f"offset of {name!r} not 64-byte aligned")
        if entry["byte_offset"] < prev_end:
            raise InvalidBundle(f"overlapping payload at {name!r}")
        prev_end = entry["byte_offset"] + entry["byte_len"]

    payload = source.read(prev_end)
    if len(payload) < prev_end:
        raise Truncated("payload shorter than the index declares")

    tensors: dict[str, np.ndarray] = {}
    for name, entry in index.items():
        start = entry["byte_offset"]
        blob = payload[start : start + entry["byte_len"]]
        arr = np.frombuffer(blob, dtype="<f4").reshape(entry["shape"]).copy()
        if not permissive and not np.all(np.isfinite(arr)):
            raise NonFiniteData(f"tensor {name!r} contains NaN/Inf")
        tensors[name] = arr
    return meta, tensors


def write_nadf_file(path, meta: dict, tensors: dict[str, np.ndarray], **kw) -> int:
    with open(path, "wb") as fh:
        return write_nadf(fh, meta, tensors, **kw)


def read_nadf_file(path, permissive: bool = False) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        return read_nadf(fh, permissive=permissive)


def nadf_bytes(meta: dict, tensors: dict[str, np.ndarray], **kw) -> bytes:
    buf = io.BytesIO()
    write_nadf(buf, meta, tensors, **kw)
    return buf.getvalue()
