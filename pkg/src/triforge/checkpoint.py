"""Self-describing binary container for model and optimizer state.

Layout: an 8-byte magic string, an 8-byte big-endian header length, a JSON
header, the concatenated little-endian float64 array payload, and a
trailing SHA-256 digest of everything before it.  The header records the
format version, model configuration, per-array offsets, and parameter
metadata, so a file round-trips bit-exactly and any single flipped byte is
caught on load.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .exceptions import CheckpointError

MAGIC = b"TRIFORGE"
FORMAT_VERSION = 1
_DIGEST_BYTES = 32


def write_container(path, meta: dict, arrays: dict) -> Path:
    """Write ``arrays`` (name -> float64 ndarray) with ``meta`` in the header."""
    path = Path(path)
    index = []
    chunks = []
    offset = 0
    for key in sorted(arrays):
        arr = np.ascontiguousarray(arrays[key], dtype="<f8")
        raw = arr.tobytes()
        index.append({"key": key, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = dict(meta)
    header["format_version"] = FORMAT_VERSION
    header["arrays"] = index
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    body = MAGIC + len(header_bytes).to_bytes(8, "big") + header_bytes + b"".join(chunks)
    digest = hashlib.sha256(body).digest()
    path.write_bytes(body + digest)
    return path


def read_container(path) -> tuple:
    """Read a container back as ``(meta, arrays)``; verifies digest and version."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 8 + _DIGEST_BYTES:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    body, digest = blob[:-_DIGEST_BYTES], blob[-_DIGEST_BYTES:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (file corrupt or tampered)")
    if body[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes; not a checkpoint file")
    header_len = int.from_bytes(body[len(MAGIC):len(MAGIC) + 8], "big")
    header_start = len(MAGIC) + 8
    try:
        header = json.loads(body[header_start:header_start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version!r} not supported (expected {FORMAT_VERSION})"
        )
    payload = body[header_start + header_len:]
    arrays = {}
    for entry in header["arrays"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        raw = payload[start:start + nbytes]
        if len(raw) != nbytes:
            raise CheckpointError(f"{path}: truncated payload for array {entry['key']!r}")
        arrays[entry["key"]] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
    meta = {k: v for k, v in header.items() if k not in ("arrays", "format_version")}
    return meta, arrays
