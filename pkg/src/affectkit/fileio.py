"""Framed binary file helpers.

Several on-disk artifacts share one framing: a single-line JSON header
(UTF-8, terminated by a newline) followed immediately by a raw block of
little-endian 32-bit floats in row-major order.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import IngestError


def write_framed(path: str | os.PathLike, header: dict, block: np.ndarray) -> None:
    """Write `header` as one JSON line, then `block` as little-endian float32."""
    data = np.ascontiguousarray(block, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(data.tobytes())


def read_framed(path: str | os.PathLike) -> tuple[dict, np.ndarray]:
    """Read a framed file; returns (header, flat float32 array)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        if not header_line.endswith(b"\n"):
            raise IngestError(f"{path}: missing newline-terminated JSON header")
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IngestError(f"{path}: invalid JSON header ({exc})") from exc
        raw = fh.read()
    if len(raw) % 4 != 0:
        raise IngestError(f"{path}: binary block length {len(raw)} is not a multiple of 4")
    flat = np.frombuffer(raw, dtype="<f4")
    return header, flat
