"""On-disk checkpoint format.

Layout (bit-exact round trip required):

    HMGRL-CKPT v1\n
    meta\t<json hyperparameter record>\n
    <name>\t<rows>\t<cols>\n followed by rows*cols little-endian float64
    ... one such record per tensor, in insertion order
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import DataError, ParameterError

MAGIC = b"HMGRL-CKPT v1\n"


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(b"meta\t" + json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
        for name, arr in tensors.items():
            if "\t" in name or "\n" in name:
                raise ParameterError(f"tensor name {name!r} contains tab/newline")
            a = np.ascontiguousarray(arr, dtype="<f8")
            if a.ndim != 2:
                raise ParameterError(f"tensor {name!r} is not 2-D")
            fh.write(f"{name}\t{a.shape[0]}\t{a.shape[1]}\n".encode("utf-8"))
            fh.write(a.tobytes(order="C"))


def _read_line(fh, path) -> bytes:
    buf = bytearray()
    while True:
        ch = fh.read(1)
        if not ch:
            if buf:
                raise DataError("truncated record header", path=path)
            return b""
        if ch == b"\n":
            return bytes(buf)
        buf += ch


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (tensors in file order, meta)."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataError("bad magic: not a checkpoint file", path=path)
        meta_line = _read_line(fh, path)
        if not meta_line.startswith(b"meta\t"):
            raise DataError("missing meta record", path=path)
        meta = json.loads(meta_line[5:].decode("utf-8"))
        tensors: dict[str, np.ndarray] = {}
        while True:
            header = _read_line(fh, path)
            if not header:
                break
            parts = header.decode("utf-8").split("\t")
            if len(parts) != 3:
                raise DataError(f"malformed tensor header {header!r}", path=path)
            name, rows, cols = parts[0], int(parts[1]), int(parts[2])
            raw = fh.read(rows * cols * 8)
            if len(raw) != rows * cols * 8:
                raise DataError(f"truncated payload for tensor {name!r}", path=path)
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
    return tensors, meta
