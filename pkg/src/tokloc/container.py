"""Columnar binary container: one JSON header line plus raw array blobs.

Used for feature-matrix files and model files (docs/models.md). Arrays are
stored C-order little-endian in manifest order; integers round-trip exactly
and reals keep full stored precision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"#tokloc-container 1\n"


class ContainerError(Exception):
    pass


def _le_dtype(arr: np.ndarray) -> np.dtype:
    dt = arr.dtype.newbyteorder("<")
    return dt


def write_container(path: str | Path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dt = _le_dtype(arr)
        blob = arr.astype(dt, copy=False).tobytes()
        manifest.append({"name": name, "dtype": dt.str, "shape": list(arr.shape)})
        blobs.append(blob)
    full_header = dict(header)
    full_header["arrays"] = manifest
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(full_header, ensure_ascii=False).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise ContainerError(f"{path}: not a tokloc container (bad magic)")
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ContainerError(f"{path}: bad container header: {e}") from None
        arrays = {}
        for entry in header.pop("arrays", []):
            dt = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            nbytes = int(dt.itemsize * np.prod(shape, dtype=np.int64))
            blob = fh.read(nbytes)
            if len(blob) != nbytes:
                raise ContainerError(
                    f"{path}: truncated container (array '{entry['name']}' incomplete)"
                )
            arrays[entry["name"]] = np.frombuffer(blob, dtype=dt).reshape(shape).copy()
    return header, arrays
