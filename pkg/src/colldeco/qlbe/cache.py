"""Binary cache for precomputed kernels.

Layout: a magic line, an 8-byte little-endian header length, a UTF-8 JSON
header, then the arrays in header order, each written with ``numpy.save``.
A cache is used only if its header matches the requested one exactly.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from colldeco.errors import OutputError

MAGIC = b"COLLDECO-KERNEL\n"


def save_kernel(path, header: dict, arrays: dict) -> None:
    full = dict(header, arrays=list(arrays))
    blob = json.dumps(full, sort_keys=True).encode()
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".kernel-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for name in arrays:
                np.save(fh, np.ascontiguousarray(arrays[name]), allow_pickle=False)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError("IO_ERROR", f"cannot write kernel cache {path}: {exc}") from exc


def read_kernel(path) -> tuple[dict, dict]:
    try:
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise OutputError("IO_ERROR", f"{path} is not a kernel cache file")
            (n,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(n).decode())
            arrays = {name: np.load(fh, allow_pickle=False) for name in header.get("arrays", [])}
    except OSError as exc:
        raise OutputError("IO_ERROR", f"cannot read kernel cache {path}: {exc}") from exc
    return header, arrays


def load_kernel(path, expected: dict):
    """Arrays from ``path`` if it exists and was built for ``expected``; otherwise None."""
    if not os.path.exists(path):
        return None
    header, arrays = read_kernel(path)
    header.pop("arrays", None)
    if json.dumps(header, sort_keys=True) != json.dumps(expected, sort_keys=True):
        return None
    return arrays
