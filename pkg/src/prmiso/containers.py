"""
Tiny self-describing binary container used for pilot frames and model
checkpoints.

Layout (little endian)::

    magic        8 bytes
    header_len   uint32
    header       header_len bytes of UTF-8 JSON; key "arrays" lists
                 [name, dtype ("f8" or "c16"), shape] in payload order
    payload      raw float64 values; complex arrays stored as interleaved
                 real/imag pairs
"""

import json
import struct

import numpy as np

from .numerics import ContractError

_LEN = struct.Struct("<I")


def write_container(path, magic, meta, arrays):
    """Write ``arrays`` (an ordered mapping name -> ndarray) after a JSON header."""
    if len(magic) != 8:
        raise ValueError("magic must be 8 bytes")
    specs = []
    chunks = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            arr = np.ascontiguousarray(arr, dtype=np.complex128)
            specs.append([name, "c16", list(arr.shape)])
            chunks.append(arr.view(np.float64).astype("<f8").tobytes())
        else:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            specs.append([name, "f8", list(arr.shape)])
            chunks.append(arr.astype("<f8").tobytes())
    header = dict(meta)
    header["arrays"] = specs
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(_LEN.pack(len(blob)))
        fh.write(blob)
        for c in chunks:
            fh.write(c)


def read_container(path, magic):
    """Return ``(meta, arrays)`` from a file written by :func:`write_container`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != magic:
        raise ContractError(f"{path}: bad magic {raw[:8]!r}, expected {magic!r}")
    (hlen,) = _LEN.unpack_from(raw, 8)
    meta = json.loads(raw[12:12 + hlen].decode("utf-8"))
    offset = 12 + hlen
    arrays = {}
    for name, kind, shape in meta.pop("arrays"):
        count = int(np.prod(shape, dtype=np.int64)) * (2 if kind == "c16" else 1)
        vals = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        if kind == "c16":
            vals = vals.astype(np.float64).view(np.complex128)
        arrays[name] = vals.reshape(shape).copy()
    if offset != len(raw):
        raise ContractError(f"{path}: {len(raw) - offset} trailing bytes")
    return meta, arrays
