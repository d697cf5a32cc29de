"""Reader for the IDX binary tensor format (as used by the MNIST dataset).

Layout: 4-byte big-endian magic (0x00000801 for 1-D unsigned-byte vectors,
0x00000803 for 3-D unsigned-byte image stacks), one big-endian unsigned
32-bit size per dimension, then the payload as row-major unsigned bytes.
"""

from __future__ import annotations

import dataclasses
import struct
from typing import Tuple

import numpy as np

__all__ = ["IdxData", "read_idx"]

_MAGIC_DIMS = {0x00000801: 1, 0x00000803: 3}


@dataclasses.dataclass
class IdxData:
    dims: Tuple[int, ...]
    data: np.ndarray  # uint8, shape == dims


def read_idx(path: str) -> IdxData:
    """Parse an IDX file; raises ValueError naming the byte offset on a bad
    magic number or truncated header/payload."""
    with open(path, "rb") as fh:
        raw = fh.read()

    if len(raw) < 4:
        raise ValueError("truncated header at offset 0")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic not in _MAGIC_DIMS:
        raise ValueError(f"bad magic 0x{magic:08x} at offset 0")

    ndim = _MAGIC_DIMS[magic]
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise ValueError(f"truncated header at offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])

    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) < header_end + count:
        raise ValueError(f"truncated payload at offset {len(raw)}")
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_end).reshape(dims)
    return IdxData(dims=tuple(int(d) for d in dims), data=data.copy())
