"""Vectorized LEB128-style varint codec for unsigned integer arrays.

The abstraction cache stores millions of successor ids; encoding them one
Python int at a time is the bottleneck, so both directions work on whole
numpy arrays.
"""

from __future__ import annotations

import numpy as np

_MAX_BYTES = 10  # enough for uint64


def encode(values: np.ndarray) -> bytes:
    """Encode a non-negative integer array as a concatenated varint stream."""
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return b""
    nbytes = np.ones(v.shape, dtype=np.int64)
    thresh = np.uint64(1 << 7)
    for _ in range(_MAX_BYTES - 1):
        mask = v >= thresh
        if not mask.any():
            break
        nbytes += mask
        if thresh >= np.uint64(1 << 62):
            break
        thresh = thresh << np.uint64(7)
    offsets = np.concatenate(([0], np.cumsum(nbytes)))
    out = np.zeros(offsets[-1], dtype=np.uint8)
    for p in range(int(nbytes.max())):
        mask = nbytes > p
        idx = offsets[:-1][mask] + p
        chunk = (v[mask] >> np.uint64(7 * p)) & np.uint64(0x7F)
        cont = (nbytes[mask] - 1 > p).astype(np.uint8) << 7
        out[idx] = chunk.astype(np.uint8) | cont
    return out.tobytes()


def decode(buf: bytes, count: int) -> np.ndarray:
    """Decode exactly ``count`` varints; returns ``(values, bytes_consumed)``."""
    b = np.frombuffer(buf, dtype=np.uint8)
    if count == 0:
        return np.empty(0, dtype=np.uint64), 0
    is_end = (b & 0x80) == 0
    end_positions = np.flatnonzero(is_end)
    if end_positions.size < count:
        raise ValueError("varint stream truncated")
    last = int(end_positions[count - 1])
    b = b[: last + 1]
    is_end = is_end[: last + 1]
    # value id per byte and position of each byte within its value
    vid = np.cumsum(is_end) - is_end
    starts = np.concatenate(([0], end_positions[: count - 1] + 1))
    pos = np.arange(b.size) - starts[vid]
    vals = np.zeros(count, dtype=np.uint64)
    for p in range(int(pos.max()) + 1):
        m = pos == p
        vals[vid[m]] |= (b[m] & np.uint8(0x7F)).astype(np.uint64) << np.uint64(7 * p)
    return vals, last + 1
