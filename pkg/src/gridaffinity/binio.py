"""Little-endian struct reading/writing shared by the binary containers."""

from __future__ import annotations

import struct

import numpy as np

from .errors import TruncatedFileError


class Reader:
    def __init__(self, data: bytes, what: str):
        self.buf = memoryview(data)
        self.pos = 0
        self.what = what

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"{self.what} truncated at byte {len(self.buf)} "
                                     f"(needed {self.pos + n})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        vals = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return vals[0] if len(vals) == 1 else vals

    def unpack_tuple(self, fmt: str) -> tuple:
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        n = self.unpack("H")
        return bytes(self.take(n)).decode("utf-8")

    def array(self, shape, dtype) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * dt.itemsize)
        return np.frombuffer(raw, dtype=dt).astype(np.dtype(dtype).newbyteorder("="), copy=True).reshape(shape)

    def at_end(self) -> bool:
        return self.pos == len(self.buf)


def pack(fmt: str, *vals) -> bytes:
    return struct.pack("<" + fmt, *vals)


def pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for container")
    return pack("H", len(raw)) + raw


def pack_array(a: np.ndarray, dtype) -> bytes:
    return np.ascontiguousarray(a, dtype=np.dtype(dtype).newbyteorder("<")).tobytes()
