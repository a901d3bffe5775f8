#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Canonical binary encoding primitives.

Big-endian fixed-width integers, length-prefixed byte strings and bitmaps.
The banknote and token-signature formats are built from these in
banknote.py and qtds.py; decoding is strict, so any trailing or missing
byte raises WireFormatError.
"""

import struct

import numpy as np

from sim_core import WireFormatError

FORMAT_VERSION = 1

_U8 = struct.Struct(">B")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class Writer:
    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "Writer":
        self._parts.append(_U8.pack(value))
        return self

    def u32(self, value: int) -> "Writer":
        self._parts.append(_U32.pack(value))
        return self

    def u64(self, value: int) -> "Writer":
        self._parts.append(_U64.pack(value))
        return self

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(bytes(data))
        return self

    def blob(self, data: bytes) -> "Writer":
        """u32 length followed by the bytes."""
        return self.u32(len(data)).raw(data)

    def bitmap(self, members, size: int) -> "Writer":
        bits = np.zeros(size, dtype=np.uint8)
        for m in members:
            bits[m] = 1
        return self.raw(np.packbits(bits).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes):
        self._data = memoryview(bytes(data))
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise WireFormatError(f"truncated input: wanted {n} bytes at offset {self._pos}")
        chunk = self._data[self._pos:self._pos + n].tobytes()
        self._pos += n
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def blob(self, limit: int | None = None) -> bytes:
        n = self.u32()
        if limit is not None and n > limit:
            raise WireFormatError(f"length prefix {n} exceeds limit {limit}")
        return self._take(n)

    def bitmap(self, size: int) -> set[int]:
        packed = np.frombuffer(self._take((size + 7) // 8), dtype=np.uint8)
        bits = np.unpackbits(packed)
        if np.any(bits[size:]):
            raise WireFormatError("non-zero padding bits in bitmap")
        return {int(i) for i in np.flatnonzero(bits[:size])}

    def version(self, expected: int = FORMAT_VERSION):
        got = self.u8()
        if got != expected:
            raise WireFormatError(f"unsupported format version {got}")

    def finish(self):
        if self._pos != len(self._data):
            raise WireFormatError(f"{len(self._data) - self._pos} trailing bytes")
