"""MSB-first bit packing used by all wire formats."""

from __future__ import annotations


class BitWriter:
    """Accumulates unsigned integer fields into a byte string, MSB first."""

    def __init__(self):
        self._acc = 0
        self._nbits = 0

    def write(self, value: int, nbits: int):
        if nbits <= 0 or nbits > 64:
            raise ValueError(f"field width out of range: {nbits}")
        value = int(value)
        if value < 0 or value >> nbits:
            raise ValueError(f"value {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._nbits += nbits

    @property
    def bit_length(self) -> int:
        return self._nbits

    def to_bytes(self) -> bytes:
        """Pad with zero bits to a byte boundary and serialize."""
        pad = (-self._nbits) % 8
        acc = self._acc << pad
        return acc.to_bytes((self._nbits + pad) // 8, "big")


class BitReader:
    """Reads unsigned integer fields from a byte string, MSB first."""

    def __init__(self, data: bytes):
        self._acc = int.from_bytes(data, "big")
        self._total = len(data) * 8
        self._pos = 0  # bit position

    @property
    def bits_left(self) -> int:
        return self._total - self._pos

    def read(self, nbits: int) -> int:
        if nbits <= 0 or nbits > 64:
            raise ValueError(f"field width out of range: {nbits}")
        if nbits > self.bits_left:
            raise EOFError("bit stream exhausted")
        shift = self._total - self._pos - nbits
        value = (self._acc >> shift) & ((1 << nbits) - 1)
        self._pos += nbits
        return value
