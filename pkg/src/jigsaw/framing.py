"""Sentinel framing of torn parts and their placement inside a block.

A part is an arbitrary bit string of at most ``ps - 2`` bits. Framing wraps
it between two '1' bits so that, once it has been placed somewhere inside an
otherwise zero block, the receiver can find it again: the part is exactly
the run of bits strictly between the first and the last set bit.

    >>> framed = frame(BitString.from_str("01101"))
    >>> str(framed)
    '1011011'
    >>> str(embed(framed, 1, 8))
    '01011011'
    >>> str(extract(embed(framed, 1, 8)))
    '01101'
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .bitblock import Block, RandomSource, first_set_bit, last_set_bit
from .errors import EmbedError, FramingError


@dataclass(frozen=True, slots=True)
class BitString:
    """An ordered run of ``length`` bits stored MSB-first in ``value``.

    Leading zeros are significant: ``BitString(1, 3)`` is ``001``.
    """

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def empty(cls) -> BitString:
        return cls(0, 0)

    @classmethod
    def from_str(cls, bits: str) -> BitString:
        return cls(int(bits, 2) if bits else 0, len(bits))

    @classmethod
    def from_bytes(cls, data: bytes) -> BitString:
        return cls(int.from_bytes(data, "big"), len(data) * 8)

    @classmethod
    def join(cls, parts: Iterable[BitString]) -> BitString:
        """Concatenate many bit strings in linear time."""
        # Repeated shift-or is quadratic for megabit messages; go via text.
        text = "".join(str(p) for p in parts)
        return cls.from_str(text)

    def to_bytes(self) -> bytes:
        if self.length % 8:
            raise ValueError(f"{self.length} bits is not a whole number of bytes")
        return self.value.to_bytes(self.length // 8, "big")

    def popcount(self) -> int:
        return bin(self.value).count("1")

    def __len__(self) -> int:
        return self.length

    def __add__(self, other: BitString) -> BitString:
        return BitString((self.value << other.length) | other.value, self.length + other.length)

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""


def frame(part: BitString) -> BitString:
    """Wrap ``part`` as ``1 + part + 1``."""
    n = part.length
    return BitString((1 << (n + 1)) | (part.value << 1) | 1, n + 2)


def embed(framed: BitString, offset: int, ps: int) -> Block:
    """Place ``framed`` at MSB-first ``offset`` in an all-zero ``ps``-bit block."""
    n = framed.length
    if n < 2 or not (framed.value >> (n - 1)) & 1 or not framed.value & 1:
        raise EmbedError("framed part must start and end with a '1' sentinel")
    if n > ps:
        raise EmbedError(f"framed part of {n} bits does not fit in {ps} bits")
    if not 0 <= offset <= ps - n:
        raise EmbedError(f"offset {offset} out of range [0, {ps - n}]")
    return Block(framed.value << (ps - offset - n), ps)


def extract(block: Block) -> BitString:
    """Return the bits strictly between the first and last set bit.

    Raises:
        FramingError: if the block has fewer than two set bits.
    """
    first = first_set_bit(block)
    last = last_set_bit(block)
    if first is None or first == last:
        raise FramingError("block does not carry two sentinel bits")
    n = last - first - 1
    return BitString((block.value >> (block.ps - last)) & ((1 << n) - 1), n)


def random_offset(rng: RandomSource, framed_len: int, ps: int) -> int:
    """Draw a uniform legal offset for a framed part of ``framed_len`` bits."""
    if framed_len > ps:
        raise EmbedError(f"framed part of {framed_len} bits does not fit in {ps} bits")
    return rng.randrange(ps - framed_len + 1)
