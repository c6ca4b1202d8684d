"""Fixed-width block arithmetic.

A :class:`Block` is an unsigned ``ps``-bit integer. Bits are indexed
MSB-first: bit 0 is the most significant (leftmost) bit, matching the way
binary strings are written.

Randomness comes from a *random source*, which is any object with the
:class:`random.Random` interface (``getrandbits``, ``randrange``,
``randbytes``). :func:`random_source` builds a seeded generator for tests
or an OS-entropy generator for production.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .errors import NotInvertibleError, WidthError

RandomSource = random.Random

# Block widths below 16 are accepted so that small worked examples and
# exhaustive checks can run at ps=8.
MIN_PS = 8


def check_ps(ps: int) -> None:
    if ps < MIN_PS or ps % 8:
        raise ValueError(f"block width must be a multiple of 8 and >= {MIN_PS}, got {ps}")


@dataclass(frozen=True, slots=True)
class Block:
    value: int
    ps: int

    def __post_init__(self):
        check_ps(self.ps)
        if not 0 <= self.value < (1 << self.ps):
            raise ValueError(f"value does not fit in {self.ps} bits")

    @classmethod
    def zero(cls, ps: int) -> Block:
        return cls(0, ps)

    @classmethod
    def from_bytes(cls, data: bytes) -> Block:
        return cls(int.from_bytes(data, "big"), len(data) * 8)

    @classmethod
    def from_str(cls, bits: str) -> Block:
        """Build a block from a string of '0'/'1' characters."""
        return cls(int(bits, 2), len(bits))

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.ps // 8, "big")

    def bit(self, index: int) -> int:
        if not 0 <= index < self.ps:
            raise IndexError(index)
        return (self.value >> (self.ps - 1 - index)) & 1

    @property
    def is_odd(self) -> bool:
        return bool(self.value & 1)

    def __str__(self) -> str:
        return format(self.value, f"0{self.ps}b")


def _check_widths(a: Block, b: Block) -> None:
    if a.ps != b.ps:
        raise WidthError(f"width mismatch: {a.ps} vs {b.ps}")


def xor_block(a: Block, b: Block) -> Block:
    _check_widths(a, b)
    return Block(a.value ^ b.value, a.ps)


def mul_mod(a: Block, r: Block) -> Block:
    """Multiply two blocks as unsigned integers, reduced mod ``2**ps``."""
    _check_widths(a, r)
    return Block((a.value * r.value) & ((1 << a.ps) - 1), a.ps)


def inverse_odd(r: Block) -> Block:
    """Return ``s`` with ``mul_mod(r, s) == 1``.

    Raises:
        NotInvertibleError: if ``r`` is even (no inverse exists mod 2**ps).
    """
    if not r.value & 1:
        raise NotInvertibleError("even blocks have no inverse modulo 2**ps")
    return Block(pow(r.value, -1, 1 << r.ps), r.ps)


def random_block(rng: RandomSource, ps: int, force_odd: bool = False) -> Block:
    check_ps(ps)
    value = rng.getrandbits(ps)
    if force_odd:
        value |= 1
    return Block(value, ps)


def first_set_bit(b: Block) -> Optional[int]:
    if not b.value:
        return None
    return b.ps - b.value.bit_length()


def last_set_bit(b: Block) -> Optional[int]:
    if not b.value:
        return None
    # Isolate the lowest set bit; its position from the right gives the index.
    lowest = (b.value & -b.value).bit_length() - 1
    return b.ps - 1 - lowest


def random_source(seed: Optional[int] = None) -> RandomSource:
    """Return a deterministic generator for ``seed``, or OS entropy if None."""
    if seed is None:
        return random.SystemRandom()
    return random.Random(seed)
